"""Evaluation protocol: l1, l2, PSNR, SSIM, FID, bucketed by mask ratio.

All pixel metrics operate on metric-domain images ([0, 1]) as numpy arrays,
channel-first or single-channel. Reports group image pairs into five mask-
ratio buckets and render as CSV or an aligned text table; l1/l2 are stored
raw and displayed in units of 1e-3 to match the usual table convention.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass

import cv2
import numpy as np

from regionfill import masks

BUCKETS = ((0.0, 0.1), (0.1, 0.2), (0.2, 0.3), (0.3, 0.4), (0.4, 0.5))

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03

PSNR_CAP_DB = 100.0
_PSNR_MSE_FLOOR = 1e-10


class MetricError(ValueError):
    """Shape mismatch or an image unusable for the requested metric."""


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise MetricError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def l1_error(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.abs(a - b).mean())


def l2_error(a, b) -> float:
    a, b = _pair(a, b)
    return float(((a - b) ** 2).mean())


def psnr(a, b) -> float:
    """10*log10(1/MSE) for unit dynamic range, capped at 100 dB."""
    mse = l2_error(a, b)
    if mse < _PSNR_MSE_FLOOR:
        return PSNR_CAP_DB
    return float(10.0 * np.log10(1.0 / mse))


def _gaussian_kernel2d() -> np.ndarray:
    ax = np.arange(_SSIM_WINDOW, dtype=np.float64) - (_SSIM_WINDOW - 1) / 2
    k = np.exp(-(ax**2) / (2 * _SSIM_SIGMA**2))
    k2 = np.outer(k, k)
    return k2 / k2.sum()


def _ssim_channel(x: np.ndarray, y: np.ndarray, kernel: np.ndarray) -> float:
    c1 = _SSIM_K1**2
    c2 = _SSIM_K2**2
    r = _SSIM_WINDOW // 2

    def smooth(img):
        return cv2.filter2D(img, -1, kernel)[r:-r, r:-r]

    mx = smooth(x)
    my = smooth(y)
    vx = smooth(x * x) - mx * mx
    vy = smooth(y * y) - my * my
    cxy = smooth(x * y) - mx * my
    num = (2 * mx * my + c1) * (2 * cxy + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float((num / den).mean())


def ssim(a, b) -> float:
    """Mean local SSIM over valid 11x11 Gaussian windows (sigma 1.5), unit
    dynamic range, averaged across channels. Accepts (H,W) or (C,H,W)."""
    a, b = _pair(a, b)
    if a.ndim == 2:
        a = a[None]
        b = b[None]
    if a.ndim != 3:
        raise MetricError(f"expected (H,W) or (C,H,W) image, got shape {a.shape}")
    if min(a.shape[-2:]) < _SSIM_WINDOW:
        raise MetricError(
            f"image {a.shape[-2:]} smaller than the {_SSIM_WINDOW}x{_SSIM_WINDOW} window"
        )
    kernel = _gaussian_kernel2d()
    return float(np.mean([_ssim_channel(a[c], b[c], kernel) for c in range(a.shape[0])]))


def _sqrtm_psd(m: np.ndarray, context: str) -> np.ndarray:
    vals, vecs = np.linalg.eigh((m + m.T) / 2)
    floor = -1e-10 * max(float(vals.max()), 1.0)
    if vals.min() < floor:
        warnings.warn(
            f"clamped negative eigenvalues (min {vals.min():.3e}) in {context}",
            RuntimeWarning,
            stacklevel=3,
        )
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def fid(features_a: np.ndarray, features_b: np.ndarray) -> float:
    """Frechet distance between Gaussian fits of two embedding sets.

    ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)), with the matrix
    square root taken through the symmetric product sqrt(S_a) S_b sqrt(S_a).
    """
    fa = np.asarray(features_a, dtype=np.float64)
    fb = np.asarray(features_b, dtype=np.float64)
    if fa.ndim != 2 or fb.ndim != 2 or fa.shape[1] != fb.shape[1]:
        raise MetricError(
            f"expected (N,d) embedding sets with equal d, got {fa.shape} and {fb.shape}"
        )
    if len(fa) < 2 or len(fb) < 2:
        raise MetricError("need at least 2 samples per set to fit a covariance")
    mu_a, mu_b = fa.mean(axis=0), fb.mean(axis=0)
    cov_a = np.cov(fa, rowvar=False)
    cov_b = np.cov(fb, rowvar=False)
    cov_a = np.atleast_2d(cov_a)
    cov_b = np.atleast_2d(cov_b)
    sqrt_a = _sqrtm_psd(cov_a, "FID covariance root")
    inner = _sqrtm_psd(sqrt_a @ cov_b @ sqrt_a, "FID product root")
    mean_gap = float(((mu_a - mu_b) ** 2).sum())
    trace_gap = float(np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(inner))
    return mean_gap + trace_gap


def bucket_index(ratio: float) -> int:
    """Five ratio buckets; ratios above 0.5 fold into the last one."""
    if ratio < 0:
        raise MetricError(f"mask ratio must be >= 0, got {ratio}")
    return min(int(ratio * 10), 4)


def bucket_label(index: int) -> str:
    lo, hi = BUCKETS[index]
    close = "]" if index == len(BUCKETS) - 1 else ")"
    return f"[{lo * 100:.0f}%,{hi * 100:.0f}%{close}"


@dataclass(frozen=True)
class BucketRow:
    label: str
    count: int
    l1: float | None
    l2: float | None
    psnr: float | None
    ssim: float | None
    fid: float | None


@dataclass(frozen=True)
class MetricsReport:
    rows: tuple[BucketRow, ...]

    @property
    def total_count(self) -> int:
        return sum(r.count for r in self.rows)


class MeanPoolEmbedder:
    """Default desk-scale FID embedder: frozen tiny backbone pool3 features,
    globally average-pooled to one vector per image."""

    def __init__(self, seed: int = 0):
        from regionfill.features import TinyBackbone

        self.backbone = TinyBackbone(seed=seed).double()

    def __call__(self, images: list[np.ndarray]) -> np.ndarray:
        import torch

        from regionfill.features import extract_features

        batch = torch.from_numpy(np.stack(images)).double()
        with torch.no_grad():
            feats = extract_features(self.backbone, batch, stages=("pool3",))["pool3"]
        return feats.mean(dim=(-2, -1)).numpy()


def evaluate_corpus(
    inpaint_fn,
    images: list[np.ndarray],
    mask_list: list[np.ndarray],
    embedder=None,
) -> MetricsReport:
    """Run `inpaint_fn(image, mask) -> composited image` over (image, mask)
    pairs (all metric-domain, channel-first) and aggregate per ratio bucket.

    Pixel metrics are averaged within each bucket; FID compares the bucket's
    outputs against its ground truths as sets. Buckets with no samples (or
    too few for FID) report None fields rather than erroring.
    """
    if len(images) != len(mask_list):
        raise MetricError(
            f"got {len(images)} images but {len(mask_list)} masks"
        )
    if embedder is None:
        embedder = MeanPoolEmbedder()

    per_bucket: list[list[tuple[np.ndarray, np.ndarray]]] = [[] for _ in BUCKETS]
    for img, m in zip(images, mask_list):
        out = np.asarray(inpaint_fn(img, m), dtype=np.float64)
        per_bucket[bucket_index(masks.mask_ratio(m))].append(
            (out, np.asarray(img, dtype=np.float64))
        )

    rows = []
    for idx, pairs in enumerate(per_bucket):
        if not pairs:
            rows.append(BucketRow(bucket_label(idx), 0, None, None, None, None, None))
            continue
        l1s = [l1_error(o, g) for o, g in pairs]
        l2s = [l2_error(o, g) for o, g in pairs]
        psnrs = [psnr(o, g) for o, g in pairs]
        ssims = [ssim(o, g) for o, g in pairs]
        fid_val = None
        if len(pairs) >= 2:
            fid_val = fid(
                embedder([o for o, _ in pairs]), embedder([g for _, g in pairs])
            )
        rows.append(
            BucketRow(
                bucket_label(idx),
                len(pairs),
                float(np.mean(l1s)),
                float(np.mean(l2s)),
                float(np.mean(psnrs)),
                float(np.mean(ssims)),
                fid_val,
            )
        )
    return MetricsReport(rows=tuple(rows))


_CSV_HEADER = ("bucket", "count", "l1_x1e3", "l2_x1e3", "psnr_db", "ssim", "fid")


def _row_cells(row: BucketRow) -> list[str]:
    def fmt(v, scale=1.0, digits=4):
        return "n/a" if v is None else f"{v * scale:.{digits}f}"

    return [
        row.label,
        str(row.count),
        fmt(row.l1, 1e3),
        fmt(row.l2, 1e3),
        fmt(row.psnr, digits=2),
        fmt(row.ssim),
        fmt(row.fid),
    ]


def report_to_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(_CSV_HEADER)
    for row in report.rows:
        writer.writerow(_row_cells(row))
    return buf.getvalue()


def report_to_table(report: MetricsReport) -> str:
    header = list(_CSV_HEADER)
    body = [_row_cells(r) for r in report.rows]
    widths = [max(len(h), *(len(b[i]) for b in body)) for i, h in enumerate(header)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for cells in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)))
    return "\n".join(lines)
