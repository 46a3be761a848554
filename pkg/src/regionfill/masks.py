"""Binary irregular masks: generation, resizing, compositing, file IO.

Convention used everywhere in this package: a mask is a 2-D uint8 array whose
cells are exactly 0 (missing pixel, to be synthesized) or 1 (existing pixel).
The convention is never inverted internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from io import BytesIO
from pathlib import Path

import cv2
import numpy as np
from PIL import Image
from scipy import ndimage

CONTIGUOUS = "contiguous"
DISCONTIGUOUS = "discontiguous"

RATIO_CAP = 0.6
RETRY_BUDGET = 100

# 4-connectivity structuring element for component counting
_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.uint8)


class MaskError(ValueError):
    """Invalid mask or mask/image shape combination."""


class MaskGenerationError(RuntimeError):
    """Requested mask could not be generated (bad ratio range or retry budget spent)."""


@dataclass(frozen=True)
class MaskConfig:
    """Parameters of the irregular mask sampler.

    ratio_range is the target fraction of missing pixels, capped at 0.6.
    Stroke parameters control the brush: number of independent shapes
    (discontiguous only), brush width range, and vertices per walk.
    """

    kind: str = CONTIGUOUS
    ratio_range: tuple[float, float] = (0.1, 0.4)
    stroke_count: tuple[int, int] = (4, 10)
    stroke_width: tuple[int, int] = (8, 24)
    vertex_count: tuple[int, int] = (4, 12)
    rng_seed: int = 0


def _validate_ratio_range(ratio_range: tuple[float, float]) -> tuple[float, float]:
    lo, hi = float(ratio_range[0]), float(ratio_range[1])
    if not (0.0 <= lo <= hi <= RATIO_CAP):
        raise MaskGenerationError(
            f"ratio range [{lo}, {hi}] is invalid: need 0 <= lo <= hi <= {RATIO_CAP}"
        )
    return lo, hi


def check_mask(m: np.ndarray) -> np.ndarray:
    """Validate the binary-grid invariant and return the mask as uint8."""
    m = np.asarray(m)
    if m.ndim != 2:
        raise MaskError(f"mask must be 2-D, got shape {m.shape}")
    if not np.isin(m, (0, 1)).all():
        raise MaskError("mask cells must be exactly 0 or 1")
    return m.astype(np.uint8, copy=False)


def mask_ratio(m: np.ndarray) -> float:
    """Fraction of missing (zero) cells."""
    m = check_mask(m)
    return float((m == 0).mean())


def missing_components(m: np.ndarray) -> int:
    """Number of 4-connected components of the missing (zero) region."""
    m = check_mask(m)
    _, count = ndimage.label(m == 0, structure=_CROSS)
    return int(count)


def _clip_point(x: float, y: float, w: int, h: int) -> tuple[int, int]:
    return int(np.clip(x, 0, w - 1)), int(np.clip(y, 0, h - 1))


def _walk(
    miss: np.ndarray,
    rng: np.random.Generator,
    start: tuple[float, float],
    width: int,
    target_px: float,
    max_vertices: int,
) -> None:
    """Extend the missing-indicator canvas with one thick brush walk from `start`.

    Segments get circular caps at both ends, so everything drawn by a single
    walk stays one 4-connected blob. Step length adapts to the remaining pixel
    budget so the walk can stop inside a narrow ratio window.
    """
    h, w = miss.shape
    cap = max(2, width // 2)
    x, y = start
    cv2.circle(miss, _clip_point(x, y, w, h), cap, 1, -1)
    angle = float(rng.uniform(0, 2 * math.pi))
    for _ in range(max_vertices):
        drawn = float(miss.sum())
        if drawn >= target_px:
            break
        budget = max(target_px - drawn, 0.0)
        length = float(np.clip(budget / max(width, 1), width, 0.35 * min(h, w)))
        angle += float(rng.uniform(-1.1, 1.1))
        nx = x + length * math.cos(angle)
        ny = y + length * math.sin(angle)
        # bounce off the border instead of hugging it
        if not (0 <= nx < w):
            angle = math.pi - angle
            nx = x + length * math.cos(angle)
        if not (0 <= ny < h):
            angle = -angle
            ny = y + length * math.sin(angle)
        p0 = _clip_point(x, y, w, h)
        p1 = _clip_point(nx, ny, w, h)
        cv2.line(miss, p0, p1, 1, width)
        cv2.circle(miss, p1, cap, 1, -1)
        x, y = float(p1[0]), float(p1[1])


def gen_contiguous_mask(
    h: int, w: int, cfg: MaskConfig, rng: np.random.Generator
) -> np.ndarray:
    """Sample a mask whose missing pixels form exactly one 4-connected blob.

    One thick random brush walk is grown until the measured missing ratio
    lands inside cfg.ratio_range; if the vertex budget runs out early, the
    walk resumes from a point already on the blob, preserving connectivity.
    Retries with a fresh walk on overshoot; raises MaskGenerationError when
    the retry budget is spent or the range is invalid.
    """
    if cfg.kind != CONTIGUOUS:
        raise MaskGenerationError(f"config kind is {cfg.kind!r}, expected {CONTIGUOUS!r}")
    lo, hi = _validate_ratio_range(cfg.ratio_range)
    if hi == 0.0:
        return np.ones((h, w), dtype=np.uint8)

    total = h * w
    w_lo, w_hi = cfg.stroke_width
    v_lo, v_hi = cfg.vertex_count
    for _ in range(RETRY_BUDGET):
        target = float(rng.uniform((lo + hi) / 2, hi))
        width = int(rng.integers(w_lo, w_hi + 1))
        width = int(np.clip(width, 3, max(3, min(h, w) // 3)))
        miss = np.zeros((h, w), dtype=np.uint8)
        start = (float(rng.uniform(0.1, 0.9) * w), float(rng.uniform(0.1, 0.9) * h))
        for _ in range(64):
            vertices = int(rng.integers(v_lo, v_hi + 1))
            _walk(miss, rng, start, width, target * total, vertices)
            if float(miss.sum()) >= target * total:
                break
            # resume from a pixel already on the blob so it stays connected
            ys, xs = np.nonzero(miss)
            k = int(rng.integers(len(xs)))
            start = (float(xs[k]), float(ys[k]))
        ratio = float(miss.mean())
        if lo <= ratio <= hi and ndimage.label(miss, structure=_CROSS)[1] == 1:
            return (1 - miss).astype(np.uint8)
    raise MaskGenerationError(
        f"no contiguous mask with ratio in [{lo}, {hi}] on a {h}x{w} grid "
        f"after {RETRY_BUDGET} attempts"
    )


def gen_discontiguous_mask(
    h: int, w: int, cfg: MaskConfig, rng: np.random.Generator
) -> np.ndarray:
    """Sample a mask with >= 2 separate missing blobs: scattered short strokes
    and filled ellipses, missing ratio inside cfg.ratio_range."""
    if cfg.kind != DISCONTIGUOUS:
        raise MaskGenerationError(
            f"config kind is {cfg.kind!r}, expected {DISCONTIGUOUS!r}"
        )
    lo, hi = _validate_ratio_range(cfg.ratio_range)
    if hi == 0.0:
        return np.ones((h, w), dtype=np.uint8)

    total = h * w
    w_lo, w_hi = cfg.stroke_width
    for _ in range(RETRY_BUDGET):
        target = float(rng.uniform((lo + hi) / 2, hi))
        miss = np.zeros((h, w), dtype=np.uint8)
        for _ in range(max(cfg.stroke_count[1], 64)):
            drawn = float(miss.sum())
            if drawn >= target * total:
                break
            width = int(np.clip(rng.integers(w_lo, w_hi + 1), 2, max(2, min(h, w) // 6)))
            cx = float(rng.uniform(0.05, 0.95) * w)
            cy = float(rng.uniform(0.05, 0.95) * h)
            if rng.random() < 0.5:
                shape = np.zeros_like(miss)
                _walk(shape, rng, (cx, cy), width, 0.3 * (target * total - drawn), 3)
                miss |= shape
            else:
                hi_ax = max(width + 1, min(h, w) // 6)
                ax = int(rng.integers(width, hi_ax))
                ay = int(rng.integers(width, hi_ax))
                ang = float(rng.uniform(0, 180))
                cv2.ellipse(
                    miss, _clip_point(cx, cy, w, h), (ax, ay), ang, 0, 360, 1, -1
                )
        ratio = float(miss.mean())
        if not (lo <= ratio <= hi):
            continue
        if ratio > 0 and ndimage.label(miss, structure=_CROSS)[1] < 2:
            continue
        return (1 - miss).astype(np.uint8)
    raise MaskGenerationError(
        f"no discontiguous mask with ratio in [{lo}, {hi}] on a {h}x{w} grid "
        f"after {RETRY_BUDGET} attempts"
    )


def generate_mask(
    h: int, w: int, cfg: MaskConfig, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Dispatch on cfg.kind; creates a generator from cfg.rng_seed when rng is None."""
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    if cfg.kind == CONTIGUOUS:
        return gen_contiguous_mask(h, w, cfg, rng)
    if cfg.kind == DISCONTIGUOUS:
        return gen_discontiguous_mask(h, w, cfg, rng)
    raise MaskGenerationError(f"unknown mask kind {cfg.kind!r}")


def downsample_mask(m: np.ndarray, factor: int) -> np.ndarray:
    """Coarsen by an integer factor with the majority rule.

    A coarse cell is missing (0) iff at least half of the fine cells it covers
    are missing; ties resolve to missing so thin holes survive downsampling.
    """
    m = check_mask(m)
    if factor < 1:
        raise MaskError(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return m.copy()
    h, w = m.shape
    if h % factor or w % factor:
        raise MaskError(f"mask shape {m.shape} not divisible by factor {factor}")
    missing = (m == 0).reshape(h // factor, factor, w // factor, factor)
    frac = missing.mean(axis=(1, 3))
    return (frac < 0.5).astype(np.uint8)


def build_pyramid(
    m: np.ndarray, num_levels: int, per_level_factor: int = 2
) -> list[np.ndarray]:
    """Level 0 is the input mask; each next level applies downsample_mask."""
    if num_levels < 1:
        raise MaskError(f"num_levels must be >= 1, got {num_levels}")
    levels = [check_mask(m).copy()]
    for _ in range(num_levels - 1):
        levels.append(downsample_mask(levels[-1], per_level_factor))
    return levels


def _mask_like(m, img):
    """Broadcastable mask in the image's array library and dtype."""
    if isinstance(img, np.ndarray):
        return np.asarray(m).astype(img.dtype, copy=False)
    import torch

    t = m if isinstance(m, torch.Tensor) else torch.as_tensor(np.asarray(m))
    return t.to(device=img.device, dtype=img.dtype)


def _check_spatial(img, m) -> None:
    if tuple(img.shape[-2:]) != tuple(m.shape[-2:]):
        raise MaskError(
            f"spatial dims differ: image {tuple(img.shape[-2:])} vs mask {tuple(m.shape[-2:])}"
        )


def apply_mask(img, m):
    """Zero out missing pixels: out = img * m (fill value 0 in the internal range).

    Works on numpy arrays and torch tensors; img is (..., H, W), m is (H, W)
    or any shape broadcastable against img with matching spatial dims.
    """
    _check_spatial(img, m)
    return img * _mask_like(m, img)


def composite(incomplete, predicted, m):
    """Existing pixels verbatim from `incomplete`, missing ones from `predicted`."""
    _check_spatial(incomplete, m)
    if tuple(incomplete.shape[-2:]) != tuple(predicted.shape[-2:]):
        raise MaskError(
            f"spatial dims differ: incomplete {tuple(incomplete.shape[-2:])} "
            f"vs predicted {tuple(predicted.shape[-2:])}"
        )
    mk = _mask_like(m, incomplete)
    return incomplete * mk + predicted * (1 - mk)


# ---------------------------------------------------------------------------
# File format: single-channel 8-bit grayscale, 255 = existing, 0 = missing.
# Any stored value >= 128 reads back as existing.
# ---------------------------------------------------------------------------


def mask_to_image(m: np.ndarray) -> Image.Image:
    return Image.fromarray(check_mask(m) * np.uint8(255), mode="L")


def mask_from_image(img: Image.Image) -> np.ndarray:
    arr = np.asarray(img.convert("L"))
    return (arr >= 128).astype(np.uint8)


def save_mask(m: np.ndarray, path: str | Path) -> None:
    mask_to_image(m).save(path)


def load_mask(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        return mask_from_image(img)


def mask_to_png_bytes(m: np.ndarray) -> bytes:
    buf = BytesIO()
    mask_to_image(m).save(buf, format="PNG")
    return buf.getvalue()


def mask_from_bytes(payload: bytes) -> np.ndarray:
    return mask_from_image(Image.open(BytesIO(payload)))
