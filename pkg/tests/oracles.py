"""Hand-rolled reference implementations used to cross-check the package.

Everything here is deliberately slow and written with plain loops or BFS so
it shares no code path with the library under test.
"""

from __future__ import annotations

from collections import deque

import numpy as np


def bfs_zero_components(m: np.ndarray) -> int:
    """Count 4-connected components of zeros with an explicit BFS."""
    h, w = m.shape
    seen = np.zeros((h, w), dtype=bool)
    count = 0
    for i in range(h):
        for j in range(w):
            if m[i, j] != 0 or seen[i, j]:
                continue
            count += 1
            q = deque([(i, j)])
            seen[i, j] = True
            while q:
                y, x = q.popleft()
                for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx < w and not seen[ny, nx] and m[ny, nx] == 0:
                        seen[ny, nx] = True
                        q.append((ny, nx))
    return count


def majority_downsample(m: np.ndarray, factor: int) -> np.ndarray:
    """Block-by-block majority rule, ties to missing, via explicit loops."""
    h, w = m.shape
    out = np.zeros((h // factor, w // factor), dtype=np.uint8)
    for i in range(h // factor):
        for j in range(w // factor):
            block = m[i * factor : (i + 1) * factor, j * factor : (j + 1) * factor]
            zeros = int((block == 0).sum())
            out[i, j] = 0 if 2 * zeros >= factor * factor else 1
    return out


def conv2d_loops(x: np.ndarray, weight: np.ndarray, bias: np.ndarray, pad: int, stride: int = 1) -> np.ndarray:
    """Direct cross-correlation with zero padding, NCHW in / NCHW out."""
    n, cin, h, w = x.shape
    cout, _, kh, kw = weight.shape
    xp = np.zeros((n, cin, h + 2 * pad, w + 2 * pad), dtype=np.float64)
    xp[:, :, pad : pad + h, pad : pad + w] = x
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    out = np.zeros((n, cout, oh, ow), dtype=np.float64)
    for b in range(n):
        for co in range(cout):
            for i in range(oh):
                for j in range(ow):
                    acc = 0.0
                    for ci in range(cin):
                        for ki in range(kh):
                            for kj in range(kw):
                                acc += xp[b, ci, i * stride + ki, j * stride + kj] * weight[co, ci, ki, kj]
                    out[b, co, i, j] = acc + bias[co]
    return out


def gram_positions_loops(f: np.ndarray) -> np.ndarray:
    """Raw position-pair inner products of one (c, n) feature matrix."""
    c, n = f.shape
    g = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(c):
                acc += f[k, i] * f[k, j]
            g[i, j] = acc
    return g


def gram_channels_loops(f: np.ndarray) -> np.ndarray:
    """Channel-pair inner products of one (c, n) matrix, divided by n."""
    c, n = f.shape
    g = np.zeros((c, c), dtype=np.float64)
    for a in range(c):
        for b in range(c):
            acc = 0.0
            for k in range(n):
                acc += f[a, k] * f[b, k]
            g[a, b] = acc / n
    return g


def correlation_loss_loops(feat_fake: np.ndarray, feat_real: np.ndarray) -> float:
    """Position-gram L1 difference with the 1/(c*n^2) factor, via dense loops."""
    c, n = feat_fake.shape
    gf = gram_positions_loops(feat_fake)
    gr = gram_positions_loops(feat_real)
    acc = 0.0
    for i in range(n):
        for j in range(n):
            acc += abs(gf[i, j] - gr[i, j])
    return acc / (c * n * n)


def style_loss_loops(stages_fake: list[np.ndarray], stages_real: list[np.ndarray]) -> float:
    """Channel-gram L1 difference summed over stages, each scaled by 1/c^2."""
    total = 0.0
    for ff, fr in zip(stages_fake, stages_real):
        c = ff.shape[0]
        gf = gram_channels_loops(ff)
        gr = gram_channels_loops(fr)
        acc = 0.0
        for a in range(c):
            for b in range(c):
                acc += abs(gf[a, b] - gr[a, b])
        total += acc / (c * c)
    return total


def psnr_reference(a: np.ndarray, b: np.ndarray) -> float:
    mse = float(np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2))
    if mse < 1e-10:
        return 100.0
    return 10.0 * np.log10(1.0 / mse)


def _gaussian_kernel(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2
    k = np.exp(-(ax**2) / (2 * sigma**2))
    k2 = np.outer(k, k)
    return k2 / k2.sum()


def ssim_reference(a: np.ndarray, b: np.ndarray) -> float:
    """Sliding-window SSIM over valid 11x11 windows, per channel, averaged."""
    k = _gaussian_kernel()
    c1 = 0.01**2
    c2 = 0.03**2
    if a.ndim == 2:
        a = a[None]
        b = b[None]
    else:  # HWC -> CHW
        a = np.moveaxis(a, -1, 0)
        b = np.moveaxis(b, -1, 0)
    vals = []
    for ch in range(a.shape[0]):
        x = a[ch].astype(np.float64)
        y = b[ch].astype(np.float64)
        h, w = x.shape
        for i in range(h - 10):
            for j in range(w - 10):
                wx = x[i : i + 11, j : j + 11]
                wy = y[i : i + 11, j : j + 11]
                mx = float((k * wx).sum())
                my = float((k * wy).sum())
                vx = float((k * wx * wx).sum()) - mx * mx
                vy = float((k * wy * wy).sum()) - my * my
                cxy = float((k * wx * wy).sum()) - mx * my
                vals.append(
                    ((2 * mx * my + c1) * (2 * cxy + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2))
                )
    return float(np.mean(vals))
