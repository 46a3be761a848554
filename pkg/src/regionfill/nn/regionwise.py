"""Region-wise convolution: separate filter banks for existing and missing pixels.

The layer runs two full convolutions and blends them with the mask at the
output resolution:

    out = m_l * (conv(x, W) + b) + (1 - m_l) * (conv(x, W_missing) + b_missing)

so every output position is produced by exactly one filter bank, selected by
whether that position is existing (1) or missing (0) in the mask level.
"""

from __future__ import annotations

import math

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn


class ShapeError(ValueError):
    """Tensor/mask dimensions do not line up."""


def as_mask_tensor(m, like: torch.Tensor) -> torch.Tensor:
    """Coerce a mask ((H,W), (B,H,W) or (B,1,H,W); numpy or torch) to a
    float (B or 1, 1, H, W) tensor on the reference tensor's device/dtype."""
    if isinstance(m, np.ndarray):
        m = torch.from_numpy(np.ascontiguousarray(m))
    if m.ndim == 2:
        m = m[None, None]
    elif m.ndim == 3:
        m = m[:, None]
    elif m.ndim != 4:
        raise ShapeError(f"mask must be 2-D, 3-D or 4-D, got shape {tuple(m.shape)}")
    if m.shape[1] != 1:
        raise ShapeError(f"mask channel dim must be 1, got {m.shape[1]}")
    return m.to(device=like.device, dtype=like.dtype)


def mask_pyramid(m: torch.Tensor, num_levels: int, factor: int = 2) -> list[torch.Tensor]:
    """Majority-rule mask pyramid on tensors (ties resolve to missing).

    Level 0 is the input; level k+1 marks a coarse cell existing only when
    strictly less than half of its fine cells are missing. Agrees cell-for-cell
    with the numpy downsampling used for stored masks.
    """
    if num_levels < 1:
        raise ShapeError(f"num_levels must be >= 1, got {num_levels}")
    levels = [m]
    for _ in range(num_levels - 1):
        prev = levels[-1]
        if prev.shape[-1] % factor or prev.shape[-2] % factor:
            raise ShapeError(
                f"mask level of shape {tuple(prev.shape[-2:])} not divisible by {factor}"
            )
        missing_frac = F.avg_pool2d(1.0 - prev, factor)
        levels.append((missing_frac < 0.5).to(m.dtype))
    return levels


class RegionwiseConv2d(nn.Module):
    """Conv layer with twin filter banks blended by a same-resolution mask."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        stride: int = 1,
        padding: int | None = None,
    ):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = kernel_size // 2 if padding is None else padding
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        self.weight = nn.Parameter(torch.empty(shape))
        self.weight_missing = nn.Parameter(torch.empty(shape))
        self.bias = nn.Parameter(torch.empty(out_channels))
        self.bias_missing = nn.Parameter(torch.empty(out_channels))
        self.reset_parameters()

    def reset_parameters(self) -> None:
        for w in (self.weight, self.weight_missing):
            nn.init.kaiming_uniform_(w, a=math.sqrt(5))
        fan_in = self.in_channels * self.kernel_size**2
        bound = 1.0 / math.sqrt(fan_in)
        for b in (self.bias, self.bias_missing):
            nn.init.uniform_(b, -bound, bound)

    def forward(self, x: torch.Tensor, m_level) -> torch.Tensor:
        existing = F.conv2d(x, self.weight, self.bias, self.stride, self.padding)
        missing = F.conv2d(
            x, self.weight_missing, self.bias_missing, self.stride, self.padding
        )
        m = as_mask_tensor(m_level, existing)
        if tuple(m.shape[-2:]) != tuple(existing.shape[-2:]):
            raise ShapeError(
                f"mask level {tuple(m.shape[-2:])} does not match conv output "
                f"{tuple(existing.shape[-2:])}"
            )
        return m * existing + (1.0 - m) * missing

    def extra_repr(self) -> str:
        return (
            f"{self.in_channels}, {self.out_channels}, "
            f"kernel_size={self.kernel_size}, stride={self.stride}, "
            f"padding={self.padding}"
        )


def regionwise_conv_gradients(
    x: torch.Tensor,
    m_level,
    layer: RegionwiseConv2d,
    upstream_grad: torch.Tensor,
) -> tuple[torch.Tensor, ...]:
    """Backward pass of one region-wise conv, returned as explicit tensors:
    (grad_x, grad_weight, grad_weight_missing, grad_bias, grad_bias_missing).

    Gradient routing falls out of the blended forward: filter banks of the
    region absent from the mask receive exactly zero.
    """
    x = x.detach().requires_grad_(True)
    out = layer(x, m_level)
    if out.shape != upstream_grad.shape:
        raise ShapeError(
            f"upstream grad shape {tuple(upstream_grad.shape)} does not match "
            f"output {tuple(out.shape)}"
        )
    return torch.autograd.grad(
        out,
        [x, layer.weight, layer.weight_missing, layer.bias, layer.bias_missing],
        grad_outputs=upstream_grad,
    )
