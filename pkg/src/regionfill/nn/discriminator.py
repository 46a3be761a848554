"""Patch discriminator over the missing-region content.

Input is the image restricted to the missing region (img * (1 - m))
concatenated with the mask, so the critic only judges synthesized content.
A stack of stride-2 spectrally normalized convolutions ends in a sigmoid
patch score map rather than a single scalar.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from regionfill.nn.regionwise import ShapeError, as_mask_tensor


@dataclass(frozen=True)
class DiscriminatorConfig:
    levels: int = 4
    base_width: int = 64
    spectral_norm: bool = True
    leaky_slope: float = 0.2
    width_cap_factor: int = 8


class RegionwiseDiscriminator(nn.Module):
    def __init__(self, cfg: DiscriminatorConfig):
        super().__init__()
        self.cfg = cfg

        def sn(conv: nn.Conv2d) -> nn.Module:
            return nn.utils.spectral_norm(conv) if cfg.spectral_norm else conv

        cap = cfg.base_width * cfg.width_cap_factor
        widths = [min(cfg.base_width * 2**k, cap) for k in range(cfg.levels)]
        convs = []
        cin = 4
        for cout in widths:
            convs.append(sn(nn.Conv2d(cin, cout, 4, stride=2, padding=1)))
            cin = cout
        self.convs = nn.ModuleList(convs)
        self.head = sn(nn.Conv2d(cin, 1, 3, padding=1))

    def forward(self, region_img: torch.Tensor, m) -> torch.Tensor:
        """region_img: missing-region content (3 channels, existing pixels
        zeroed); returns a (B, 1, s, s) score map with values in (0, 1)."""
        if region_img.ndim != 4 or region_img.shape[1] != 3:
            raise ShapeError(
                f"expected (B, 3, H, W) region image, got {tuple(region_img.shape)}"
            )
        m_t = as_mask_tensor(m, region_img)
        if tuple(m_t.shape[-2:]) != tuple(region_img.shape[-2:]):
            raise ShapeError(
                f"mask {tuple(m_t.shape[-2:])} does not match image "
                f"{tuple(region_img.shape[-2:])}"
            )
        h = torch.cat([region_img, m_t.expand(region_img.shape[0], -1, -1, -1)], dim=1)
        for conv in self.convs:
            h = F.leaky_relu(conv(h), self.cfg.leaky_slope)
        return torch.sigmoid(self.head(h))


def build_discriminator(cfg: DiscriminatorConfig, seed: int | None = None) -> RegionwiseDiscriminator:
    if seed is not None:
        torch.manual_seed(seed)
    return RegionwiseDiscriminator(cfg)
