"""Two-stage inpainting generator.

Stage one (semantic inferring net) is an encoder-decoder whose decoder
convolutions are region-wise, each consuming the mask pyramid level matching
its resolution. Stage two (global perceiving net) is the same ladder with all
standard convolutions; it refines the stage-one composite.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from regionfill import masks
from regionfill.nn.regionwise import (
    RegionwiseConv2d,
    ShapeError,
    as_mask_tensor,
    mask_pyramid,
)


@dataclass(frozen=True)
class GeneratorConfig:
    base_width: int = 32
    levels: int = 3
    skip_links: bool = True
    regionwise_decoder: bool = True
    width_cap_factor: int = 8

    def widths(self) -> list[int]:
        """Channel count at each resolution: index 0 is full resolution."""
        cap = self.base_width * self.width_cap_factor
        return [min(self.base_width * 2**k, cap) for k in range(self.levels + 1)]


class EncoderDecoder(nn.Module):
    """Stride-2 down / nearest-upsample-conv up ladder with optional skip
    links and an optionally region-wise decoder. ELU activations, tanh output."""

    def __init__(
        self,
        cfg: GeneratorConfig,
        in_channels: int = 4,
        out_channels: int = 3,
        regionwise_decoder: bool | None = None,
    ):
        super().__init__()
        self.cfg = cfg
        self.in_channels = in_channels
        self.levels = cfg.levels
        self.regionwise_decoder = (
            cfg.regionwise_decoder if regionwise_decoder is None else regionwise_decoder
        )
        w = cfg.widths()

        self.stem = nn.Conv2d(in_channels, w[0], 3, padding=1)
        self.encoder = nn.ModuleList(
            nn.Conv2d(w[k], w[k + 1], 3, stride=2, padding=1) for k in range(cfg.levels)
        )
        self.bottleneck = nn.Conv2d(w[-1], w[-1], 3, padding=1)

        def dec_conv(cin: int, cout: int):
            if self.regionwise_decoder:
                return RegionwiseConv2d(cin, cout, 3)
            return nn.Conv2d(cin, cout, 3, padding=1)

        decoder = []
        for k in range(cfg.levels, 0, -1):
            cin = w[k] + (w[k - 1] if cfg.skip_links else 0)
            decoder.append(dec_conv(cin, w[k - 1]))
        self.decoder = nn.ModuleList(decoder)
        self.head = dec_conv(w[0], out_channels)

    def forward(self, x: torch.Tensor, pyramid: list | None = None) -> torch.Tensor:
        if x.shape[1] != self.in_channels:
            raise ShapeError(f"expected {self.in_channels} input channels, got {x.shape[1]}")
        if self.regionwise_decoder:
            if pyramid is None or len(pyramid) != self.levels:
                have = 0 if pyramid is None else len(pyramid)
                raise ShapeError(
                    f"regionwise decoder needs a {self.levels}-level mask pyramid, got {have}"
                )

        h = F.elu(self.stem(x))
        skips = [h]
        for enc in self.encoder:
            h = F.elu(enc(h))
            skips.append(h)
        h = F.elu(self.bottleneck(h))

        for i, dec in enumerate(self.decoder):
            level = self.levels - 1 - i
            h = F.interpolate(h, scale_factor=2, mode="nearest")
            if self.cfg.skip_links:
                h = torch.cat([h, skips[level]], dim=1)
            h = dec(h, pyramid[level]) if self.regionwise_decoder else dec(h)
            h = F.elu(h)
        out = self.head(h, pyramid[0]) if self.regionwise_decoder else self.head(h)
        return torch.tanh(out)


def build_semantic_inferring_net(cfg: GeneratorConfig, seed: int | None = None) -> EncoderDecoder:
    """Stage-one net: standard encoder, region-wise decoder (per cfg)."""
    if seed is not None:
        torch.manual_seed(seed)
    return EncoderDecoder(cfg, in_channels=4, out_channels=3)


def build_global_perceiving_net(cfg: GeneratorConfig, seed: int | None = None) -> EncoderDecoder:
    """Stage-two refinement net: all standard convolutions."""
    if seed is not None:
        torch.manual_seed(seed)
    return EncoderDecoder(cfg, in_channels=4, out_channels=3, regionwise_decoder=False)


class TwoStageGenerator(nn.Module):
    """Wires the two nets per the inpainting recipe.

    forward(incomplete, m) with incomplete already masked (missing pixels
    zeroed in the internal domain) returns (I_p1, I_c1, I_p2, I_c2): the
    stage-one prediction and composite, then the stage-two refinement of the
    composite and its composite. Existing pixels in both composites are the
    input pixels verbatim.
    """

    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.cfg = cfg
        self.semantic = EncoderDecoder(cfg, in_channels=4, out_channels=3)
        self.perceiving = EncoderDecoder(
            cfg, in_channels=4, out_channels=3, regionwise_decoder=False
        )

    def forward(self, incomplete: torch.Tensor, m):
        m_t = as_mask_tensor(m, incomplete)
        if tuple(m_t.shape[-2:]) != tuple(incomplete.shape[-2:]):
            raise ShapeError(
                f"mask {tuple(m_t.shape[-2:])} does not match image "
                f"{tuple(incomplete.shape[-2:])}"
            )
        pyramid = mask_pyramid(m_t, self.cfg.levels)
        x1 = torch.cat([incomplete, m_t.expand(incomplete.shape[0], -1, -1, -1)], dim=1)
        p1 = self.semantic(x1, pyramid)
        c1 = masks.composite(incomplete, p1, m_t)
        x2 = torch.cat([c1, m_t.expand(incomplete.shape[0], -1, -1, -1)], dim=1)
        p2 = self.perceiving(x2)
        c2 = masks.composite(incomplete, p2, m_t)
        return p1, c1, p2, c2


def build_generator(cfg: GeneratorConfig, seed: int | None = None) -> TwoStageGenerator:
    if seed is not None:
        torch.manual_seed(seed)
    return TwoStageGenerator(cfg)
