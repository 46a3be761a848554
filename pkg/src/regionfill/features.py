"""Frozen perceptual backbones exposing pool1/pool2/pool3 feature maps.

Inputs are metric-domain images ([0, 1]); each backbone applies its own
expected normalization internally. Weights are frozen at construction, so
gradients flow to the input image but never into the backbone.
"""

from __future__ import annotations

import os
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import nn

STAGES = ("pool1", "pool2", "pool3")

VGG_WEIGHTS_ENV = "REGIONFILL_VGG_WEIGHTS"

_IMAGENET_MEAN = (0.485, 0.456, 0.406)
_IMAGENET_STD = (0.229, 0.224, 0.225)


class FeatureError(ValueError):
    """Unknown stage name or unusable backbone weights."""


def _freeze(module: nn.Module) -> nn.Module:
    for p in module.parameters():
        p.requires_grad_(False)
    return module.eval()


class TinyBackbone(nn.Module):
    """Small random frozen convnet with the same stage contract as the VGG
    stack (spatial dims halve per stage). Lets the loss code and tests run
    without any weights download; tanh keeps the features smooth."""

    def __init__(self, seed: int = 0, widths: tuple[int, int, int] = (8, 16, 32)):
        super().__init__()
        torch.manual_seed(seed)
        chans = [3, *widths]
        self.blocks = nn.ModuleList(
            nn.Conv2d(chans[i], chans[i + 1], 3, padding=1) for i in range(3)
        )
        self.stage_channels = dict(zip(STAGES, widths))
        _freeze(self)

    def normalize(self, img: torch.Tensor) -> torch.Tensor:
        return img * 2.0 - 1.0

    def forward(self, img: torch.Tensor) -> dict[str, torch.Tensor]:
        h = self.normalize(img)
        out = {}
        for stage, block in zip(STAGES, self.blocks):
            h = F.avg_pool2d(torch.tanh(block(h)), 2)
            out[stage] = h
        return out


class VggBackbone(nn.Module):
    """First three pooling stages of a 16-layer VGG feature stack.

    Weights are read from an explicit path or the REGIONFILL_VGG_WEIGHTS
    environment variable (a torchvision-format state dict). pretrained=False
    keeps the random initialization, which is enough for shape checks.
    """

    def __init__(self, weights_path: str | Path | None = None, pretrained: bool = True):
        super().__init__()
        from torchvision import models

        vgg = models.vgg16(weights=None)
        if pretrained:
            path = weights_path or os.environ.get(VGG_WEIGHTS_ENV)
            if not path:
                raise FeatureError(
                    "no VGG weights: pass weights_path or set "
                    f"{VGG_WEIGHTS_ENV} to a vgg16 state-dict file"
                )
            if not Path(path).is_file():
                raise FeatureError(f"VGG weights file not found: {path}")
            state = torch.load(path, map_location="cpu", weights_only=True)
            missing, _ = vgg.load_state_dict(state, strict=False)
            if any(k.startswith("features.") for k in missing):
                raise FeatureError(f"weights file {path} lacks feature layers")
        feats = vgg.features
        self.pool1 = feats[:5]
        self.pool2 = feats[5:10]
        self.pool3 = feats[10:17]
        self.stage_channels = {"pool1": 64, "pool2": 128, "pool3": 256}
        self.register_buffer("mean", torch.tensor(_IMAGENET_MEAN).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor(_IMAGENET_STD).view(1, 3, 1, 1))
        _freeze(self)

    def normalize(self, img: torch.Tensor) -> torch.Tensor:
        return (img - self.mean) / self.std

    def forward(self, img: torch.Tensor) -> dict[str, torch.Tensor]:
        h = self.normalize(img)
        out = {}
        for stage in STAGES:
            h = getattr(self, stage)(h)
            out[stage] = h
        return out


def build_backbone(kind: str = "tiny", weights_path: str | None = None, seed: int = 0):
    if kind == "tiny":
        return TinyBackbone(seed=seed)
    if kind == "vgg16":
        return VggBackbone(weights_path=weights_path)
    raise FeatureError(f"unknown backbone kind {kind!r}")


def extract_features(
    backbone: nn.Module, img: torch.Tensor, stages: tuple[str, ...] = STAGES
) -> dict[str, torch.Tensor]:
    """Run the frozen backbone on a metric-domain image batch, returning the
    requested stages only."""
    for s in stages:
        if s not in STAGES:
            raise FeatureError(f"unknown stage {s!r}, valid stages: {STAGES}")
    if img.ndim != 4 or img.shape[1] != 3:
        raise FeatureError(f"expected (B, 3, H, W) image, got {tuple(img.shape)}")
    full = backbone(img)
    return {s: full[s] for s in stages}


def reshape_to_matrix(f: torch.Tensor) -> torch.Tensor:
    """(c, h, w) -> (c, h*w) or batched (B, c, h, w) -> (B, c, h*w); column i
    is the channel vector at row-major spatial index i."""
    if f.ndim == 3:
        return f.reshape(f.shape[0], -1)
    if f.ndim == 4:
        return f.reshape(f.shape[0], f.shape[1], -1)
    raise FeatureError(f"expected 3-D or 4-D feature map, got shape {tuple(f.shape)}")


def unreshape_from_matrix(mat: torch.Tensor, h: int, w: int) -> torch.Tensor:
    if mat.ndim == 2:
        return mat.reshape(mat.shape[0], h, w)
    if mat.ndim == 3:
        return mat.reshape(mat.shape[0], mat.shape[1], h, w)
    raise FeatureError(f"expected 2-D or 3-D matrix, got shape {tuple(mat.shape)}")
