"""Checkpoint-backed inpainting on raw uint8 images of arbitrary size.

The model runs at its training resolution; client images are bridged by
bilinear-resizing the image (nearest for the mask) down to model size and
resizing the prediction back up. Compositing happens at native resolution in
uint8, so existing pixels pass through byte-identical.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import cv2
import numpy as np
import torch

from regionfill import masks
from regionfill.data import to_internal, to_metric
from regionfill.masks import MaskError
from regionfill.nn.regionwise import as_mask_tensor
from regionfill.training import TrainConfig, load_checkpoint


class InpaintEngine:
    """Frozen generator plus the bridging logic; safe for concurrent readers."""

    def __init__(self, generator, cfg: TrainConfig, model_id: str):
        self.generator = generator.eval()
        for p in self.generator.parameters():
            p.requires_grad_(False)
        self.cfg = cfg
        self.model_id = model_id
        self.model_size = cfg.image_size

    @classmethod
    def from_checkpoint(cls, path: str | Path) -> "InpaintEngine":
        path = Path(path)
        state = load_checkpoint(path)
        digest = hashlib.sha256(path.read_bytes()).hexdigest()[:12]
        return cls(state.generator, state.cfg, model_id=digest)

    def inpaint_array(self, img_u8: np.ndarray, mask01: np.ndarray) -> np.ndarray:
        """img_u8: (H, W, 3) uint8; mask01: (H, W) binary mask. Returns the
        composited result as (H, W, 3) uint8 at the input resolution."""
        img_u8 = np.asarray(img_u8)
        if img_u8.ndim != 3 or img_u8.shape[2] != 3 or img_u8.dtype != np.uint8:
            raise MaskError(f"expected (H,W,3) uint8 image, got {img_u8.shape} {img_u8.dtype}")
        m = masks.check_mask(mask01)
        if img_u8.shape[:2] != m.shape:
            raise MaskError(
                f"image dims {img_u8.shape[:2]} do not match mask dims {m.shape}"
            )

        s = self.model_size
        h, w = m.shape
        img_f = img_u8.astype(np.float32) / 255.0
        if (h, w) != (s, s):
            small_img = cv2.resize(img_f, (s, s), interpolation=cv2.INTER_LINEAR)
            small_mask = cv2.resize(m, (s, s), interpolation=cv2.INTER_NEAREST)
        else:
            small_img, small_mask = img_f, m

        x = torch.from_numpy(np.ascontiguousarray(small_img.transpose(2, 0, 1)))[None]
        x = to_internal(x)
        m_t = as_mask_tensor(small_mask, x)
        with torch.no_grad():
            _, _, p2, _ = self.generator(x * m_t, m_t)
        pred = to_metric(p2)[0].numpy().transpose(1, 2, 0)
        if (h, w) != (s, s):
            pred = cv2.resize(pred, (w, h), interpolation=cv2.INTER_LINEAR)
        pred_u8 = np.clip(np.rint(pred * 255.0), 0, 255).astype(np.uint8)
        return np.where(m[:, :, None] == 1, img_u8, pred_u8)
