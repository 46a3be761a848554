"""Phased alternating optimization of the two-stage generator and the patch
discriminator.

Warm-up epochs update the generator with reconstruction + correlation + style
only; afterwards the adversarial term joins the generator objective and the
discriminator starts training on detached fakes, generator first within each
step. All randomness (init, mask sampling, batch order) is a pure function of
the config seed, so runs and resumed runs replay exactly.
"""

from __future__ import annotations

import hashlib
import io
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from regionfill import masks
from regionfill.data import batch_iter, build_manifest, load_batch
from regionfill.features import build_backbone
from regionfill.losses import (
    LossReport,
    LossWeights,
    adversarial_losses,
    correlation_loss,
    reconstruction_loss,
    style_loss,
    total_loss,
)
from regionfill.masks import CONTIGUOUS, DISCONTIGUOUS, MaskConfig
from regionfill.nn import (
    DiscriminatorConfig,
    GeneratorConfig,
    RegionwiseDiscriminator,
    TwoStageGenerator,
)
from regionfill.nn.regionwise import as_mask_tensor

MASK_KINDS = (CONTIGUOUS, DISCONTIGUOUS, "mix")

LOG_COLUMNS = ("epoch", "step", "l_r", "l_c", "l_s", "l_a_g", "l_a_d", "total")

CHECKPOINT_MAGIC = b"RFCK"
CHECKPOINT_VERSION = 1


class CheckpointError(RuntimeError):
    """Unreadable, corrupt, version-mismatched, or incompatible checkpoint."""


@dataclass(frozen=True)
class TrainConfig:
    data_dir: str = "data"
    image_size: int = 64
    batch_size: int = 8
    epochs: int = 2
    pretrain_epochs: int = 1
    pretrain_steps: int | None = None
    lr: float = 1e-4
    betas: tuple[float, float] = (0.5, 0.999)
    weights: LossWeights = field(default_factory=LossWeights)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    discriminator: DiscriminatorConfig = field(
        default_factory=lambda: DiscriminatorConfig(levels=4, base_width=64)
    )
    mask: MaskConfig = field(default_factory=MaskConfig)
    mask_kind: str = "mix"
    backbone: str = "tiny"
    backbone_weights: str | None = None
    correlation_on_predicted: bool = False
    seed: int = 0
    checkpoint_dir: str | None = None
    checkpoint_every: int = 1
    log_csv: str | None = None

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"learning rate must be > 0, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.pretrain_steps is None and not (0 <= self.pretrain_epochs <= self.epochs):
            raise ValueError(
                f"need 0 <= pretrain_epochs <= epochs, got "
                f"{self.pretrain_epochs} vs {self.epochs}"
            )
        if self.mask_kind not in MASK_KINDS:
            raise ValueError(f"mask_kind must be one of {MASK_KINDS}, got {self.mask_kind!r}")
        if self.checkpoint_every < 1:
            raise ValueError(f"checkpoint_every must be >= 1, got {self.checkpoint_every}")


class TrainState:
    """Everything mutated by training: models, optimizers, counters, RNG."""

    def __init__(
        self,
        cfg: TrainConfig,
        generator: TwoStageGenerator,
        discriminator: RegionwiseDiscriminator,
        opt_g: torch.optim.Optimizer,
        opt_d: torch.optim.Optimizer,
        extractor,
        mask_rng: np.random.Generator,
    ):
        self.cfg = cfg
        self.generator = generator
        self.discriminator = discriminator
        self.opt_g = opt_g
        self.opt_d = opt_d
        self.extractor = extractor
        self.mask_rng = mask_rng
        self.epoch = 0
        self.global_step = 0
        self.loss_sums: dict[str, float] = {}
        self.loss_count = 0

    def reset_running(self) -> None:
        self.loss_sums = {}
        self.loss_count = 0

    def accumulate(self, report: LossReport) -> None:
        for name in (
            "reconstruction",
            "correlation",
            "style",
            "adversarial_g",
            "adversarial_d",
            "total",
            "masked_mae",
        ):
            value = getattr(report, name)
            if value is not None:
                self.loss_sums[name] = self.loss_sums.get(name, 0.0) + value
        self.loss_count += 1

    def running_report(self) -> LossReport:
        if self.loss_count == 0:
            return LossReport(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        mean = {k: v / self.loss_count for k, v in self.loss_sums.items()}
        return LossReport(
            reconstruction=mean.get("reconstruction", 0.0),
            correlation=mean.get("correlation", 0.0),
            style=mean.get("style", 0.0),
            adversarial_g=mean.get("adversarial_g", 0.0),
            adversarial_d=mean.get("adversarial_d", 0.0),
            total=mean.get("total", 0.0),
            masked_mae=mean.get("masked_mae"),
        )


def init_state(cfg: TrainConfig) -> TrainState:
    extractor = build_backbone(cfg.backbone, cfg.backbone_weights, seed=cfg.seed)
    torch.manual_seed(cfg.seed)
    generator = TwoStageGenerator(cfg.generator)
    discriminator = RegionwiseDiscriminator(cfg.discriminator)
    opt_g = torch.optim.Adam(generator.parameters(), lr=cfg.lr, betas=cfg.betas)
    opt_d = torch.optim.Adam(discriminator.parameters(), lr=cfg.lr, betas=cfg.betas)
    mask_rng = np.random.default_rng(cfg.seed)
    return TrainState(cfg, generator, discriminator, opt_g, opt_d, extractor, mask_rng)


def in_pretrain(state: TrainState, cfg: TrainConfig) -> bool:
    if cfg.pretrain_steps is not None:
        return state.global_step < cfg.pretrain_steps
    return state.epoch < cfg.pretrain_epochs


def sample_masks(
    rng: np.random.Generator, count: int, h: int, w: int, cfg: TrainConfig
) -> np.ndarray:
    """One mask per batch item; 'mix' flips a fair coin per item between the
    two kinds."""
    out = []
    for _ in range(count):
        kind = cfg.mask_kind
        if kind == "mix":
            kind = CONTIGUOUS if rng.random() < 0.5 else DISCONTIGUOUS
        out.append(masks.generate_mask(h, w, replace(cfg.mask, kind=kind), rng))
    return np.stack(out)


def train_step(
    batch: torch.Tensor, state: TrainState, cfg: TrainConfig
) -> tuple[TrainState, LossReport]:
    """One optimization step on one batch of ground-truth images."""
    if batch.ndim != 4 or batch.shape[0] == 0:
        raise ValueError(f"expected a non-empty (B,3,H,W) batch, got {tuple(batch.shape)}")
    b, _, h, w = batch.shape
    m_np = sample_masks(state.mask_rng, b, h, w, cfg)
    m_t = as_mask_tensor(m_np, batch)
    incomplete = masks.apply_mask(batch, m_t)

    p1, c1, p2, c2 = state.generator(incomplete, m_t)
    l_r = reconstruction_loss(p1, p2, batch)
    corr_img = p1 if cfg.correlation_on_predicted else c1
    l_c = correlation_loss(corr_img, batch, state.extractor)
    l_s = style_loss(c2, batch, state.extractor)

    pretrain = in_pretrain(state, cfg)
    if pretrain:
        w_eff = replace(cfg.weights, lambda_adversarial=0.0)
        total = total_loss(l_r, l_c, l_s, torch.zeros((), dtype=batch.dtype), w_eff)
        state.opt_g.zero_grad()
        total.backward()
        state.opt_g.step()
        l_g_val = l_d_val = 0.0
    else:
        l_g, l_d = adversarial_losses(
            state.discriminator, p1, p2, batch, m_t, cfg.weights.alpha_real
        )
        total = total_loss(l_r, l_c, l_s, l_g, cfg.weights)
        state.opt_g.zero_grad()
        total.backward()
        state.opt_g.step()
        state.opt_d.zero_grad()
        l_d.backward()
        state.opt_d.step()
        l_g_val = float(l_g.detach())
        l_d_val = float(l_d.detach())

    with torch.no_grad():
        hole = 1.0 - m_t
        denom = hole.sum() * batch.shape[1]
        mae = ((c2 - batch).abs() * hole).sum() / denom if denom > 0 else torch.zeros(())

    report = LossReport(
        reconstruction=float(l_r.detach()),
        correlation=float(l_c.detach()),
        style=float(l_s.detach()),
        adversarial_g=l_g_val,
        adversarial_d=l_d_val,
        total=float(total.detach()),
        masked_mae=float(mae),
    )
    state.global_step += 1
    state.accumulate(report)
    return state, report


def _append_log_row(path: Path, epoch: int, step: int, report: LossReport) -> None:
    new = not path.exists() or path.stat().st_size == 0
    with path.open("a", encoding="utf-8") as fh:
        if new:
            fh.write(",".join(LOG_COLUMNS) + "\n")
        cells = [
            str(epoch),
            str(step),
            f"{report.reconstruction:.8f}",
            f"{report.correlation:.8f}",
            f"{report.style:.8f}",
            f"{report.adversarial_g:.8f}",
            f"{report.adversarial_d:.8f}",
            f"{report.total:.8f}",
        ]
        fh.write(",".join(cells) + "\n")


def train_loop(
    cfg: TrainConfig, state: TrainState | None = None
) -> tuple[TrainState, list[LossReport]]:
    """Run (or resume) epochs of training; returns the final state and one
    mean LossReport per completed epoch."""
    if state is None:
        state = init_state(cfg)
    state.cfg = cfg  # a resumed state adopts the caller's schedule
    manifest = build_manifest(cfg.data_dir, split="train", image_size=cfg.image_size)
    log_path = Path(cfg.log_csv) if cfg.log_csv else None
    epoch_reports: list[LossReport] = []

    for epoch in range(state.epoch, cfg.epochs):
        state.reset_running()
        for names in batch_iter(manifest, cfg.batch_size, cfg.seed, epoch):
            batch = load_batch(cfg.data_dir, names, cfg.image_size)
            _, report = train_step(batch, state, cfg)
            if log_path is not None:
                _append_log_row(log_path, epoch, state.global_step, report)
        epoch_reports.append(state.running_report())
        state.epoch += 1
        if cfg.checkpoint_dir and (
            state.epoch % cfg.checkpoint_every == 0 or state.epoch == cfg.epochs
        ):
            out = Path(cfg.checkpoint_dir)
            out.mkdir(parents=True, exist_ok=True)
            save_checkpoint(state, out / f"epoch_{state.epoch:04d}.ckpt")
    return state, epoch_reports


# ---------------------------------------------------------------------------
# Checkpoint container: magic, format version, SHA-256 of the payload, then
# the serialized payload. The checksum is verified before deserializing.
# ---------------------------------------------------------------------------


def _config_to_dict(cfg: TrainConfig) -> dict:
    from dataclasses import asdict

    return asdict(cfg)


def _config_from_dict(d: dict) -> TrainConfig:
    d = dict(d)
    d["weights"] = LossWeights(**d["weights"])
    d["generator"] = GeneratorConfig(**d["generator"])
    d["discriminator"] = DiscriminatorConfig(**d["discriminator"])
    mask_d = dict(d["mask"])
    for key in ("ratio_range", "stroke_count", "stroke_width", "vertex_count"):
        mask_d[key] = tuple(mask_d[key])
    d["mask"] = MaskConfig(**mask_d)
    d["betas"] = tuple(d["betas"])
    return TrainConfig(**d)


def save_checkpoint(state: TrainState, path: str | Path) -> None:
    payload = {
        "config": _config_to_dict(state.cfg),
        "generator": state.generator.state_dict(),
        "discriminator": state.discriminator.state_dict(),
        "opt_g": state.opt_g.state_dict(),
        "opt_d": state.opt_d.state_dict(),
        "epoch": state.epoch,
        "global_step": state.global_step,
        "mask_rng": state.mask_rng.bit_generator.state,
        "torch_rng": torch.get_rng_state(),
        "loss_sums": state.loss_sums,
        "loss_count": state.loss_count,
    }
    buf = io.BytesIO()
    torch.save(payload, buf)
    body = buf.getvalue()
    header = CHECKPOINT_MAGIC + struct.pack("<I", CHECKPOINT_VERSION)
    digest = hashlib.sha256(body).digest()
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(header + digest + body)
    tmp.replace(path)


def load_checkpoint(path: str | Path, cfg: TrainConfig | None = None) -> TrainState:
    """Restore a TrainState. The checkpoint's own config echo is used unless
    an explicit cfg is supplied (which must be architecture-compatible)."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(raw) < 40 or raw[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint file")
    (version,) = struct.unpack("<I", raw[4:8])
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path} has format version {version}, expected {CHECKPOINT_VERSION}"
        )
    digest, body = raw[8:40], raw[40:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError(f"{path} is corrupt: checksum mismatch")
    payload = torch.load(io.BytesIO(body), weights_only=False)

    cfg = cfg if cfg is not None else _config_from_dict(payload["config"])
    state = init_state(cfg)
    try:
        state.generator.load_state_dict(payload["generator"])
        state.discriminator.load_state_dict(payload["discriminator"])
    except RuntimeError as exc:
        raise CheckpointError(f"checkpoint incompatible with config: {exc}") from exc
    state.opt_g.load_state_dict(payload["opt_g"])
    state.opt_d.load_state_dict(payload["opt_d"])
    state.epoch = payload["epoch"]
    state.global_step = payload["global_step"]
    state.mask_rng.bit_generator.state = payload["mask_rng"]
    torch.set_rng_state(payload["torch_rng"])
    state.loss_sums = payload["loss_sums"]
    state.loss_count = payload["loss_count"]
    return state
