"""Training objectives: reconstruction, correlation, style, adversarial.

Domain conventions: reconstruction and adversarial terms consume internal-
domain images ([-1, 1]); the feature-based terms convert to the metric domain
before running the frozen extractor. Correlation compares position-pair inner
products of the pool2 features; style compares channel-pair inner products
over pool1-3.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from regionfill.data import to_metric
from regionfill.features import extract_features, reshape_to_matrix
from regionfill.nn.regionwise import ShapeError, as_mask_tensor


class NonFiniteLossError(ValueError):
    """A loss term evaluated to NaN or infinity."""


@dataclass(frozen=True)
class LossWeights:
    """Scale factors for the combined objective.

    lambda_adversarial is 0 during warm-up and 1 afterwards under the standard
    schedule, but any non-negative value is accepted.
    """

    lambda_correlation: float = 1e-5
    lambda_style: float = 1e-3
    lambda_adversarial: float = 1.0
    alpha_real: float = 0.01

    def __post_init__(self):
        for name in (
            "lambda_correlation",
            "lambda_style",
            "lambda_adversarial",
            "alpha_real",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class LossReport:
    reconstruction: float
    correlation: float
    style: float
    adversarial_g: float
    adversarial_d: float
    total: float
    masked_mae: float | None = None


def reconstruction_loss(
    p1: torch.Tensor, p2: torch.Tensor, target: torch.Tensor
) -> torch.Tensor:
    """Sum of the two stages' mean-absolute errors against the ground truth."""
    if p1.shape != target.shape or p2.shape != target.shape:
        raise ShapeError(
            f"shape mismatch: {tuple(p1.shape)}, {tuple(p2.shape)} vs target "
            f"{tuple(target.shape)}"
        )
    return (p1 - target).abs().mean() + (p2 - target).abs().mean()


def gram_positions(f: torch.Tensor) -> torch.Tensor:
    """Inner products between spatial positions: (c,h,w) -> (n,n), batched
    (B,c,h,w) -> (B,n,n). No normalization; the loss applies its own."""
    mat = reshape_to_matrix(f)
    return mat.transpose(-2, -1) @ mat


def gram_channels(f: torch.Tensor) -> torch.Tensor:
    """Inner products between channels divided by the position count:
    (c,h,w) -> (c,c), batched (B,c,h,w) -> (B,c,c)."""
    mat = reshape_to_matrix(f)
    n = mat.shape[-1]
    return (mat @ mat.transpose(-2, -1)) / n


def correlation_loss(
    fake: torch.Tensor, real: torch.Tensor, extractor
) -> torch.Tensor:
    """Position-gram L1 gap on pool2 features, scaled by 1/(c*n^2).

    Inputs are internal-domain images; batch dimension is averaged.
    """
    ff = extract_features(extractor, to_metric(fake), stages=("pool2",))["pool2"]
    fr = extract_features(extractor, to_metric(real), stages=("pool2",))["pool2"]
    c = ff.shape[1]
    n = ff.shape[2] * ff.shape[3]
    gap = (gram_positions(ff) - gram_positions(fr)).abs().sum(dim=(-2, -1))
    return (gap / (c * n * n)).mean()


def style_loss(fake: torch.Tensor, real: torch.Tensor, extractor) -> torch.Tensor:
    """Channel-gram L1 gap summed over pool1-3, stage p scaled by 1/c_p^2."""
    ff = extract_features(extractor, to_metric(fake))
    fr = extract_features(extractor, to_metric(real))
    total = None
    for stage in ff:
        c = ff[stage].shape[1]
        gap = (gram_channels(ff[stage]) - gram_channels(fr[stage])).abs().sum(
            dim=(-2, -1)
        )
        term = (gap / (c * c)).mean()
        total = term if total is None else total + term
    return total


def adversarial_losses(
    discriminator,
    p1: torch.Tensor,
    p2: torch.Tensor,
    real: torch.Tensor,
    m,
    alpha_real: float = 0.01,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Generator and discriminator objectives over missing-region content.

    Every input is restricted to the missing region (multiplied by 1 - m)
    before scoring, so existing pixels never influence either objective.
    The generator term uses live fakes; the discriminator term re-scores
    detached fakes plus the real image, with the real score weighted by
    alpha_real. Both sides minimize their returned scalar.
    """
    if p1.shape != real.shape or p2.shape != real.shape:
        raise ShapeError(
            f"shape mismatch: {tuple(p1.shape)}, {tuple(p2.shape)} vs real "
            f"{tuple(real.shape)}"
        )
    m_t = as_mask_tensor(m, real)
    hole = 1.0 - m_t
    score_f1 = discriminator(p1 * hole, m_t)
    score_f2 = discriminator(p2 * hole, m_t)
    loss_g = (1.0 - score_f1).mean() + (1.0 - score_f2).mean()

    score_real = discriminator(real * hole, m_t)
    score_d1 = discriminator((p1 * hole).detach(), m_t)
    score_d2 = discriminator((p2 * hole).detach(), m_t)
    loss_d = -(
        alpha_real * score_real.mean()
        + (1.0 - score_d1).mean()
        + (1.0 - score_d2).mean()
    )
    return loss_g, loss_d


def total_loss(
    reconstruction: torch.Tensor,
    correlation: torch.Tensor,
    style: torch.Tensor,
    adversarial_g: torch.Tensor,
    w: LossWeights,
) -> torch.Tensor:
    """Weighted combination; raises NonFiniteLossError naming the bad term."""
    parts = {
        "reconstruction": reconstruction,
        "correlation": correlation,
        "style": style,
        "adversarial_g": adversarial_g,
    }
    for name, value in parts.items():
        v = value if isinstance(value, torch.Tensor) else torch.as_tensor(value)
        if not torch.isfinite(v).all():
            raise NonFiniteLossError(f"loss term {name!r} is not finite: {value}")
    return (
        reconstruction
        + w.lambda_correlation * correlation
        + w.lambda_style * style
        + w.lambda_adversarial * adversarial_g
    )
