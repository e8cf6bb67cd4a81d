"""Multi-scale spatial + frequency L1 objective."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import torch

from .errors import ConfigError, InputError


@dataclass(frozen=True)
class LossConfig:
    lambda_f: float = 0.1

    def __post_init__(self):
        if self.lambda_f < 0:
            raise ConfigError(f"lambda_f must be >= 0, got {self.lambda_f}")


def spectrum_l1(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean |.| over the real and imaginary parts of the unnormalized 2-D FFT difference."""
    diff = torch.fft.fft2(pred - target)
    return torch.view_as_real(diff).abs().mean()


def restoration_loss(
    pred: Sequence[torch.Tensor], target: Sequence[torch.Tensor], cfg: LossConfig = LossConfig()
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Return ``(total, spatial, frequency)``, each term averaged over pyramid levels."""
    if len(pred) != len(target) or not pred:
        raise InputError(f"pyramid depth mismatch: {len(pred)} predictions vs {len(target)} targets")
    for i, (p, t) in enumerate(zip(pred, target)):
        if p.shape != t.shape:
            raise InputError(f"level {i + 1}: prediction {tuple(p.shape)} vs target {tuple(t.shape)}")
    n = len(pred)
    spatial = sum((p - t).abs().mean() for p, t in zip(pred, target)) / n
    freq = sum(spectrum_l1(p, t) for p, t in zip(pred, target)) / n
    return spatial + cfg.lambda_f * freq, spatial, freq
