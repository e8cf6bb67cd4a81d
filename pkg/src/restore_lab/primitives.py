"""Atomic operators composed by every block.

All tensors are ``(B, C, H, W)``. Spatial convolutions use replicate
padding so constant maps are fixed points of normalized filters.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError, InputError

LN_EPS = 1e-6


def layer_norm(x: torch.Tensor, gamma: torch.Tensor, beta: torch.Tensor, eps: float = LN_EPS) -> torch.Tensor:
    """Normalize over channels at every spatial position, then apply a per-channel affine."""
    if gamma.numel() != x.shape[1] or beta.numel() != x.shape[1]:
        raise ConfigError(f"layer_norm: {x.shape[1]} channels but affine has {gamma.numel()}/{beta.numel()}")
    mu = x.mean(1, keepdim=True)
    var = (x - mu).pow(2).mean(1, keepdim=True)
    y = (x - mu) / torch.sqrt(var + eps)
    return gamma.view(1, -1, 1, 1) * y + beta.view(1, -1, 1, 1)


class LayerNorm2d(nn.Module):
    def __init__(self, channels: int, eps: float = LN_EPS):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))
        self.eps = eps

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return layer_norm(x, self.weight, self.bias, self.eps)


def simple_gate(x: torch.Tensor) -> torch.Tensor:
    if x.shape[1] % 2:
        raise ConfigError(f"simple_gate needs an even channel count, got {x.shape[1]}")
    a, b = x.chunk(2, dim=1)
    return a * b


class SimpleGate(nn.Module):
    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return simple_gate(x)


def sca(x: torch.Tensor, weight: torch.Tensor, bias: torch.Tensor | None) -> torch.Tensor:
    """Simplified channel attention: rescale channels by a 1x1 conv of their global mean."""
    pooled = x.mean(dim=(2, 3), keepdim=True)
    return x * F.conv2d(pooled, weight, bias)


class SCA(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv = nn.Conv2d(channels, channels, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return sca(x, self.conv.weight, self.conv.bias)


def pointwise(cin: int, cout: int, bias: bool = True) -> nn.Conv2d:
    return nn.Conv2d(cin, cout, 1, bias=bias)


def depthwise(channels: int, k: int) -> nn.Conv2d:
    if k % 2 == 0:
        raise ConfigError(f"depthwise kernel must be odd, got {k}")
    return nn.Conv2d(channels, channels, k, padding=k // 2, groups=channels, padding_mode="replicate")


def conv3x3(cin: int, cout: int, stride: int = 1) -> nn.Conv2d:
    return nn.Conv2d(cin, cout, 3, stride=stride, padding=1, padding_mode="replicate")


def to_spectrum(x: torch.Tensor) -> torch.Tensor:
    """Real 2-D FFT over (H, W), carried as 2C real channels: real parts then imaginary parts."""
    z = torch.fft.rfft2(x, norm="ortho")
    return torch.cat([z.real, z.imag], dim=1)


def from_spectrum(s: torch.Tensor, size: tuple[int, int]) -> torch.Tensor:
    re, im = s.chunk(2, dim=1)
    return torch.fft.irfft2(torch.complex(re, im), s=size, norm="ortho")


class SpectralBranch(nn.Module):
    """Gated convolution applied to the Fourier coefficients of a feature map.

    The 1x1 conv doubles the 2C spectral channels so the gate returns 2C,
    which recombine into C complex channels before the inverse transform.
    """

    def __init__(self, channels: int):
        super().__init__()
        self.expand = pointwise(2 * channels, 4 * channels)
        self.dw = depthwise(4 * channels, 3)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        s = to_spectrum(x)
        s = simple_gate(self.dw(self.expand(s)))
        return from_spectrum(s, x.shape[-2:])


def unfold(x: torch.Tensor, k: int) -> torch.Tensor:
    """Replicate-padded k x k neighborhoods, shape ``(B, C*k*k, H*W)``.

    Rows are ordered channel-major, then kernel row, then kernel column.
    """
    if k < 1 or k % 2 == 0:
        raise ConfigError(f"unfold kernel size must be odd, got {k}")
    if k == 1:
        return x.flatten(2)
    p = k // 2
    return F.unfold(F.pad(x, (p, p, p, p), mode="replicate"), k)


def downsample2(x: torch.Tensor) -> torch.Tensor:
    if x.shape[-2] % 2 or x.shape[-1] % 2:
        raise InputError(f"cannot halve spatial size {tuple(x.shape[-2:])}")
    return F.avg_pool2d(x, 2)


def resize(x: torch.Tensor, size: tuple[int, int]) -> torch.Tensor:
    """Resize by a power of two: 2x2 averaging per halving, bilinear when enlarging."""
    h, w = x.shape[-2:]
    th, tw = size
    if (th, tw) == (h, w):
        return x
    if th < h:
        if h % th or w % tw or h // th != w // tw or (h // th) & (h // th - 1):
            raise InputError(f"cannot downscale {(h, w)} to {(th, tw)} by a power of two")
        while x.shape[-2] > th:
            x = downsample2(x)
        return x
    if th % h or tw % w or th // h != tw // w or (th // h) & (th // h - 1):
        raise InputError(f"cannot upscale {(h, w)} to {(th, tw)} by a power of two")
    return F.interpolate(x, size=(th, tw), mode="bilinear", align_corners=False)
