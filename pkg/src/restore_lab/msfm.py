"""Multi-branch selective frequency module.

Each branch predicts per-sample grouped low-pass kernels from the pooled
input, splits its channel slice into low and high bands, and mixes the two
bands with channel-transposed attention driven by a shared query.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import torch
import torch.nn as nn

from .errors import ConfigError
from .primitives import LayerNorm2d, depthwise, pointwise, unfold


class LowPassFilterGenerator(nn.Module):
    """GAP -> 1x1 conv -> LN -> reshape to (g, k, k) -> softmax over the k*k taps."""

    def __init__(self, c: int, groups: int, k: int):
        super().__init__()
        if k % 2 == 0:
            raise ConfigError(f"low-pass kernel size must be odd, got {k}")
        self.groups = groups
        self.k = k
        self.conv = pointwise(c, groups * k * k)
        self.norm = LayerNorm2d(groups * k * k)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        logits = self.norm(self.conv(x.mean(dim=(2, 3), keepdim=True)))
        b = x.shape[0]
        taps = torch.softmax(logits.view(b, self.groups, self.k * self.k), dim=-1)
        return taps.view(b, self.groups, self.k, self.k)


def apply_lowpass(x: torch.Tensor, filters: torch.Tensor) -> torch.Tensor:
    """Filter each channel group with that sample's kernel; ``filters`` is (B, g, k, k)."""
    b, c, h, w = x.shape
    g, k = filters.shape[1], filters.shape[-1]
    if filters.shape[0] != b or filters.shape[-2] != k:
        raise ConfigError(f"filter bank {tuple(filters.shape)} does not fit input {tuple(x.shape)}")
    if c % g:
        raise ConfigError(f"{c} channels cannot be split into {g} filter groups")
    patches = unfold(x, k).view(b, g, c // g, k * k, h * w)
    out = (patches * filters.reshape(b, g, 1, k * k, 1)).sum(dim=3)
    return out.view(b, c, h, w)


def split_frequency(x: torch.Tensor, filters: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    low = apply_lowpass(x, filters)
    return low, x - low


def channel_attention(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Attention between channels of (..., C', N) tensors; returns (output, weights)."""
    attn = torch.softmax(q @ k.transpose(-2, -1) / math.sqrt(q.shape[-1]), dim=-1)
    return attn @ v, attn


def _projection(c: int) -> nn.Sequential:
    return nn.Sequential(pointwise(c, c, bias=False), nn.Conv2d(c, c, 3, padding=1, groups=c, bias=False, padding_mode="replicate"))


class CrossFrequencyAttention(nn.Module):
    def __init__(self, c: int, heads: int):
        super().__init__()
        if c % heads:
            raise ConfigError(f"{c} channels cannot be split into {heads} heads")
        self.heads = heads
        self.norm_low = LayerNorm2d(c)
        self.norm_high = LayerNorm2d(c)
        self.key_low = _projection(c)
        self.key_high = _projection(c)
        self.value_low = _projection(c)
        self.value_high = _projection(c)
        self.query = _projection(c)

    def _heads(self, t: torch.Tensor) -> torch.Tensor:
        b, c, h, w = t.shape
        return t.reshape(b, self.heads, c // self.heads, h * w)

    def forward(self, low: torch.Tensor, high: torch.Tensor, return_attention: bool = False):
        if low.shape != high.shape:
            raise ConfigError(f"band shapes differ: {tuple(low.shape)} vs {tuple(high.shape)}")
        nl, nh = self.norm_low(low), self.norm_high(high)
        q = self._heads(self.query(nl + nh))
        f_low, a_low = channel_attention(q, self._heads(self.key_low(nl)), self._heads(self.value_low(nl)))
        f_high, a_high = channel_attention(q, self._heads(self.key_high(nh)), self._heads(self.value_high(nh)))
        out = (f_low + f_high).reshape(low.shape)
        if return_attention:
            return out, (a_low, a_high)
        return out


class FrequencyBranch(nn.Module):
    def __init__(self, c: int, groups: int, k: int, heads: int):
        super().__init__()
        if c % groups:
            raise ConfigError(f"branch width {c} not divisible by {groups} filter groups")
        self.filters = LowPassFilterGenerator(c, groups, k)
        self.attention = CrossFrequencyAttention(c, heads)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        low, high = split_frequency(x, self.filters(x))
        return self.attention(low, high)


class MSFM(nn.Module):
    """Channels are split evenly across branches, each with its own (groups, kernel)."""

    def __init__(self, c: int, branches: Sequence[tuple[int, int]] = ((4, 3), (4, 5)), heads: int = 2):
        super().__init__()
        n = len(branches)
        if n == 0 or c % n:
            raise ConfigError(f"{c} channels cannot be split across {n} frequency branches")
        self.branch_width = c // n
        self.branches = nn.ModuleList(FrequencyBranch(self.branch_width, g, k, heads) for g, k in branches)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        parts = x.split(self.branch_width, dim=1)
        return torch.cat([branch(p) for branch, p in zip(self.branches, parts)], dim=1)
