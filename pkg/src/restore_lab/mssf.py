"""Multi-scale spatial feature block.

A detail stage (gated local convs + a spectral branch + identity) feeds
cross-linked depthwise paths with growing kernels whose outputs are fused
back to the block width.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from .errors import ConfigError
from .primitives import SCA, LayerNorm2d, SpectralBranch, depthwise, pointwise, simple_gate

PATH_KERNELS = (3, 5, 7)


def path_kernels(branches: int) -> tuple[int, ...]:
    if not 1 <= branches <= len(PATH_KERNELS):
        raise ConfigError(f"MSSF branch count must be in 1..{len(PATH_KERNELS)}, got {branches}")
    return PATH_KERNELS[:branches]


class LocalBranch(nn.Module):
    """1x1 expand, dw 3x3, gate, channel attention, 1x1 project."""

    def __init__(self, c: int):
        super().__init__()
        self.expand = pointwise(c, 2 * c)
        self.dw = depthwise(2 * c, 3)
        self.sca = SCA(c)
        self.project = pointwise(c, c)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.project(self.sca(simple_gate(self.dw(self.expand(x)))))


class MSSFBlock(nn.Module):
    def __init__(self, c: int, branches: int = 2):
        super().__init__()
        kernels = path_kernels(branches)
        n = len(kernels)
        if (n * c) % 2:
            raise ConfigError(f"MSSF width {c} with {n} paths leaves an odd gate width")
        self.width = c
        self.kernels = kernels
        self.use_spectral = True

        self.norm = LayerNorm2d(c)
        self.local = LocalBranch(c)
        self.spectral = SpectralBranch(c)

        self.path_norms = nn.ModuleList(LayerNorm2d(c) for _ in kernels)
        self.path_expand = nn.ModuleList(pointwise(c, 2 * c) for _ in kernels)
        self.path_dw = nn.ModuleList(depthwise(2 * c, k) for k in kernels)
        # each fusion conv sees all n path outputs, its gate halves n*c
        self.fuse_dw = nn.ModuleList(depthwise(n * c, k) for k in kernels)
        self.fuse = pointwise(n * (n * c // 2), c)

    def spatial(self, x: torch.Tensor) -> torch.Tensor:
        z = self.norm(x)
        out = x + self.local(z)
        if self.use_spectral:
            out = out + self.spectral(z)
        return out

    def context(self, xs: torch.Tensor) -> torch.Tensor:
        first = [
            simple_gate(dw(expand(norm(xs))))
            for norm, expand, dw in zip(self.path_norms, self.path_expand, self.path_dw)
        ]
        n = len(first)
        second = []
        for i, dw in enumerate(self.fuse_dw):
            # path i leads with its own features, then the others in cyclic order
            order = [first[(i + j) % n] for j in range(n)]
            second.append(simple_gate(dw(torch.cat(order, dim=1))))
        return self.fuse(torch.cat(second, dim=1))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        xs = self.spatial(x)
        return xs + self.context(xs)


class LocalBlock(nn.Module):
    """Ablation baseline: residual local branch only."""

    def __init__(self, c: int):
        super().__init__()
        self.norm = LayerNorm2d(c)
        self.local = LocalBranch(c)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.local(self.norm(x))
