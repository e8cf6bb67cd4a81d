"""Central finite-difference checks of autograd gradients on micro-instances.

Each parameter tensor is one group. A group is probed along one random
direction and at a few random entries; its score is the worst relative
error ``|analytic - numeric| / max(|analytic|, |numeric|, floor)``. The
floor, 1e-4 times ``max(1, |loss|)``, turns the test absolute for derivatives
so small that central differences at step 1e-5 are dominated by roundoff.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import torch
import torch.nn as nn

from .errors import InputError
from .losses import restoration_loss
from .model import LCDNet, ModelConfig
from .msfm import MSFM
from .mssf import MSSFBlock
from .scam import SCAM

SELECTORS = ("mssf", "msfm", "scam", "model", "loss")
EPS = 1e-5
FLOOR = 1e-4


@dataclass
class GroupResult:
    module: str
    group: str
    max_rel_err: float
    grad_norm: float


def _randomize(module: nn.Module, gen: torch.Generator, scale: float = 0.5) -> None:
    # default inits leave zero gates and unit norms; perturb everything so every path carries gradient
    with torch.no_grad():
        for p in module.parameters():
            p.add_(scale * torch.randn(p.shape, generator=gen, dtype=p.dtype))


def _projector(outputs, gen):
    weights = [torch.randn(o.shape, generator=gen, dtype=o.dtype) for o in outputs]

    def loss(outs):
        return sum((o * w).sum() for o, w in zip(outs, weights))

    return loss


def fd_check(
    fn: Callable[[], torch.Tensor],
    params: dict[str, torch.Tensor],
    gen: torch.Generator,
    entries: int = 4,
    eps: float = EPS,
) -> dict[str, tuple[float, float]]:
    """Return ``{name: (max_rel_err, grad_norm)}`` comparing autograd with central differences."""
    for p in params.values():
        p.grad = None
    loss = fn()
    loss.backward()
    floor = FLOOR * max(1.0, abs(loss.item()))
    grads = {n: p.grad.detach().clone() for n, p in params.items()}

    def numeric(p: torch.Tensor, direction: torch.Tensor) -> float:
        with torch.no_grad():
            p.add_(eps * direction)
            up = fn().item()
            p.sub_(2 * eps * direction)
            down = fn().item()
            p.add_(eps * direction)
        return (up - down) / (2 * eps)

    out = {}
    for name, p in params.items():
        g = grads[name]
        probes = [torch.randn(p.shape, generator=gen, dtype=p.dtype)]
        count = min(entries, p.numel())
        for i in torch.randperm(p.numel(), generator=gen)[:count].tolist():
            e = torch.zeros(p.numel(), dtype=p.dtype)
            e[i] = 1.0
            probes.append(e.view(p.shape))
        worst = 0.0
        for d in probes:
            a = float((g * d).sum())
            n = numeric(p, d)
            worst = max(worst, abs(a - n) / max(abs(a), abs(n), floor))
        out[name] = (worst, float(g.norm()))
    return out


def _instance(selector: str, gen: torch.Generator):
    """(module, closure computing a scalar, tensors to check) for a double-precision micro-instance."""

    def rand(*shape):
        return torch.randn(*shape, generator=gen, dtype=torch.float64)

    if selector == "mssf":
        m = MSSFBlock(4, branches=2).double()
        x = rand(1, 4, 6, 6)
        _randomize(m, gen)
        proj = _projector([m(x)], gen)
        return m, lambda: proj([m(x)])
    if selector == "msfm":
        m = MSFM(4, branches=((2, 3), (1, 5)), heads=1).double()
        x = rand(1, 4, 6, 6)
        _randomize(m, gen)
        proj = _projector([m(x)], gen)
        return m, lambda: proj([m(x)])
    if selector == "scam":
        m = SCAM((4, 8, 16, 32), 32).double()
        # deepest level kept at 2x2: a 1x1 middle upsamples to a constant map and zeroes some gradients
        feats = [rand(1, 4, 16, 16), rand(1, 8, 8, 8), rand(1, 16, 4, 4), rand(1, 32, 2, 2)]
        middle = rand(1, 32, 2, 2)
        _randomize(m, gen)
        proj = _projector(m(feats, middle), gen)
        return m, lambda: proj(m(feats, middle))
    if selector == "model":
        cfg = ModelConfig(
            base_width=4, enc_blocks=(1, 1, 1, 1), middle_blocks=1, dec_blocks=(1, 1, 1, 1),
            msfm_branches=((2, 3),), heads=2,
        )
        m = LCDNet(cfg).double()
        x = torch.rand(1, 3, 16, 16, generator=gen, dtype=torch.float64)
        _randomize(m, gen, scale=0.1)
        proj = _projector(m(x), gen)
        return m, lambda: proj(m(x))
    raise ValueError(selector)


def check_module(selector: str, seed: int = 0, entries: int | None = None) -> list[GroupResult]:
    if entries is None:
        entries = 2 if selector == "model" else 4
    gen = torch.Generator().manual_seed(seed)
    if selector == "loss":
        shapes = [(1, 3, 8, 8), (1, 3, 4, 4), (1, 3, 2, 2), (1, 3, 1, 1)]
        pred = {f"pred.level{i + 1}": torch.randn(s, generator=gen, dtype=torch.float64, requires_grad=True) for i, s in enumerate(shapes)}
        target = [torch.randn(s, generator=gen, dtype=torch.float64) for s in shapes]
        res = fd_check(lambda: restoration_loss(list(pred.values()), target)[0], pred, gen, entries)
    else:
        module, fn = _instance(selector, gen)
        res = fd_check(fn, dict(module.named_parameters()), gen, entries)
    return [GroupResult(selector, name, err, norm) for name, (err, norm) in res.items()]


def run(selector: str = "all", tol: float = 1e-4, seed: int = 0, entries: int | None = None) -> tuple[bool, list[GroupResult]]:
    selectors = SELECTORS if selector == "all" else (selector,)
    if any(s not in SELECTORS for s in selectors):
        raise InputError(f"unknown selector {selector!r}; choose from {SELECTORS + ('all',)}")
    results = [r for s in selectors for r in check_module(s, seed, entries)]
    return all(r.max_rel_err <= tol for r in results), results
