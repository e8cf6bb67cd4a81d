"""Ablation variants along the module, branch-count and skip-connection axes."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .config import TrainConfig
from .errors import InputError
from .inference import evaluate
from .model import SKIP_MODES, ModelConfig
from .mssf import PATH_KERNELS
from .train import train

AXES = ("modules", "branches", "skip")

# (multi-IO, SCAM, HSFS) rows of the module ablation; SCAM off means summed skips
MODULE_ROWS = (
    (False, False, False),
    (True, False, False),
    (False, True, False),
    (False, False, True),
    (True, True, False),
    (True, True, True),
)


@dataclass
class Variant:
    axis: str
    name: str
    cfg: ModelConfig


def _key(cfg: ModelConfig) -> str:
    return repr(sorted(cfg.to_dict().items()))


def variants(base: ModelConfig, axes=AXES, skip_modes=SKIP_MODES, branches=(1, 2, 3)) -> list[Variant]:
    bad_axes = [a for a in axes if a not in AXES]
    if bad_axes:
        raise InputError(f"unknown ablation axes {bad_axes}; choose from {AXES}")
    bad_modes = [m for m in skip_modes if m not in SKIP_MODES]
    if bad_modes or not skip_modes:
        raise InputError(f"skip modes {bad_modes or 'none'} invalid; a skip fusion from {SKIP_MODES} is required")
    bad_branches = [b for b in branches if not 1 <= b <= len(PATH_KERNELS)]
    if bad_branches or not branches:
        raise InputError(f"branch counts must be in 1..{len(PATH_KERNELS)}, got {list(branches)}")

    out = []
    if "modules" in axes:
        for mio, scam, hsfs in MODULE_ROWS:
            name = f"multi_io={'on' if mio else 'off'} scam={'on' if scam else 'off'} hsfs={'on' if hsfs else 'off'}"
            out.append(Variant("modules", name, replace(base, multi_io=mio, hsfs=hsfs, skip_mode="scam" if scam else "sum")))
    if "branches" in axes:
        for n in branches:
            kernels = ",".join(f"{k}x{k}" for k in PATH_KERNELS[:n])
            out.append(Variant("branches", f"branches={n} kernels={kernels}", replace(base, mssf_branches=n)))
    if "skip" in axes:
        for mode in skip_modes:
            out.append(Variant("skip", f"skip={mode}", replace(base, skip_mode=mode)))
    return out


def run_ablation(dataset, base: ModelConfig, train_cfg: TrainConfig, vs: list[Variant], eval_set=None) -> list[dict]:
    """Train every variant with the same seed and budget; identical configs are trained once."""
    eval_set = eval_set if eval_set is not None else dataset
    cache: dict[str, dict] = {}
    rows = []
    for v in vs:
        key = _key(v.cfg)
        if key not in cache:
            model, hist = train(dataset, v.cfg, train_cfg)
            _, mean = evaluate(model, eval_set, ("psnr", "ssim"))
            cache[key] = {
                "params": sum(p.numel() for p in model.parameters()),
                "final_loss": hist[-1]["loss"],
                "psnr": mean["psnr"],
                "ssim": mean["ssim"],
            }
        rows.append({"axis": v.axis, "variant": v.name, **cache[key]})
    return rows
