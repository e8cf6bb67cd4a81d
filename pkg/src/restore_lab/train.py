"""Training loop: Adam with cosine-annealed learning rate on the multi-scale objective."""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path

import numpy as np
import torch

from .checkpoint import load_model, restore_optimizer, save_checkpoint
from .config import TrainConfig
from .data import batch_stream
from .errors import NumericError
from .losses import LossConfig, restoration_loss
from .model import LCDNet, ModelConfig, make_pyramid

log = logging.getLogger(__name__)


def cosine_lr(step: int, total: int, lr_start: float, lr_end: float) -> float:
    """Cosine decay hitting ``lr_start`` at step 0 and ``lr_end`` at step ``total - 1``."""
    if total <= 1:
        return lr_start
    t = min(max(step, 0), total - 1) / (total - 1)
    return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + math.cos(math.pi * t))


def build_model(cfg: ModelConfig, seed: int) -> LCDNet:
    torch.manual_seed(seed)
    return LCDNet(cfg)


def make_optimizer(model: LCDNet, cfg: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(model.parameters(), lr=cfg.lr_start, betas=(cfg.beta1, cfg.beta2))


def train(
    dataset,
    model_cfg: ModelConfig,
    cfg: TrainConfig,
    out_dir=None,
    resume=None,
    stop_at: int | None = None,
    model: LCDNet | None = None,
) -> tuple[LCDNet, list[dict]]:
    """Run (or continue) training and return the model with one log record per step.

    ``stop_at`` ends the run early without changing the schedule, which is
    how a run is split into resumable pieces.
    """
    out = Path(out_dir) if out_dir is not None else None
    start = 0
    if resume is not None:
        model, manifest, tensors = load_model(resume)
        start = manifest["step"]
        opt = make_optimizer(model, cfg)
        restore_optimizer(opt, model, tensors)
        torch.set_rng_state(tensors["rng.torch"])
    else:
        model = model if model is not None else build_model(model_cfg, cfg.seed)
        opt = make_optimizer(model, cfg)
    model.train()
    loss_cfg = LossConfig(cfg.lambda_f)
    stream = batch_stream(dataset, cfg.batch_size, cfg.patch, cfg.flips, cfg.seed, start_step=start)
    end = cfg.steps if stop_at is None else min(stop_at, cfg.steps)

    history = []
    logfile = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        logfile = open(out / "train_log.jsonl", "a")
    try:
        for step in range(start, end):
            lr = cosine_lr(step, cfg.steps, cfg.lr_start, cfg.lr_end)
            for group in opt.param_groups:
                group["lr"] = lr
            deg, clean = next(stream)
            deg, clean = torch.from_numpy(deg), torch.from_numpy(clean)
            try:
                pred = model(deg)
                loss, spatial, freq = restoration_loss(pred, make_pyramid(clean)[: len(pred)], loss_cfg)
                if not torch.isfinite(loss):
                    raise NumericError(f"non-finite loss at step {step} (batch id {step})")
            except NumericError:
                if out is not None:
                    np.savez(out / f"nan_batch_{step}.npz", degraded=deg.numpy(), clean=clean.numpy())
                raise
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()

            rec = {"step": step, "lr": lr, "loss": loss.item(), "loss_s": spatial.item(), "loss_f": freq.item()}
            history.append(rec)
            if logfile is not None:
                logfile.write(json.dumps(rec) + "\n")
                logfile.flush()
            log.info("step=%d lr=%.3e loss=%.5f loss_s=%.5f loss_f=%.5f", step, lr, rec["loss"], rec["loss_s"], rec["loss_f"])
            done = step + 1
            if out is not None and (done % cfg.ckpt_every == 0 or done == end):
                save_checkpoint(out / f"step_{done:06d}", model, done, opt)
                save_checkpoint(out / "last", model, done, opt)
    finally:
        if logfile is not None:
            logfile.close()
    return model, history
