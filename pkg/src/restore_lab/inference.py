"""Full-resolution restoration and paired-dataset evaluation."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

from .metrics import METRICS, evaluate_pair
from .model import LCDNet

MULTIPLE = 8


@torch.no_grad()
def restore(model: LCDNet, img: np.ndarray) -> np.ndarray:
    """Restore one (H, W, 3) image; sizes not divisible by 8 are reflect-padded then cropped."""
    h, w = img.shape[:2]
    x = torch.from_numpy(np.ascontiguousarray(img, dtype=np.float32).transpose(2, 0, 1))[None]
    ph, pw = (-h) % MULTIPLE, (-w) % MULTIPLE
    if ph or pw:
        x = F.pad(x, (0, pw, 0, ph), mode="reflect")
    model.eval()
    y = model(x)[0][0, :, :h, :w]
    return y.numpy().transpose(1, 2, 0)


def evaluate(model: LCDNet | None, dataset, metrics=METRICS) -> tuple[list[dict], dict]:
    """Per-image rows and their mean; ``model=None`` scores the degraded inputs directly."""
    rows = []
    for name, (deg, clean) in zip(dataset.names, (dataset[i] for i in range(len(dataset)))):
        out = deg if model is None else np.clip(restore(model, deg), 0.0, 1.0)
        rows.append({"image_id": name, **evaluate_pair(out, clean, metrics)})
    mean = {"image_id": "mean", **{m: float(np.mean([r[m] for r in rows])) for m in metrics}}
    return rows, mean
