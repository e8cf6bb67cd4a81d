"""Checkpoint directory: ``manifest.json`` plus ``tensors.bin``.

The blob is the little-endian bytes of every tensor concatenated in
manifest order; the manifest records each tensor's shape, dtype and offset.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from .errors import InputError
from .model import LCDNet, ModelConfig

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
BLOB = "tensors.bin"


def _le(arr: np.ndarray) -> np.ndarray:
    return arr.astype(arr.dtype.newbyteorder("<"), copy=False)


def save_checkpoint(path, model: LCDNet, step: int, optimizer: torch.optim.Optimizer | None = None, extra: dict | None = None) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    tensors: dict[str, torch.Tensor] = {f"model.{k}": v for k, v in model.state_dict().items()}
    if optimizer is not None:
        names = {id(p): n for n, p in model.named_parameters()}
        for group in optimizer.param_groups:
            for p in group["params"]:
                for key, val in optimizer.state.get(p, {}).items():
                    tensors[f"optim.{names[id(p)]}.{key}"] = torch.as_tensor(val)
    tensors["rng.torch"] = torch.get_rng_state()

    index = {}
    offset = 0
    with open(path / BLOB, "wb") as fh:
        for name, t in tensors.items():
            arr = _le(t.detach().cpu().contiguous().numpy())
            raw = arr.tobytes()
            index[name] = {"shape": list(arr.shape), "dtype": arr.dtype.str, "offset": offset, "nbytes": len(raw)}
            fh.write(raw)
            offset += len(raw)
    manifest = {
        "format_version": FORMAT_VERSION,
        "model_config": model.cfg.to_dict(),
        "step": int(step),
        "optimizer_state": optimizer is not None,
        "tensors": index,
    }
    if extra:
        manifest.update(extra)
    (path / MANIFEST).write_text(json.dumps(manifest, indent=1))
    return path


def read_checkpoint(path) -> tuple[dict, dict[str, torch.Tensor]]:
    path = Path(path)
    try:
        manifest = json.loads((path / MANIFEST).read_text())
        blob = (path / BLOB).read_bytes()
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read checkpoint {path}: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise InputError(f"unsupported checkpoint format {manifest.get('format_version')}")
    tensors = {}
    for name, meta in manifest["tensors"].items():
        raw = blob[meta["offset"] : meta["offset"] + meta["nbytes"]]
        if len(raw) != meta["nbytes"]:
            raise InputError(f"checkpoint {path} is truncated at tensor {name}")
        arr = np.frombuffer(raw, dtype=np.dtype(meta["dtype"])).reshape(meta["shape"])
        tensors[name] = torch.from_numpy(arr.astype(arr.dtype.newbyteorder("="), copy=True))
    return manifest, tensors


def load_model(path) -> tuple[LCDNet, dict, dict[str, torch.Tensor]]:
    manifest, tensors = read_checkpoint(path)
    model = LCDNet(ModelConfig.from_dict(manifest["model_config"]))
    state = {k[len("model.") :]: v for k, v in tensors.items() if k.startswith("model.")}
    missing, unexpected = model.load_state_dict(state, strict=False)
    if missing or unexpected:
        raise InputError(f"checkpoint does not match its config: missing {missing[:3]}, unexpected {unexpected[:3]}")
    return model, manifest, tensors


def restore_optimizer(optimizer: torch.optim.Optimizer, model: LCDNet, tensors: dict[str, torch.Tensor]) -> None:
    for name, p in model.named_parameters():
        prefix = f"optim.{name}."
        state = {k[len(prefix) :]: v.clone() for k, v in tensors.items() if k.startswith(prefix)}
        if state:
            optimizer.state[p] = state
