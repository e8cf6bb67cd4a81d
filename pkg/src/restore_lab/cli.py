"""Command line entry point: synth, train, eval, infer, gradcheck, ablate."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from pathlib import Path

import torch

from . import gradcheck as gc
from .ablation import AXES, run_ablation, variants
from .checkpoint import load_model
from .config import dump_config, load_config
from .data import DegradationSpec, PairedDataset, load_image, sample_clean_images, save_image, write_dataset
from .errors import InputError, RestoreLabError
from .inference import evaluate, restore
from .metrics import METRICS
from .model import SKIP_MODES

log = logging.getLogger("restore_lab")


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _write_table(rows: list[dict], path: Path | None) -> None:
    if not rows:
        return
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for r in rows:
            writer.writerow({k: (f"{v:.6f}" if isinstance(v, float) and math.isfinite(v) else v) for k, v in r.items()})
    finally:
        if path:
            fh.close()


def cmd_synth(args) -> int:
    spec = DegradationSpec(mode=args.mode, seed=args.seed, noise_sigma=args.noise)
    if args.clean:
        clean = [load_image(p) for p in sorted(Path(args.clean).glob("*.png"))]
        if not clean:
            raise InputError(f"no PNG images in {args.clean}")
    else:
        clean = sample_clean_images(args.count, args.size, args.seed)
    out = write_dataset(args.out, clean, spec)
    print(f"wrote {len(clean)} pairs to {out}")
    return 0


def cmd_train(args) -> int:
    from .train import train

    model_cfg, train_cfg = load_config(args.config)
    if args.seed is not None:
        train_cfg.seed = args.seed
    if args.steps is not None:
        train_cfg.steps = args.steps
    train_cfg.__post_init__()
    data = PairedDataset(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_text(dump_config(model_cfg, train_cfg))
    _, hist = train(data, model_cfg, train_cfg, out, resume=args.resume)
    if hist:
        print(f"step {hist[-1]['step']}: loss {hist[-1]['loss']:.5f}; checkpoint in {out / 'last'}")
    return 0


def cmd_eval(args) -> int:
    metrics = _csv_list(args.metrics)
    unknown = [m for m in metrics if m not in METRICS]
    if unknown:
        raise InputError(f"unknown metric(s) {unknown}; choose from {list(METRICS)}")
    model = None if args.ckpt is None else load_model(args.ckpt)[0]
    rows, mean = evaluate(model, PairedDataset(args.data), metrics)
    _write_table(rows + [mean], Path(args.out) if args.out else None)
    return 0


def cmd_infer(args) -> int:
    model = load_model(args.ckpt)[0]
    img = load_image(args.input)
    save_image(args.out, restore(model, img))
    return 0


def cmd_gradcheck(args) -> int:
    ok, results = gc.run(args.module, args.tol, args.seed)
    for r in results:
        status = "ok" if r.max_rel_err <= args.tol else "FAIL"
        print(f"{status:4s} {r.module:5s} {r.group:60s} max_rel_err={r.max_rel_err:.3e} |grad|={r.grad_norm:.3e}")
    print("gradcheck", "PASS" if ok else "FAIL", f"(tol={args.tol:g}, {len(results)} groups)")
    return 0 if ok else 1


def cmd_ablate(args) -> int:
    model_cfg, train_cfg = load_config(args.config)
    if args.seed is not None:
        train_cfg.seed = args.seed
    if args.steps is not None:
        train_cfg.steps = args.steps
    train_cfg.__post_init__()
    vs = variants(
        model_cfg,
        axes=_csv_list(args.axes),
        skip_modes=_csv_list(args.skip_mode),
        branches=[int(b) for b in _csv_list(args.branches)],
    )
    rows = run_ablation(PairedDataset(args.data), model_cfg, train_cfg, vs)
    _write_table(rows, Path(args.out) if args.out else None)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="restore-lab", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic paired dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--mode", choices=("blur", "rain"), default="blur")
    s.add_argument("--count", type=int, default=8)
    s.add_argument("--size", type=int, default=64)
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--clean", help="directory of clean PNGs (default: bundled sample photographs)")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="train a model")
    s.add_argument("--config")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--steps", type=int)
    s.add_argument("--resume", metavar="CKPT", help="checkpoint directory to continue from")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="score a checkpoint on a paired dataset")
    s.add_argument("--ckpt", help="omit to score the degraded inputs")
    s.add_argument("--data", required=True)
    s.add_argument("--metrics", default=",".join(METRICS))
    s.add_argument("--out", help="CSV path (default stdout)")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("infer", help="restore one image")
    s.add_argument("--ckpt", required=True)
    s.add_argument("input")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    s.add_argument("module", nargs="?", default="all", choices=gc.SELECTORS + ("all",))
    s.add_argument("--tol", type=float, default=1e-4)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("ablate", help="train and compare ablation variants")
    s.add_argument("--config")
    s.add_argument("--data", required=True)
    s.add_argument("--out", help="CSV path (default stdout)")
    s.add_argument("--seed", type=int)
    s.add_argument("--steps", type=int)
    s.add_argument("--axes", default=",".join(AXES))
    s.add_argument("--skip-mode", default=",".join(SKIP_MODES))
    s.add_argument("--branches", default="1,2,3")
    s.set_defaults(func=cmd_ablate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    threads = os.environ.get("RESTORE_LAB_THREADS")
    if threads:
        torch.set_num_threads(max(1, int(threads)))
    try:
        return args.func(args)
    except RestoreLabError as exc:
        print(f"{exc.category} error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
