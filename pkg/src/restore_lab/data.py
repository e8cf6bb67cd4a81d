"""Synthetic paired degradations, dataset layout and patch sampling.

Images are float arrays in [0, 1] shaped (H, W, 3). A dataset directory
holds ``input/`` (degraded) and ``target/`` (clean) with identical PNG names.
"""

from __future__ import annotations

import dataclasses
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import correlate, gaussian_filter

from .errors import ConfigError, InputError


@dataclass
class DegradationSpec:
    mode: str = "blur"
    sigma_range: tuple[float, float] = (1.0, 2.0)
    kernel_size: int = 0  # 0 picks 2*ceil(3*sigma_max)+1
    streak_range: tuple[int, int] = (8, 24)
    angle_range: tuple[float, float] = (-25.0, 25.0)
    length_range: tuple[float, float] = (6.0, 18.0)
    intensity_range: tuple[float, float] = (0.3, 0.8)
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("blur", "rain"):
            raise ConfigError(f"degradation mode must be 'blur' or 'rain', got {self.mode!r}")
        for name in ("sigma_range", "streak_range", "angle_range", "length_range", "intensity_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigError(f"{name} is empty: ({lo}, {hi})")
            setattr(self, name, (lo, hi))
        if self.sigma_range[0] < 0 or self.noise_sigma < 0 or self.streak_range[0] < 0:
            raise ConfigError("blur sigma, noise sigma and streak counts must be nonnegative")
        if not (0 <= self.intensity_range[0] and self.intensity_range[1] <= 1):
            raise ConfigError("streak intensities must lie in [0, 1]")
        if self.kernel_size and self.kernel_size % 2 == 0:
            raise ConfigError(f"blur kernel size must be odd, got {self.kernel_size}")

    def blur_kernel_size(self) -> int:
        return self.kernel_size or 2 * math.ceil(3 * self.sigma_range[1]) + 1

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {list(v) if isinstance(v, tuple) else repr(v)}".replace("'", '"'))
        return "\n".join(lines) + "\n"


def gaussian_kernel(sigma: float, size: int) -> np.ndarray:
    if sigma == 0:
        k = np.zeros((size, size))
        k[size // 2, size // 2] = 1.0
        return k
    r = np.arange(size) - size // 2
    g = np.exp(-(r**2) / (2 * sigma**2))
    k = np.outer(g, g)
    return k / k.sum()


def blur(img: np.ndarray, sigma: float, size: int) -> np.ndarray:
    k = gaussian_kernel(sigma, size)
    return np.stack([correlate(img[..., c], k, mode="nearest") for c in range(img.shape[-1])], axis=-1)


def _finish(img: np.ndarray, spec: DegradationSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.noise_sigma > 0:
        img = img + rng.normal(0.0, spec.noise_sigma, img.shape)
    return np.clip(img, 0.0, 1.0)


def synth_blur(clean: np.ndarray, spec: DegradationSpec, rng: np.random.Generator) -> np.ndarray:
    sigma = rng.uniform(*spec.sigma_range)
    return _finish(blur(np.asarray(clean, dtype=np.float64), sigma, spec.blur_kernel_size()), spec, rng)


def rain_layer(shape: tuple[int, int], spec: DegradationSpec, rng: np.random.Generator) -> np.ndarray:
    """Streak opacity map in [0, 1]; streaks share one direction per image."""
    h, w = shape
    layer = np.zeros((h, w))
    count = int(rng.integers(spec.streak_range[0], spec.streak_range[1] + 1))
    angle = math.radians(rng.uniform(*spec.angle_range))
    dy, dx = math.cos(angle), math.sin(angle)
    for _ in range(count):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        length = rng.uniform(*spec.length_range)
        alpha = rng.uniform(*spec.intensity_range)
        t = np.linspace(-length / 2, length / 2, max(2, int(2 * length)))
        ys = np.rint(cy + t * dy).astype(int)
        xs = np.rint(cx + t * dx).astype(int)
        keep = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
        np.maximum.at(layer, (ys[keep], xs[keep]), alpha)
    if count:
        # soften edges without spreading mass far from the streak
        layer = np.maximum(layer, gaussian_filter(layer, 0.5, mode="nearest"))
    return np.clip(layer, 0.0, 1.0)


def synth_rain(clean: np.ndarray, spec: DegradationSpec, rng: np.random.Generator) -> np.ndarray:
    clean = np.asarray(clean, dtype=np.float64)
    a = rain_layer(clean.shape[:2], spec, rng)[..., None]
    return _finish(clean * (1 - a) + a, spec, rng)


def degrade(clean: np.ndarray, spec: DegradationSpec, rng: np.random.Generator) -> np.ndarray:
    return synth_blur(clean, spec, rng) if spec.mode == "blur" else synth_rain(clean, spec, rng)


def make_pyramid(img: np.ndarray, levels: int = 4) -> list[np.ndarray]:
    """Input image, then three successive 2x2 averages."""
    scale = 2 ** (levels - 1)
    h, w = img.shape[:2]
    if h % scale or w % scale:
        raise InputError(f"image size {(h, w)} must be divisible by {scale}")
    out = [np.asarray(img)]
    for _ in range(levels - 1):
        x = out[-1]
        out.append(0.25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2]))
    return out


# --- image files -----------------------------------------------------------

def load_image(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read image {path}: {exc}") from exc


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_image(path, img: np.ndarray) -> None:
    Image.fromarray(to_uint8(img)).save(path)


def sample_clean_images(n: int, size: int, seed: int) -> list[np.ndarray]:
    """Random crops of the photographs bundled with scikit-image, box-downscaled for detail."""
    from skimage import data as skdata

    sources = [getattr(skdata, name)() for name in ("astronaut", "coffee", "chelsea", "rocket", "immunohistochemistry")]
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        src = Image.fromarray(sources[i % len(sources)])
        factor = int(rng.choice([2, 3, 4]))
        src = src.resize((src.width // factor, src.height // factor), Image.BOX)
        top = int(rng.integers(0, src.height - size + 1))
        left = int(rng.integers(0, src.width - size + 1))
        crop = np.asarray(src.crop((left, top, left + size, top + size)), dtype=np.float32) / 255.0
        out.append(crop)
    return out


def write_dataset(out_dir, clean: Sequence[np.ndarray], spec: DegradationSpec) -> Path:
    out = Path(out_dir)
    (out / "input").mkdir(parents=True, exist_ok=True)
    (out / "target").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    for i, img in enumerate(clean):
        target = to_uint8(img)
        degraded = degrade(target.astype(np.float64) / 255.0, spec, rng)
        name = f"{i:04d}.png"
        Image.fromarray(target).save(out / "target" / name)
        save_image(out / "input" / name, degraded)
    (out / "spec.txt").write_text(spec.to_text())
    return out


class PairedDataset:
    """All pairs of a dataset directory, loaded eagerly."""

    def __init__(self, root):
        root = Path(root)
        inp, tgt = root / "input", root / "target"
        if not inp.is_dir() or not tgt.is_dir():
            raise InputError(f"{root} must contain input/ and target/ directories")
        names = sorted(p.name for p in inp.iterdir() if p.suffix.lower() == ".png")
        if not names:
            raise InputError(f"no PNG images in {inp}")
        missing = [n for n in names if not (tgt / n).is_file()]
        if missing:
            raise InputError(f"targets missing for {missing[:5]}")
        self.root = root
        self.names = names
        self.inputs = [load_image(inp / n) for n in names]
        self.targets = [load_image(tgt / n) for n in names]
        for n, a, b in zip(names, self.inputs, self.targets):
            if a.shape != b.shape:
                raise InputError(f"{n}: input {a.shape} and target {b.shape} differ")

    def __len__(self) -> int:
        return len(self.names)

    def __getitem__(self, i):
        return self.inputs[i], self.targets[i]


def patch_sampler(pairs, patch: int, flips: bool = True, seed: int = 0, start_epoch: int = 0) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Endless stream of aligned (degraded, clean) crops.

    Epoch ``e`` draws its permutation, crops and flips from a generator seeded
    with ``(seed, e)``, so the sequence depends only on the seed.
    """
    if patch % 8:
        raise InputError(f"patch size {patch} must be divisible by 8")
    for deg, _ in (pairs[i] for i in range(len(pairs))):
        if patch > min(deg.shape[:2]):
            raise InputError(f"patch {patch} larger than image {deg.shape[:2]}")
    epoch = start_epoch
    while True:
        rng = np.random.default_rng([seed, epoch])
        for i in rng.permutation(len(pairs)):
            deg, clean = pairs[int(i)]
            h, w = deg.shape[:2]
            top = int(rng.integers(0, h - patch + 1))
            left = int(rng.integers(0, w - patch + 1))
            hflip, vflip = rng.random(2) < 0.5
            a = deg[top : top + patch, left : left + patch]
            b = clean[top : top + patch, left : left + patch]
            if flips and hflip:
                a, b = a[:, ::-1], b[:, ::-1]
            if flips and vflip:
                a, b = a[::-1], b[::-1]
            yield np.ascontiguousarray(a), np.ascontiguousarray(b)
        epoch += 1


def batch_stream(pairs, batch: int, patch: int, flips: bool = True, seed: int = 0, start_step: int = 0):
    """Batches of NCHW float32 arrays; ``start_step`` skips ahead for exact resumption."""
    samples = patch_sampler(pairs, patch, flips, seed)
    for _ in range(start_step * batch):
        next(samples)
    while True:
        items = [next(samples) for _ in range(batch)]
        deg = np.stack([a for a, _ in items]).transpose(0, 3, 1, 2)
        clean = np.stack([b for _, b in items]).transpose(0, 3, 1, 2)
        yield np.ascontiguousarray(deg, dtype=np.float32), np.ascontiguousarray(clean, dtype=np.float32)
