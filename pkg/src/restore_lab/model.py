"""Four-scale encoder-decoder with multi-input injection and multi-output heads."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import torch
import torch.nn as nn

from .errors import ConfigError, InputError, NumericError
from .msfm import MSFM
from .mssf import LocalBlock, MSSFBlock, path_kernels
from .primitives import conv3x3, downsample2, pointwise, simple_gate
from .scam import SCAM

SKIP_MODES = ("sum", "concat", "cgb", "scam")
LEVELS = 4
# residual heads start small so the untrained model stays close to the identity
HEAD_INIT_SCALE = 0.1


@dataclass
class ModelConfig:
    base_width: int = 16
    enc_blocks: tuple[int, ...] = (2, 2, 4, 6)
    middle_blocks: int = 6
    # indexed by level like enc_blocks; the deepest decoder stage runs first
    dec_blocks: tuple[int, ...] = (2, 2, 4, 6)
    mssf_branches: int = 2
    msfm_branches: tuple[tuple[int, int], ...] = ((4, 3), (4, 5))
    heads: int = 2
    skip_mode: str = "scam"
    multi_io: bool = True
    hsfs: bool = True

    def __post_init__(self):
        self.enc_blocks = tuple(int(n) for n in self.enc_blocks)
        self.dec_blocks = tuple(int(n) for n in self.dec_blocks)
        self.msfm_branches = tuple((int(g), int(k)) for g, k in self.msfm_branches)
        self.validate()

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(self.base_width * 2**i for i in range(LEVELS))

    def validate(self) -> None:
        if self.base_width < 1:
            raise ConfigError("base_width must be positive")
        if len(self.enc_blocks) != LEVELS or len(self.dec_blocks) != LEVELS:
            raise ConfigError(f"enc_blocks and dec_blocks need {LEVELS} entries")
        if min(self.enc_blocks + self.dec_blocks + (self.middle_blocks,)) < 0:
            raise ConfigError("block counts must be nonnegative")
        if self.skip_mode not in SKIP_MODES:
            raise ConfigError(f"skip_mode must be one of {SKIP_MODES}, got {self.skip_mode!r}")
        path_kernels(self.mssf_branches)
        n = len(self.msfm_branches)
        for w in self.widths:
            if w % 2:
                raise ConfigError(f"width {w} must be even for the gated convs")
            if not self.hsfs:
                continue
            if n == 0 or w % n:
                raise ConfigError(f"width {w} not divisible by {n} frequency branches")
            for g, k in self.msfm_branches:
                if (w // n) % g or (w // n) % self.heads or k % 2 == 0:
                    raise ConfigError(f"branch width {w // n} incompatible with groups={g}, heads={self.heads}, k={k}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["enc_blocks"] = list(self.enc_blocks)
        d["dec_blocks"] = list(self.dec_blocks)
        d["msfm_branches"] = [list(b) for b in self.msfm_branches]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


class HSFSBlock(nn.Module):
    """N spatial blocks, then a residual 1x1 -> MSFM -> 1x1 frequency selection path."""

    def __init__(self, c: int, n_blocks: int, mssf_branches: int = 2, msfm_branches=((4, 3), (4, 5)), heads: int = 2):
        super().__init__()
        self.blocks = nn.Sequential(*[MSSFBlock(c, mssf_branches) for _ in range(n_blocks)])
        self.pre = pointwise(c, c)
        self.msfm = MSFM(c, msfm_branches, heads)
        self.post = pointwise(c, c)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = self.blocks(x)
        return y + self.post(self.msfm(self.pre(y)))


class SFEBlock(nn.Module):
    """Shallow features from a low-resolution copy of the input image."""

    def __init__(self, cin: int, c: int):
        super().__init__()
        self.head = conv3x3(cin, c)
        self.gated = conv3x3(c, 2 * c)
        self.project = pointwise(c, c)

    def forward(self, img: torch.Tensor) -> torch.Tensor:
        return self.project(simple_gate(self.gated(self.head(img))))


class CrossGate(nn.Module):
    """Skip fusion where each stream is gated by a projection of the other."""

    def __init__(self, c: int):
        super().__init__()
        self.gate_enc = pointwise(c, c)
        self.gate_dec = pointwise(c, c)
        self.fuse = pointwise(2 * c, c)

    def forward(self, dec: torch.Tensor, enc: torch.Tensor) -> torch.Tensor:
        return self.fuse(torch.cat([dec * self.gate_enc(enc), enc * self.gate_dec(dec)], dim=1))


def make_pyramid(img: torch.Tensor, levels: int = LEVELS) -> list[torch.Tensor]:
    """Full-resolution image followed by repeated 2x2 averages."""
    scale = 2 ** (levels - 1)
    if img.shape[-2] % scale or img.shape[-1] % scale:
        raise InputError(f"image size {tuple(img.shape[-2:])} must be divisible by {scale}")
    out = [img]
    for _ in range(levels - 1):
        out.append(downsample2(out[-1]))
    return out


class LCDNet(nn.Module):
    def __init__(self, cfg: ModelConfig | None = None, in_channels: int = 3):
        super().__init__()
        cfg = cfg or ModelConfig()
        cfg.validate()
        self.cfg = cfg
        widths = cfg.widths
        self.widths = widths

        def stage(c: int, n: int) -> nn.Module:
            if cfg.hsfs:
                return HSFSBlock(c, n, cfg.mssf_branches, cfg.msfm_branches, cfg.heads)
            return nn.Sequential(*[LocalBlock(c) for _ in range(n)])

        self.intro = conv3x3(in_channels, widths[0])
        self.encoders = nn.ModuleList(stage(w, n) for w, n in zip(widths, cfg.enc_blocks))
        self.downs = nn.ModuleList(nn.Conv2d(w, 2 * w, 2, stride=2) for w in widths[:-1])
        if cfg.multi_io:
            self.sfe = nn.ModuleList(SFEBlock(in_channels, w) for w in widths[1:])
            self.inject = nn.ModuleList(conv3x3(2 * w, w) for w in widths[1:])
        self.middle = stage(widths[-1], cfg.middle_blocks)

        self.ups = nn.ModuleList(
            nn.Sequential(pointwise(2 * w, 4 * w, bias=False), nn.PixelShuffle(2)) for w in widths[:-1]
        )
        if cfg.skip_mode == "scam":
            self.scam = SCAM(widths, widths[-1])
        if cfg.skip_mode in ("scam", "concat"):
            self.skip_fuse = nn.ModuleList(pointwise(2 * w, w) for w in widths)
        elif cfg.skip_mode == "cgb":
            self.skip_fuse = nn.ModuleList(CrossGate(w) for w in widths)
        self.decoders = nn.ModuleList(stage(w, n) for w, n in zip(widths, cfg.dec_blocks))
        head_levels = widths if cfg.multi_io else widths[:1]
        self.heads = nn.ModuleList(conv3x3(w, in_channels) for w in head_levels)
        with torch.no_grad():
            for head in self.heads:
                head.weight.mul_(HEAD_INIT_SCALE)
                head.bias.mul_(HEAD_INIT_SCALE)

    def _fuse(self, level: int, dec: torch.Tensor, skip: torch.Tensor) -> torch.Tensor:
        mode = self.cfg.skip_mode
        if mode == "sum":
            return dec + skip
        if mode == "cgb":
            return self.skip_fuse[level](dec, skip)
        return self.skip_fuse[level](torch.cat([dec, skip], dim=1))

    def forward(self, img: torch.Tensor) -> list[torch.Tensor]:
        """Restored images from finest to coarsest (only the finest when multi-IO is off)."""
        if img.dim() != 4:
            raise InputError(f"expected a (B, C, H, W) batch, got shape {tuple(img.shape)}")
        inputs = make_pyramid(img)

        x = self.intro(img)
        feats = []
        for level, enc in enumerate(self.encoders):
            if level > 0:
                x = self.downs[level - 1](x)
                if self.cfg.multi_io:
                    x = self.inject[level - 1](torch.cat([x, self.sfe[level - 1](inputs[level])], dim=1))
            x = enc(x)
            feats.append(x)

        middle = self.middle(x)
        skips = self.scam(feats, middle) if self.cfg.skip_mode == "scam" else feats

        outputs: list[torch.Tensor] = [None] * len(self.heads)
        x = middle
        for level in reversed(range(LEVELS)):
            if level < LEVELS - 1:
                x = self.ups[level](x)
            x = self.decoders[level](self._fuse(level, x, skips[level]))
            if level < len(self.heads):
                outputs[level] = self.heads[level](x) + inputs[level]

        for level, out in enumerate(outputs):
            if not torch.isfinite(out).all():
                raise NumericError(f"non-finite values in restored output at level {level + 1}")
        return outputs

    def zero_heads(self) -> None:
        with torch.no_grad():
            for head in self.heads:
                head.weight.zero_()
                head.bias.zero_()
