"""Skip-connection attention.

Every decoder level receives encoder features from all levels, aggregated
to its resolution, cross-attended against the bottleneck feature in both
directions and gated by per-channel scales that start at zero.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import torch
import torch.nn as nn

from .errors import ConfigError
from .primitives import LayerNorm2d, pointwise, resize


def token_attention(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor, beta: float) -> tuple[torch.Tensor, torch.Tensor]:
    """Softmax(Q K^T / beta) V over (B, N, C) token matrices; returns (output, weights)."""
    # scaling the N x C queries is cheaper than scaling the N x N logits
    attn = torch.softmax((q / beta) @ k.transpose(-2, -1), dim=-1)
    return attn @ v, attn


class BidirectionalCrossAttention(nn.Module):
    def __init__(self, c: int):
        super().__init__()
        self.norm_enc = LayerNorm2d(c)
        self.norm_mid = LayerNorm2d(c)
        self.query_enc = pointwise(c, c)
        self.query_mid = pointwise(c, c)
        self.value_enc = pointwise(c, c)
        self.value_mid = pointwise(c, c)
        self.lambda_low = nn.Parameter(torch.zeros(1, c, 1, 1))
        self.lambda_high = nn.Parameter(torch.zeros(1, c, 1, 1))
        self.beta = math.sqrt(c)

    def forward(self, xe: torch.Tensor, xm: torch.Tensor, return_attention: bool = False):
        if xe.shape != xm.shape:
            raise ConfigError(f"encoder/middle shapes differ: {tuple(xe.shape)} vs {tuple(xm.shape)}")
        ne, nm = self.norm_enc(xe), self.norm_mid(xm)

        def tokens(t: torch.Tensor) -> torch.Tensor:
            return t.flatten(2).transpose(1, 2)

        q_enc, q_mid = tokens(self.query_enc(ne)), tokens(self.query_mid(nm))
        v_enc, v_mid = tokens(self.value_enc(ne)), tokens(self.value_mid(nm))
        # keys are the other stream's queries
        mid_to_enc, a_me = token_attention(q_mid, q_enc, v_enc, self.beta)
        enc_to_mid, a_em = token_attention(q_enc, q_mid, v_mid, self.beta)

        def grid(t: torch.Tensor) -> torch.Tensor:
            return t.transpose(1, 2).reshape(xe.shape)

        out = self.lambda_low * grid(mid_to_enc) + self.lambda_high * grid(enc_to_mid)
        if return_attention:
            return out, (a_me, a_em)
        return out


class SCAM(nn.Module):
    def __init__(self, widths: Sequence[int], middle_width: int):
        super().__init__()
        self.widths = tuple(widths)
        total = sum(self.widths)
        self.aggregate = nn.ModuleList(pointwise(total, w, bias=False) for w in self.widths)
        self.middle_proj = nn.ModuleList(pointwise(middle_width, w) for w in self.widths)
        self.cross = nn.ModuleList(BidirectionalCrossAttention(w) for w in self.widths)

    def aggregate_encoder(self, feats: Sequence[torch.Tensor], level: int) -> torch.Tensor:
        """Resize every encoder level to ``level`` (0-based), concatenate, project to its width."""
        if not 0 <= level < len(self.widths):
            raise ConfigError(f"SCAM level {level} out of range 0..{len(self.widths) - 1}")
        size = feats[level].shape[-2:]
        return self.aggregate[level](torch.cat([resize(f, size) for f in feats], dim=1))

    def middle_at(self, middle: torch.Tensor, level: int, size) -> torch.Tensor:
        # the 1x1 projection commutes with bilinear resizing, so project at low resolution
        return resize(self.middle_proj[level](middle), size)

    def forward(self, feats: Sequence[torch.Tensor], middle: torch.Tensor) -> list[torch.Tensor]:
        out = []
        for level in range(len(self.widths)):
            xe = self.aggregate_encoder(feats, level)
            xm = self.middle_at(middle, level, xe.shape[-2:])
            out.append(self.cross[level](xe, xm))
        return out
