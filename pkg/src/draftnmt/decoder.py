"""Decoder state update, readout distribution, and initial-state rules.

The decoder GRU consumes the previous target embedding concatenated with the
attention context. The readout is logits = tanh(s W_s + y W_y + c W_c + b) W_o
followed by log-softmax; there is no output-side bias.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .encoder import AnnotationSequence, GruParams, gru_step, uniform_init


@dataclass
class DecoderParams:
    gru: GruParams  # input width d + ctx, state width n
    state_out: Tensor  # [n x r]
    embed_out: Tensor  # [d x r]
    ctx_out: Tensor  # [ctx x r]
    out_bias: Tensor  # [r]
    proj: Tensor  # [r x V]

    @classmethod
    def create(cls, rng: np.random.Generator, d: int, n: int, ctx: int, r: int,
               vocab: int, dtype) -> "DecoderParams":
        return cls(
            gru=GruParams.create(rng, d + ctx, n, dtype),
            state_out=uniform_init(rng, (n, r), dtype),
            embed_out=uniform_init(rng, (d, r), dtype),
            ctx_out=uniform_init(rng, (ctx, r), dtype),
            out_bias=uniform_init(rng, (r,), dtype),
            proj=uniform_init(rng, (r, vocab), dtype),
        )

    @property
    def ctx_width(self) -> int:
        return self.ctx_out.shape[0]

    def blocks(self):
        out = [("gru." + name, t) for name, t in self.gru.blocks()]
        out += [("state_out", self.state_out), ("embed_out", self.embed_out),
                ("ctx_out", self.ctx_out), ("out_bias", self.out_bias),
                ("proj", self.proj)]
        return out


@dataclass
class DecoderState:
    hidden: Tensor  # [n] or [B x n]
    t: int = 0


def step(y_prev_embed: Tensor, s_prev: DecoderState, c: Tensor, p: DecoderParams) -> DecoderState:
    """s_t from the concatenated (previous embedding, context) input."""
    if y_prev_embed.ndim == 1:
        x = ad.concat(y_prev_embed, c)
    else:
        x = ad.concat_cols(y_prev_embed, c)
    return DecoderState(hidden=gru_step(p.gru, x, s_prev.hidden), t=s_prev.t + 1)


def readout(y_prev_embed: Tensor, s: Tensor, c: Tensor, p: DecoderParams) -> Tensor:
    """Log-probabilities over the target vocabulary; rows sum to one in probability."""
    if c.shape[-1] != p.ctx_width:
        raise ValueError(f"readout: context width {c.shape[-1]} does not match {p.ctx_width}")
    hidden = ad.tanh((s @ p.state_out) + (y_prev_embed @ p.embed_out) + (c @ p.ctx_out) + p.out_bias)
    return ad.log_softmax(hidden @ p.proj)


def _first_backward(ann: AnnotationSequence) -> Tensor:
    h1 = ann.vectors[0]
    width = h1.shape[-1]
    return ad.slice_cols(h1, width // 2, width)


def init_single(annotations: AnnotationSequence, init_proj: Tensor) -> DecoderState:
    """s_0 = tanh(backward half of the first annotation, mapped by init_proj)."""
    if len(annotations) == 0:
        raise ValueError("init_single: empty annotations")
    return DecoderState(hidden=ad.tanh(_first_backward(annotations) @ init_proj), t=0)


def init_double(c1: AnnotationSequence, c2: AnnotationSequence) -> DecoderState:
    """s_0 = average of the two first backward annotations; no learned parameters."""
    b1 = _first_backward(c1)
    b2 = _first_backward(c2)
    if b1.shape != b2.shape:
        raise ValueError(f"init_double: widths differ ({b1.shape} vs {b2.shape})")
    return DecoderState(hidden=0.5 * (b1 + b2), t=0)
