"""Additive alignment scoring, attention weights, and context vectors.

The scorer is e_i = v . tanh(W s_prev + U h_i). The decoder-state term
W s_prev is computed once per step and shared across positions; the
annotation term U h_i is computed once per sentence and shared across steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .encoder import AnnotationBatch, AnnotationSequence, uniform_init


@dataclass
class AttentionParams:
    state_proj: Tensor  # [n x a]
    annot_proj: Tensor  # [2n x a]
    score_vec: Tensor  # [a]

    @classmethod
    def create(cls, rng: np.random.Generator, n: int, annot_width: int, a: int, dtype) -> "AttentionParams":
        return cls(
            state_proj=uniform_init(rng, (n, a), dtype),
            annot_proj=uniform_init(rng, (annot_width, a), dtype),
            score_vec=uniform_init(rng, (a,), dtype),
        )

    @property
    def a(self) -> int:
        return self.score_vec.shape[0]

    def blocks(self):
        return [("state_proj", self.state_proj), ("annot_proj", self.annot_proj),
                ("score_vec", self.score_vec)]


def energies(s_prev: Tensor, annotations: AnnotationSequence, p: AttentionParams) -> Tensor:
    """Alignment energies of one decoder state against one sentence's annotations."""
    if s_prev.shape[-1] != p.state_proj.shape[0]:
        raise ValueError(
            f"energies: state width {s_prev.shape[-1]} does not match projection {p.state_proj.shape}"
        )
    if annotations.width != p.annot_proj.shape[0]:
        raise ValueError(
            f"energies: annotation width {annotations.width} does not match projection {p.annot_proj.shape}"
        )
    s_term = s_prev @ p.state_proj
    per_pos = [ad.tanh(s_term + (h @ p.annot_proj)) @ p.score_vec for h in annotations.vectors]
    return ad.stack_steps([e.reshape((1,)) for e in per_pos]).reshape((len(annotations),))


def weights(e: Tensor) -> Tensor:
    return ad.softmax(e)


def context(w: Tensor, annotations: AnnotationSequence) -> Tensor:
    if w.shape[-1] != len(annotations):
        raise ValueError(f"context: {w.shape[-1]} weights for {len(annotations)} annotations")
    stacked = ad.stack_steps([h.reshape((1, -1)) for h in annotations.vectors])
    return (w.reshape((1, -1)) @ stacked).reshape((annotations.width,))


def dual_context(c1: Tensor, c2: Tensor) -> Tensor:
    """Joint context [source context ; draft context]."""
    return ad.concat(c1, c2)


class BatchAttention:
    """Attention over one encoded batch, reusable across decoder steps.

    Precomputes the annotation projection once; per step only the state
    projection, scores, softmax, and weighted sum are evaluated.
    """

    def __init__(self, ann: AnnotationBatch, p: AttentionParams):
        self.ann = ann
        self.p = p
        self.proj = ann.stacked @ p.annot_proj  # [(B*T) x a]
        dtype = ann.stacked.dtype
        self.pad_bias = Tensor(ann.pad_bias, dtype=dtype)

    def step(self, s_prev: Tensor):
        """Context for a batch of decoder states; returns (context [B x 2n], weights [B x T])."""
        batch, length = self.ann.batch, self.ann.length
        s_term = ad.repeat_rows(s_prev @ self.p.state_proj, length)
        scores = ad.tanh(s_term + self.proj) @ self.p.score_vec  # [(B*T)]
        masked = scores.reshape((batch, length)) + self.pad_bias
        alpha = ad.softmax(masked)  # [B x T], exactly zero at padding
        ctx = ad.sum_blocks(alpha.reshape((batch * length, 1)) * self.ann.stacked, length)
        return ctx, alpha
