"""GRU cell and bidirectional encoder producing annotation sequences.

The cell follows the standard reset/update/candidate formulation. All maps
use the row-vector convention (inputs are rows, weights are [in x out]), so
the same code serves one sentence (rank-1 states) and a padded batch
(rank-2 states) unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

INIT_SCALE = 0.08


def uniform_init(rng: np.random.Generator, shape, dtype) -> Tensor:
    data = rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape).astype(dtype)
    return Tensor(data, requires_grad=True, dtype=dtype)


@dataclass
class GruParams:
    """Nine tensors: update gate, reset gate, candidate; each (input map, state map, bias)."""

    w_z: Tensor
    u_z: Tensor
    b_z: Tensor
    w_r: Tensor
    u_r: Tensor
    b_r: Tensor
    w_h: Tensor
    u_h: Tensor
    b_h: Tensor

    @classmethod
    def create(cls, rng: np.random.Generator, d_in: int, n: int, dtype) -> "GruParams":
        def w(shape):
            return uniform_init(rng, shape, dtype)

        return cls(
            w_z=w((d_in, n)), u_z=w((n, n)), b_z=w((n,)),
            w_r=w((d_in, n)), u_r=w((n, n)), b_r=w((n,)),
            w_h=w((d_in, n)), u_h=w((n, n)), b_h=w((n,)),
        )

    @property
    def d_in(self) -> int:
        return self.w_z.shape[0]

    @property
    def n(self) -> int:
        return self.w_z.shape[1]

    def blocks(self):
        return [
            ("w_z", self.w_z), ("u_z", self.u_z), ("b_z", self.b_z),
            ("w_r", self.w_r), ("u_r", self.u_r), ("b_r", self.b_r),
            ("w_h", self.w_h), ("u_h", self.u_h), ("b_h", self.b_h),
        ]


def gru_step(p: GruParams, x: Tensor, h_prev: Tensor) -> Tensor:
    """One GRU update; x is [d_in] or [B x d_in], h_prev is [n] or [B x n]."""
    if x.shape[-1] != p.d_in or h_prev.shape[-1] != p.n:
        raise ValueError(
            f"gru_step: input width {x.shape[-1]} / state width {h_prev.shape[-1]} "
            f"do not match parameters ({p.d_in}, {p.n})"
        )
    z = ad.sigmoid((x @ p.w_z) + (h_prev @ p.u_z) + p.b_z)
    r = ad.sigmoid((x @ p.w_r) + (h_prev @ p.u_r) + p.b_r)
    h_cand = ad.tanh((x @ p.w_h) + ((r * h_prev) @ p.u_h) + p.b_h)
    return (1.0 - z) * h_prev + z * h_cand


@dataclass
class AnnotationSequence:
    """Annotations for one sentence: h_i = [forward state ; backward state]."""

    vectors: list  # T tensors, each [2n]

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def width(self) -> int:
        return self.vectors[0].shape[-1]


def encode_bidirectional(embedded, fwd: GruParams, bwd: GruParams) -> AnnotationSequence:
    """Encode one embedded sentence; both directions start from zero states."""
    embedded = list(embedded)
    if not embedded:
        raise ValueError("encode_bidirectional: empty input")
    if fwd.n != bwd.n:
        raise ValueError(f"encode_bidirectional: state widths differ ({fwd.n} vs {bwd.n})")
    n = fwd.n
    dtype = fwd.w_z.dtype
    zero = Tensor(np.zeros(n, dtype=dtype), dtype=dtype)

    h = zero
    forward = []
    for x in embedded:
        h = gru_step(fwd, x, h)
        forward.append(h)

    h = zero
    backward = [None] * len(embedded)
    for t in range(len(embedded) - 1, -1, -1):
        h = gru_step(bwd, embedded[t], h)
        backward[t] = h

    return AnnotationSequence([ad.concat(f, b) for f, b in zip(forward, backward)])


@dataclass
class AnnotationBatch:
    """Annotations for a padded batch, stacked so each sentence is contiguous.

    Row b*length + t of ``stacked`` holds annotation t of batch entry b.
    ``pad_bias`` is 0 at real positions and -1e30 at padding, ready to add to
    attention energies. ``bwd_first`` is the backward state at position 0,
    i.e. the backward-direction summary of the whole sentence.
    """

    stacked: Tensor  # [(B*length) x 2n]
    batch: int
    length: int
    pad_bias: np.ndarray  # [B x length]
    bwd_first: Tensor  # [B x n]


def encode_batch(embed_table: Tensor, ids: np.ndarray, mask: np.ndarray,
                 fwd: GruParams, bwd: GruParams) -> AnnotationBatch:
    """Encode a right-padded id matrix [B x T] with per-position mask.

    Masked positions freeze the recurrent state: the forward state carries
    the last real value onward, and the backward state stays zero until the
    first real token from the right. Attention must still skip padded rows,
    which pad_bias arranges.
    """
    batch, length = ids.shape
    if length == 0:
        raise ValueError("encode_batch: empty input")
    n = fwd.n
    dtype = fwd.w_z.dtype
    mask = mask.astype(dtype)
    mcols = [Tensor(mask[:, t][:, None], dtype=dtype) for t in range(length)]
    inv_mcols = [Tensor((1.0 - mask[:, t])[:, None], dtype=dtype) for t in range(length)]
    xs = [ad.gather_rows(embed_table, ids[:, t]) for t in range(length)]

    zero = Tensor(np.zeros((batch, n), dtype=dtype), dtype=dtype)
    h = zero
    forward = []
    for t in range(length):
        g = gru_step(fwd, xs[t], h)
        h = mcols[t] * g + inv_mcols[t] * h
        forward.append(h)

    h = zero
    backward = [None] * length
    for t in range(length - 1, -1, -1):
        g = gru_step(bwd, xs[t], h)
        h = mcols[t] * g + inv_mcols[t] * h
        backward[t] = h

    steps = [ad.concat_cols(f, b) for f, b in zip(forward, backward)]
    stacked = ad.stack_steps(steps)
    pad_bias = np.where(mask > 0, 0.0, -1e30).astype(dtype)
    return AnnotationBatch(stacked=stacked, batch=batch, length=length,
                           pad_bias=pad_bias, bwd_first=backward[0])
