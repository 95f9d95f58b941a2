"""Model composition: the one-pass attention translator (stage 1) and the
draft-refining double-attention translator (stage 2).

Two forward implementations coexist on purpose. The per-sentence functions
(`forward_single`, `forward_double`) walk the annotation list step by step
and exist to be read and cross-checked; the batched path (`batched_logps`)
stacks sentences into rank-2 tensors for training throughput. Tests assert
the two agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import attention as attn_ops
from . import autodiff as ad
from . import decoder as dec_ops
from .attention import AttentionParams, BatchAttention
from .autodiff import Tensor
from .decoder import DecoderParams
from .encoder import AnnotationBatch, GruParams, encode_batch, encode_bidirectional, gru_step, uniform_init
from .vocab import BOS_ID, EOS_ID, PAD_ID


def encoder_input(ids) -> list:
    """Encoder-side id sequence: content ids plus a final end-of-sequence id.

    An empty sequence therefore encodes as the single end-of-sequence token,
    which is how an empty draft reaches the refinement model.
    """
    return list(ids) + [EOS_ID]


def _embed_rows(table: Tensor, ids) -> list:
    return [ad.gather_row(table, int(i)) for i in ids]


@dataclass
class SingleAttentionModel:
    src_embed: Tensor
    tgt_embed: Tensor
    enc_fwd: GruParams
    enc_bwd: GruParams
    attn: AttentionParams
    init_proj: Tensor
    dec: DecoderParams
    frozen: set = field(default_factory=set)

    kind = "single"

    @classmethod
    def create(cls, v_src: int, v_tgt: int, d: int, n: int, a: int, r: int,
               seed: int, dtype=np.float32) -> "SingleAttentionModel":
        rng = np.random.default_rng(seed)
        return cls(
            src_embed=uniform_init(rng, (v_src, d), dtype),
            tgt_embed=uniform_init(rng, (v_tgt, d), dtype),
            enc_fwd=GruParams.create(rng, d, n, dtype),
            enc_bwd=GruParams.create(rng, d, n, dtype),
            attn=AttentionParams.create(rng, n, 2 * n, a, dtype),
            init_proj=uniform_init(rng, (n, n), dtype),
            dec=DecoderParams.create(rng, d, n, 2 * n, r, v_tgt, dtype),
        )

    @property
    def d(self) -> int:
        return self.src_embed.shape[1]

    @property
    def n(self) -> int:
        return self.enc_fwd.n

    @property
    def a(self) -> int:
        return self.attn.a

    @property
    def r(self) -> int:
        return self.dec.state_out.shape[1]

    @property
    def v_src(self) -> int:
        return self.src_embed.shape[0]

    @property
    def v_tgt(self) -> int:
        return self.tgt_embed.shape[0]

    @property
    def dtype(self):
        return self.src_embed.dtype

    def blocks(self):
        out = [("src_embed", self.src_embed), ("tgt_embed", self.tgt_embed)]
        out += [("enc_fwd." + k, t) for k, t in self.enc_fwd.blocks()]
        out += [("enc_bwd." + k, t) for k, t in self.enc_bwd.blocks()]
        out += [("attn." + k, t) for k, t in self.attn.blocks()]
        out.append(("init_proj", self.init_proj))
        out += [("dec." + k, t) for k, t in self.dec.blocks()]
        return out

    def readout_blocks(self):
        return [self.dec.state_out, self.dec.embed_out, self.dec.ctx_out,
                self.dec.out_bias, self.dec.proj]

    # batched channel plumbing

    def encode_channels(self, src: np.ndarray, draft: np.ndarray | None = None) -> list[AnnotationBatch]:
        if draft is not None:
            raise ValueError("single-attention model takes no draft sequence")
        return [encode_batch(self.src_embed, src, src != PAD_ID,
                             self.enc_fwd, self.enc_bwd)]

    def attention_channels(self, anns) -> list[BatchAttention]:
        return [BatchAttention(anns[0], self.attn)]

    def initial_state(self, anns) -> Tensor:
        return ad.tanh(anns[0].bwd_first @ self.init_proj)


@dataclass
class DoubleAttentionModel:
    src_embed: Tensor
    draft_embed: Tensor
    tgt_embed: Tensor
    enc1_fwd: GruParams
    enc1_bwd: GruParams
    enc2_fwd: GruParams
    enc2_bwd: GruParams
    attn1: AttentionParams
    attn2: AttentionParams
    dec: DecoderParams
    frozen: set = field(default_factory=set)

    kind = "double"

    @classmethod
    def create(cls, v_src: int, v_tgt: int, d: int, n: int, a: int, r: int,
               seed: int, dtype=np.float32) -> "DoubleAttentionModel":
        rng = np.random.default_rng(seed)
        return cls(
            src_embed=uniform_init(rng, (v_src, d), dtype),
            draft_embed=uniform_init(rng, (v_tgt, d), dtype),
            tgt_embed=uniform_init(rng, (v_tgt, d), dtype),
            enc1_fwd=GruParams.create(rng, d, n, dtype),
            enc1_bwd=GruParams.create(rng, d, n, dtype),
            enc2_fwd=GruParams.create(rng, d, n, dtype),
            enc2_bwd=GruParams.create(rng, d, n, dtype),
            attn1=AttentionParams.create(rng, n, 2 * n, a, dtype),
            attn2=AttentionParams.create(rng, n, 2 * n, a, dtype),
            dec=DecoderParams.create(rng, d, n, 4 * n, r, v_tgt, dtype),
        )

    @property
    def d(self) -> int:
        return self.src_embed.shape[1]

    @property
    def n(self) -> int:
        return self.enc1_fwd.n

    @property
    def a(self) -> int:
        return self.attn1.a

    @property
    def r(self) -> int:
        return self.dec.state_out.shape[1]

    @property
    def v_src(self) -> int:
        return self.src_embed.shape[0]

    @property
    def v_tgt(self) -> int:
        return self.tgt_embed.shape[0]

    @property
    def dtype(self):
        return self.src_embed.dtype

    def blocks(self):
        out = [("src_embed", self.src_embed), ("draft_embed", self.draft_embed),
               ("tgt_embed", self.tgt_embed)]
        out += [("enc1_fwd." + k, t) for k, t in self.enc1_fwd.blocks()]
        out += [("enc1_bwd." + k, t) for k, t in self.enc1_bwd.blocks()]
        out += [("enc2_fwd." + k, t) for k, t in self.enc2_fwd.blocks()]
        out += [("enc2_bwd." + k, t) for k, t in self.enc2_bwd.blocks()]
        out += [("attn1." + k, t) for k, t in self.attn1.blocks()]
        out += [("attn2." + k, t) for k, t in self.attn2.blocks()]
        out += [("dec." + k, t) for k, t in self.dec.blocks()]
        return out

    def readout_blocks(self):
        return [self.dec.state_out, self.dec.embed_out, self.dec.ctx_out,
                self.dec.out_bias, self.dec.proj]

    def encode_channels(self, src: np.ndarray, draft: np.ndarray | None = None) -> list[AnnotationBatch]:
        if draft is None:
            raise ValueError("double-attention model needs a draft sequence")
        c1 = encode_batch(self.src_embed, src, src != PAD_ID,
                          self.enc1_fwd, self.enc1_bwd)
        c2 = encode_batch(self.draft_embed, draft, draft != PAD_ID,
                          self.enc2_fwd, self.enc2_bwd)
        return [c1, c2]

    def attention_channels(self, anns) -> list[BatchAttention]:
        return [BatchAttention(anns[0], self.attn1), BatchAttention(anns[1], self.attn2)]

    def initial_state(self, anns) -> Tensor:
        return 0.5 * (anns[0].bwd_first + anns[1].bwd_first)


EMBED_BLOCKS = ("src_embed", "draft_embed", "tgt_embed")


def inherit(stage1: SingleAttentionModel, seed: int) -> DoubleAttentionModel:
    """Second-stage model initialized from a first-stage model.

    The source embedding table is copied as-is; the target table is copied
    to both the draft-side and output-side tables. All three copies are
    frozen for the whole of stage-2 training. Every other block is freshly
    initialized from the seed.
    """
    model = DoubleAttentionModel.create(stage1.v_src, stage1.v_tgt, stage1.d,
                                        stage1.n, stage1.a, stage1.r, seed,
                                        dtype=stage1.dtype)
    model.src_embed.data[...] = stage1.src_embed.data
    model.draft_embed.data[...] = stage1.tgt_embed.data
    model.tgt_embed.data[...] = stage1.tgt_embed.data
    model.frozen = set(EMBED_BLOCKS)
    return model


# ---------------------------------------------------------------------------
# batched teacher-forced forward


@dataclass
class PaddedBatch:
    """Right-padded id matrices for one training batch.

    ``src`` and ``draft`` rows already carry the trailing end-of-sequence id.
    ``tgt_in`` rows start with begin-of-sequence; ``tgt_out`` rows end with
    end-of-sequence; ``tgt_mask`` is 1 at real prediction positions
    (including the end-of-sequence one) and 0 at padding.
    """

    src: np.ndarray
    tgt_in: np.ndarray
    tgt_out: np.ndarray
    tgt_mask: np.ndarray
    draft: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.src.shape[0]


def decoder_step(model, atts, s: Tensor, y_emb: Tensor):
    """One teacher-forced decoder step over a batch of rows.

    Returns (new state, logits, per-channel attention weights). Contexts of
    multiple channels are concatenated source-first.
    """
    ctxs = []
    alphas = []
    for att in atts:
        c, alpha = att.step(s)
        ctxs.append(c)
        alphas.append(alpha)
    c = ctxs[0]
    for extra in ctxs[1:]:
        c = ad.concat_cols(c, extra)
    x = ad.concat_cols(y_emb, c)
    s_new = gru_step(model.dec.gru, x, s)
    hidden = ad.tanh((s_new @ model.dec.state_out) + (y_emb @ model.dec.embed_out)
                     + (c @ model.dec.ctx_out) + model.dec.out_bias)
    return s_new, hidden @ model.dec.proj, alphas


def batched_logps(model, batch: PaddedBatch) -> Tensor:
    """Teacher-forced log-probabilities, flattened to [(B * T_out) x V].

    Row b * T_out + t holds the step-t distribution for batch entry b.
    """
    anns = model.encode_channels(batch.src, batch.draft)
    atts = model.attention_channels(anns)
    s = model.initial_state(anns)
    steps = []
    for t in range(batch.tgt_in.shape[1]):
        y_emb = ad.gather_rows(model.tgt_embed, batch.tgt_in[:, t])
        s, logits, _ = decoder_step(model, atts, s, y_emb)
        steps.append(logits)
    return ad.log_softmax(ad.stack_steps(steps))


# ---------------------------------------------------------------------------
# per-sentence forward (reference path)


def _check_ids(ids, vocab: int, side: str) -> None:
    for i in ids:
        if not 0 <= int(i) < vocab:
            raise ValueError(f"{side} id {i} out of range [0, {vocab})")


def forward_single(model: SingleAttentionModel, src_ids, tgt_ids, trace: dict | None = None):
    """Teacher-forced pass over one sentence pair.

    Returns (per-step log-probability tensors, summed negative log-likelihood).
    The prediction steps cover every target token plus the final
    end-of-sequence emission.
    """
    _check_ids(src_ids, model.v_src, "source")
    _check_ids(tgt_ids, model.v_tgt, "target")
    ann = encode_bidirectional(_embed_rows(model.src_embed, encoder_input(src_ids)),
                               model.enc_fwd, model.enc_bwd)
    state = dec_ops.init_single(ann, model.init_proj)
    return _run_steps(model, [(ann, model.attn)], state, tgt_ids, trace)


def forward_double(model: DoubleAttentionModel, src_ids, draft_ids, tgt_ids,
                   trace: dict | None = None):
    """Teacher-forced pass over one (source, draft, target) triple."""
    _check_ids(src_ids, model.v_src, "source")
    _check_ids(draft_ids, model.v_tgt, "draft")
    _check_ids(tgt_ids, model.v_tgt, "target")
    c1 = encode_bidirectional(_embed_rows(model.src_embed, encoder_input(src_ids)),
                              model.enc1_fwd, model.enc1_bwd)
    c2 = encode_bidirectional(_embed_rows(model.draft_embed, encoder_input(draft_ids)),
                              model.enc2_fwd, model.enc2_bwd)
    state = dec_ops.init_double(c1, c2)
    return _run_steps(model, [(c1, model.attn1), (c2, model.attn2)], state, tgt_ids, trace)


def _run_steps(model, channels, state, tgt_ids, trace):
    y_in = [BOS_ID] + [int(i) for i in tgt_ids]
    y_out = [int(i) for i in tgt_ids] + [EOS_ID]
    logps = []
    nll = None
    for yi, yo in zip(y_in, y_out):
        y_emb = ad.gather_row(model.tgt_embed, yi)
        ctxs = []
        step_energies = []
        for ann, params in channels:
            e = attn_ops.energies(state.hidden, ann, params)
            step_energies.append(np.array(e.data))
            alpha = attn_ops.weights(e)
            ctxs.append(attn_ops.context(alpha, ann))
        if trace is not None:
            trace.setdefault("energies", []).append(step_energies)
        c = ctxs[0] if len(ctxs) == 1 else attn_ops.dual_context(ctxs[0], ctxs[1])
        state = dec_ops.step(y_emb, state, c, model.dec)
        lp = dec_ops.readout(y_emb, state.hidden, c, model.dec)
        logps.append(lp)
        term = ad.pick(lp.reshape((1, -1)), [yo])
        nll = term if nll is None else nll + term
    return logps, neg_sum(nll)


def neg_sum(t: Tensor) -> Tensor:
    return ad.neg(t.sum())
