"""Greedy and beam-search decoding, forced re-scoring, and beam diagnostics.

All decoding runs without gradient recording. Hypothesis token sequences
contain content ids only; the end-of-sequence emission that finishes a
hypothesis contributes to the score but not to the tokens.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .encoder import AnnotationBatch
from .models import decoder_step, encoder_input, forward_double, forward_single
from .vocab import BOS_ID, EOS_ID


@dataclass
class Hypothesis:
    tokens: list
    score: float
    finished: bool
    state: np.ndarray | None = field(default=None, repr=False)


def _max_len(src_ids, max_len: int | None) -> int:
    return max_len if max_len is not None else 2 * len(src_ids) + 5


class _Session:
    """One encoded sentence (and optional draft), attended by k decoder rows.

    The encoder runs once; per-row attention structures are tiled lazily for
    each live-hypothesis count the search passes through.
    """

    def __init__(self, model, src_ids, draft_ids=None):
        self.model = model
        if model.kind != "double" and draft_ids is not None:
            raise ValueError("draft sequence given to a model without a draft channel")
        with ad.no_grad():
            src = np.asarray([encoder_input(src_ids)], dtype=np.int64)
            draft = None
            if model.kind == "double":
                draft = np.asarray([encoder_input(draft_ids if draft_ids is not None else [])],
                                   dtype=np.int64)
            anns = model.encode_channels(src, draft)
            self.s0 = np.array(model.initial_state(anns).data)
        self._base = anns
        self._atts = {}

    def _rows(self, k: int):
        if k not in self._atts:
            with ad.no_grad():
                tiled = [AnnotationBatch(
                    stacked=Tensor(np.tile(a.stacked.data, (k, 1)), dtype=a.stacked.dtype),
                    batch=k, length=a.length,
                    pad_bias=np.tile(a.pad_bias, (k, 1)),
                    bwd_first=Tensor(np.tile(a.bwd_first.data, (k, 1)), dtype=a.bwd_first.dtype),
                ) for a in self._base]
                self._atts[k] = self.model.attention_channels(tiled)
        return self._atts[k]

    def step(self, states: np.ndarray, y_ids):
        """Advance k rows one step; returns (new states, log-probabilities [k x V])."""
        with ad.no_grad():
            atts = self._rows(states.shape[0])
            y_emb = ad.gather_rows(self.model.tgt_embed, np.asarray(y_ids, dtype=np.int64))
            s, logits, _ = decoder_step(self.model, atts, Tensor(states, dtype=states.dtype), y_emb)
            return np.array(s.data), np.array(ad.log_softmax(logits).data)


def greedy(model, src_ids, draft_ids=None, max_len: int | None = None) -> Hypothesis:
    """Argmax decoding; ties go to the lowest token id."""
    session = _Session(model, src_ids, draft_ids)
    cap = _max_len(src_ids, max_len)
    states = session.s0
    y_prev = BOS_ID
    tokens: list = []
    score = 0.0
    for _ in range(cap):
        states, logp = session.step(states, [y_prev])
        tok = int(np.argmax(logp[0]))
        score += float(logp[0, tok])
        if tok == EOS_ID:
            return Hypothesis(tokens, score, True, states[0])
        tokens.append(tok)
        y_prev = tok
    return Hypothesis(tokens, score, False, states[0])


def beam(model, src_ids, draft_ids=None, width: int = 5, max_len: int | None = None):
    """Beam search; returns hypotheses ranked by total log-probability.

    Each step extends every live hypothesis over the whole vocabulary and
    keeps the best ``width`` extensions; extensions that emit the
    end-of-sequence id are set aside as finished. The search stops once
    ``width`` hypotheses have finished or the length cap is reached. If
    nothing finished within the cap, the live hypotheses are returned
    unfinished.
    """
    if width < 1:
        raise ValueError(f"beam: width must be >= 1, got {width}")
    session = _Session(model, src_ids, draft_ids)
    cap = _max_len(src_ids, max_len)
    live = [Hypothesis([], 0.0, False, session.s0[0])]
    prev_ids = [BOS_ID]
    finished: list = []
    for _ in range(cap):
        states = np.stack([h.state for h in live])
        states, logp = session.step(states, prev_ids)
        vocab = logp.shape[1]
        cand = np.asarray([h.score for h in live], dtype=np.float64)[:, None] + logp
        flat = cand.reshape(-1)
        token_key = np.arange(flat.size) % vocab
        parent_key = np.arange(flat.size) // vocab
        order = np.lexsort((parent_key, token_key, -flat))
        next_live = []
        next_ids = []
        for idx in order[:width]:
            parent, tok = divmod(int(idx), vocab)
            h = live[parent]
            if tok == EOS_ID:
                finished.append(Hypothesis(h.tokens, float(flat[idx]), True, states[parent]))
            else:
                next_live.append(Hypothesis(h.tokens + [tok], float(flat[idx]), False, states[parent]))
                next_ids.append(tok)
        if len(finished) >= width or not next_live:
            break
        live = next_live
        prev_ids = next_ids
    pool = finished if finished else live
    return sorted(pool, key=lambda h: (-h.score, h.tokens))


def rescore(model, src_ids, hypothesis: Hypothesis, draft_ids=None) -> float:
    """Teacher-forced log-probability of a hypothesis's own token sequence.

    Computed along the per-sentence reference path, independently of the
    search that produced the hypothesis. Finished hypotheses include the
    final end-of-sequence emission; unfinished ones do not.
    """
    with ad.no_grad():
        if model.kind == "double":
            logps, _ = forward_double(model, src_ids, draft_ids if draft_ids is not None else [],
                                      hypothesis.tokens)
        else:
            logps, _ = forward_single(model, src_ids, hypothesis.tokens)
    steps = hypothesis.tokens + [EOS_ID] if hypothesis.finished else hypothesis.tokens
    return float(sum(float(lp.data[tok]) for lp, tok in zip(logps, steps)))


def prefix_overlap(hyps) -> float:
    """Mean over hypothesis pairs of shared-prefix length over shorter length.

    Two empty sequences are identical (fraction 1); an empty sequence against
    a non-empty one shares nothing (fraction 0).
    """
    hyps = list(hyps)
    if len(hyps) < 2:
        raise ValueError("prefix_overlap: need at least two hypotheses")
    fractions = []
    for i in range(len(hyps)):
        for j in range(i + 1, len(hyps)):
            a, b = hyps[i].tokens, hyps[j].tokens
            shorter = min(len(a), len(b))
            if shorter == 0:
                fractions.append(1.0 if len(a) == len(b) else 0.0)
                continue
            lcp = 0
            while lcp < shorter and a[lcp] == b[lcp]:
                lcp += 1
            fractions.append(lcp / shorter)
    return float(np.mean(fractions))


def two_stage_translate(stage1, stage2, src_ids, width: int = 5,
                        max_len: int | None = None):
    """Draft with the first-stage model, then refine attending to source and draft."""
    draft = beam(stage1, src_ids, width=width, max_len=max_len)[0]
    if not draft.tokens:
        warnings.warn("empty draft; refinement attends to a bare end-of-sequence draft")
    refined = beam(stage2, src_ids, draft_ids=draft.tokens, width=width, max_len=max_len)[0]
    return draft, refined
