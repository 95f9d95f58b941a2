import math

import numpy as np
import pytest

from draftnmt.autodiff import Tensor
from draftnmt.attention import (
    AttentionParams,
    BatchAttention,
    context,
    dual_context,
    energies,
    weights,
)
from draftnmt.encoder import AnnotationSequence, encode_batch

from test_encoder import _params as _gru_params


def _attn(rng, n, annot_width, a, scale=0.8):
    def t(*shape):
        return Tensor(rng.uniform(-scale, scale, size=shape),
                      requires_grad=True, dtype=np.float64)
    return AttentionParams(state_proj=t(n, a), annot_proj=t(annot_width, a),
                           score_vec=t(a))


def _annotations(rng, count, width):
    vecs = [Tensor(rng.normal(size=width), dtype=np.float64) for _ in range(count)]
    return AnnotationSequence(vecs)


def ref_energy(s, h, p):
    return float(np.tanh(s @ p.state_proj.data + h @ p.annot_proj.data) @ p.score_vec.data)


# ---------------------------------------------------------------- energies


def test_energies_match_scalar_reference():
    rng = np.random.default_rng(20)
    p = _attn(rng, 3, 6, 4)
    ann = _annotations(rng, 5, 6)
    s = Tensor(rng.normal(size=3), dtype=np.float64)
    e = energies(s, ann, p).data
    expected = [ref_energy(s.data, v.data, p) for v in ann.vectors]
    assert np.allclose(e, expected, atol=1e-12)


def test_energies_zero_score_vector_silences_everything():
    rng = np.random.default_rng(21)
    p = _attn(rng, 3, 6, 4)
    p.score_vec.data[:] = 0.0
    ann = _annotations(rng, 4, 6)
    e = energies(Tensor(np.zeros(3), dtype=np.float64), ann, p).data
    assert np.allclose(e, 0.0, atol=1e-15)


def test_energies_identical_annotations_get_identical_scores():
    rng = np.random.default_rng(22)
    p = _attn(rng, 3, 6, 4)
    v = rng.normal(size=6)
    ann = AnnotationSequence([Tensor(v, dtype=np.float64) for _ in range(3)])
    e = energies(Tensor(rng.normal(size=3), dtype=np.float64), ann, p).data
    assert np.allclose(e, e[0], atol=1e-12)


# ---------------------------------------------------------------- weights


def test_weights_single_position_is_one():
    w = weights(Tensor(np.array([3.7]), dtype=np.float64)).data
    assert np.allclose(w, [1.0], atol=1e-15)


def test_weights_equal_energies_are_uniform():
    w = weights(Tensor(np.full(5, -2.0), dtype=np.float64)).data
    assert np.allclose(w, 0.2, atol=1e-12)


def test_weights_match_exponential_normalization():
    e = [1.0, 2.0, 3.0]
    exps = [math.exp(x) for x in e]
    expected = [x / sum(exps) for x in exps]
    w = weights(Tensor(np.array(e), dtype=np.float64)).data
    assert np.allclose(w, expected, atol=1e-12)


def test_weights_sum_to_one_and_ignore_shifts():
    rng = np.random.default_rng(23)
    for _ in range(50):
        e = rng.normal(size=7) * rng.uniform(0.1, 40.0)
        w = weights(Tensor(e, dtype=np.float64)).data
        assert abs(w.sum() - 1.0) < 1e-6
        shifted = weights(Tensor(e + 123.0, dtype=np.float64)).data
        assert np.allclose(w, shifted, atol=1e-6)


# ---------------------------------------------------------------- context


def test_context_one_hot_selects_annotation():
    rng = np.random.default_rng(24)
    ann = _annotations(rng, 4, 6)
    w = Tensor(np.array([0.0, 0.0, 1.0, 0.0]), dtype=np.float64)
    c = context(w, ann).data
    assert np.allclose(c, ann.vectors[2].data, atol=1e-12)


def test_context_uniform_weights_average():
    rng = np.random.default_rng(25)
    ann = _annotations(rng, 5, 6)
    w = Tensor(np.full(5, 0.2), dtype=np.float64)
    mean = np.mean([v.data for v in ann.vectors], axis=0)
    assert np.allclose(context(w, ann).data, mean, atol=1e-12)


def test_context_matches_accumulation_loop():
    rng = np.random.default_rng(26)
    ann = _annotations(rng, 6, 4)
    w = rng.uniform(0.0, 1.0, size=6)
    w /= w.sum()
    expected = np.zeros(4)
    for wi, v in zip(w, ann.vectors):
        expected += wi * v.data
    c = context(Tensor(w, dtype=np.float64), ann).data
    assert np.allclose(c, expected, atol=1e-12)


def test_identical_annotations_yield_that_annotation():
    rng = np.random.default_rng(27)
    p = _attn(rng, 3, 6, 4)
    v = rng.normal(size=6)
    ann = AnnotationSequence([Tensor(v, dtype=np.float64) for _ in range(5)])
    s = Tensor(rng.normal(size=3), dtype=np.float64)
    c = context(weights(energies(s, ann, p)), ann).data
    assert np.allclose(c, v, atol=1e-9)


def test_dual_context_orders_first_channel_first():
    c1 = Tensor(np.array([1.0, 2.0]), dtype=np.float64)
    c2 = Tensor(np.array([3.0, 4.0]), dtype=np.float64)
    assert np.allclose(dual_context(c1, c2).data, [1.0, 2.0, 3.0, 4.0])
    zero = Tensor(np.zeros(2), dtype=np.float64)
    assert np.allclose(dual_context(c1, zero).data, [1.0, 2.0, 0.0, 0.0])


# ---------------------------------------------------------------- batched form


def test_batch_attention_matches_single_sentence_ops():
    rng = np.random.default_rng(28)
    d, n, a = 3, 4, 5
    fwd = _gru_params(rng, d, n)
    bwd = _gru_params(rng, d, n)
    p = _attn(rng, n, 2 * n, a)
    table = Tensor(rng.normal(size=(9, d)), dtype=np.float64)
    sentences = [[4, 5, 6, 7], [8, 4], [7, 7, 7]]

    width = max(len(s) for s in sentences)
    ids = np.zeros((3, width), dtype=np.int64)
    mask = np.zeros((3, width), dtype=np.float64)
    for b, sent in enumerate(sentences):
        ids[b, :len(sent)] = sent
        mask[b, :len(sent)] = 1.0

    ann_batch = encode_batch(table, ids, mask, fwd, bwd)
    att = BatchAttention(ann_batch, p)
    s_prev = Tensor(rng.normal(size=(3, n)), dtype=np.float64)
    ctx, alpha = att.step(s_prev)
    assert ctx.data.shape == (3, 2 * n)
    assert alpha.data.shape == (3, width)

    from draftnmt.encoder import encode_bidirectional
    for b, sent in enumerate(sentences):
        embedded = [Tensor(table.data[i], dtype=np.float64) for i in sent]
        ann = encode_bidirectional(embedded, fwd, bwd)
        s = Tensor(s_prev.data[b], dtype=np.float64)
        w = weights(energies(s, ann, p))
        c = context(w, ann)
        assert np.allclose(ctx.data[b], c.data, atol=1e-10), b
        assert np.allclose(alpha.data[b, :len(sent)], w.data, atol=1e-10), b
        # padded positions receive exactly zero weight
        assert np.all(alpha.data[b, len(sent):] == 0.0), b


def test_batch_attention_weights_sum_to_one_over_real_positions():
    rng = np.random.default_rng(29)
    d, n, a = 2, 3, 3
    fwd = _gru_params(rng, d, n)
    bwd = _gru_params(rng, d, n)
    p = _attn(rng, n, 2 * n, a)
    table = Tensor(rng.normal(size=(8, d)), dtype=np.float64)
    ids = np.array([[4, 5, 6], [7, 0, 0]])
    mask = (ids != 0).astype(np.float64)
    att = BatchAttention(encode_batch(table, ids, mask, fwd, bwd), p)
    _, alpha = att.step(Tensor(rng.normal(size=(2, n)), dtype=np.float64))
    assert np.allclose(alpha.data.sum(axis=1), 1.0, atol=1e-9)
    assert alpha.data[1, 1] == 0.0 and alpha.data[1, 2] == 0.0


def test_energies_reject_width_mismatch():
    rng = np.random.default_rng(30)
    p = _attn(rng, 3, 6, 4)
    ann = _annotations(rng, 3, 8)  # wrong annotation width
    with pytest.raises(ValueError):
        energies(Tensor(np.zeros(3), dtype=np.float64), ann, p)
