import json
import os

import numpy as np
import pytest

from draftnmt.checkpoint import (
    META_FILE,
    PARAMS_FILE,
    checkpoint_digest,
    load_checkpoint,
    save_checkpoint,
)
from draftnmt.decoding import greedy
from draftnmt.errors import CheckpointError
from draftnmt.models import forward_single, inherit

from test_models import _double, _single

TOKENS_SRC = [f"s{i}" for i in range(7)]
TOKENS_TGT = [f"t{i}" for i in range(9)]


def _save(path, model, **kw):
    args = dict(seed=3, step_count=17, src_tokens=TOKENS_SRC, tgt_tokens=TOKENS_TGT)
    args.update(kw)
    return save_checkpoint(path, model, **args)


def _file_bytes(path):
    with open(path, "rb") as f:
        return f.read()


def test_round_trip_restores_every_block(tmp_path):
    for model in (_single(seed=41), _double(seed=42)):
        path = tmp_path / model.kind
        _save(path, model)
        loaded, meta = load_checkpoint(path)
        assert meta["kind"] == model.kind
        for (name, orig), (name2, back) in zip(model.blocks(), loaded.blocks()):
            assert name == name2
            # float32 payload: the stored values are the cast of the originals
            assert np.array_equal(orig.data.astype(np.float32),
                                  back.data.astype(np.float32)), name


def test_save_load_save_is_byte_identical(tmp_path):
    model = _single(seed=43)
    first = tmp_path / "first"
    second = tmp_path / "second"
    _save(first, model)
    loaded, _ = load_checkpoint(first)
    _save(second, loaded)
    assert _file_bytes(first / META_FILE) == _file_bytes(second / META_FILE)
    assert _file_bytes(first / PARAMS_FILE) == _file_bytes(second / PARAMS_FILE)


def test_loaded_model_decodes_identically(tmp_path):
    model = _single(seed=44, dtype=np.float32)
    _save(tmp_path / "m", model)
    loaded, _ = load_checkpoint(tmp_path / "m")
    for src in ([4, 5, 6], [7], [8, 9, 4, 5]):
        a = greedy(model, src)
        b = greedy(loaded, src)
        assert a.tokens == b.tokens
        assert a.score == b.score  # bitwise, not approximate
        _, nll_a = forward_single(model, src, [5, 6])
        _, nll_b = forward_single(loaded, src, [5, 6])
        assert nll_a.item() == nll_b.item()


def test_meta_is_canonical_json(tmp_path):
    model = _single(seed=45)
    meta = _save(tmp_path / "m", model)
    raw = _file_bytes(tmp_path / "m" / META_FILE)
    assert raw.endswith(b"\n")
    assert json.loads(raw) == json.loads(json.dumps(meta))
    # canonical form: sorted keys, no whitespace padding
    assert raw == json.dumps(json.loads(raw), sort_keys=True,
                             separators=(",", ":")).encode() + b"\n"


def test_meta_records_vocab_and_freeze_state(tmp_path):
    stage1 = _single(seed=46)
    stage2 = inherit(stage1, seed=1)
    meta = _save(tmp_path / "m", stage2, stage1_digest="ab" * 32)
    assert meta["frozen"] == ["draft_embed", "src_embed", "tgt_embed"]
    assert meta["src_tokens"] == TOKENS_SRC
    assert meta["tgt_tokens"] == TOKENS_TGT
    assert meta["stage1_digest"] == "ab" * 32
    loaded, _ = load_checkpoint(tmp_path / "m")
    assert loaded.frozen == {"draft_embed", "src_embed", "tgt_embed"}


def test_digest_tracks_content(tmp_path):
    model = _single(seed=47)
    _save(tmp_path / "a", model)
    _save(tmp_path / "b", model)
    assert checkpoint_digest(tmp_path / "a") == checkpoint_digest(tmp_path / "b")

    model.dec.proj.data[0, 0] += 1.0
    _save(tmp_path / "c", model)
    assert checkpoint_digest(tmp_path / "a") != checkpoint_digest(tmp_path / "c")
    assert len(checkpoint_digest(tmp_path / "a")) == 64


def test_load_rejects_missing_and_corrupt_files(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "nowhere")

    model = _single(seed=48)
    _save(tmp_path / "m", model)

    meta_path = tmp_path / "m" / META_FILE
    good = _file_bytes(meta_path)
    meta_path.write_bytes(b"{not json\n")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "m")
    meta_path.write_bytes(good)

    params_path = tmp_path / "m" / PARAMS_FILE
    params_path.write_bytes(_file_bytes(params_path)[:-8])
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "m")


def test_load_rejects_unknown_version_and_kind(tmp_path):
    model = _single(seed=49)
    _save(tmp_path / "m", model)
    meta_path = tmp_path / "m" / META_FILE

    doc = json.loads(_file_bytes(meta_path))
    doc["format_version"] = 99
    meta_path.write_bytes(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode() + b"\n")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "m")

    doc["format_version"] = 1
    doc["kind"] = "triple"
    meta_path.write_bytes(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode() + b"\n")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "m")


def test_params_file_is_little_endian_float32(tmp_path):
    model = _single(seed=50, dtype=np.float32)
    _save(tmp_path / "m", model)
    raw = _file_bytes(tmp_path / "m" / PARAMS_FILE)
    total = sum(t.data.size for _, t in model.blocks())
    assert len(raw) == 4 * total
    first_block = model.blocks()[0][1].data
    decoded = np.frombuffer(raw[:4 * first_block.size], dtype="<f4")
    assert np.array_equal(decoded.reshape(first_block.shape), first_block)
