import numpy as np
import pytest

from draftnmt.corpus import (
    TASKS,
    encode_records,
    generate,
    generate_splits,
    read_corpus,
    synthetic_vocabulary,
    write_corpus,
)
from draftnmt.errors import CorpusError
from draftnmt.vocab import BOS_ID, EOS_ID, PAD_ID, UNK_ID, Vocabulary


# ---------------------------------------------------------------- vocabulary


def test_reserved_ids_are_fixed():
    assert (PAD_ID, BOS_ID, EOS_ID, UNK_ID) == (0, 1, 2, 3)
    v = Vocabulary(["apple", "pear"])
    assert v.encode(["<pad>", "<s>", "</s>", "<unk>"]) == [0, 1, 2, 3]
    assert v.encode(["apple", "pear"]) == [4, 5]


def test_vocabulary_round_trip():
    v = Vocabulary(["a", "b", "c"])
    assert v.decode(v.encode(["c", "a", "b"])) == ["c", "a", "b"]


def test_unknown_token_maps_to_unk():
    v = Vocabulary(["a"])
    assert v.encode(["mystery"]) == [UNK_ID]
    assert v.decode([UNK_ID]) == ["<unk>"]


def test_decode_drops_structural_markers():
    v = Vocabulary(["a"])
    assert v.decode([BOS_ID, 4, EOS_ID, PAD_ID]) == ["a"]


def test_duplicate_content_token_rejected():
    with pytest.raises(ValueError):
        Vocabulary(["a", "a"])
    with pytest.raises(ValueError):
        Vocabulary(["<unk>"])


def test_decode_rejects_out_of_range_id():
    v = Vocabulary(["a"])
    with pytest.raises(ValueError):
        v.decode([5])


def test_synthetic_vocabulary_names():
    v = synthetic_vocabulary(8)
    assert v.content_tokens == ["w4", "w5", "w6", "w7"]
    assert v.encode(["w4"]) == [4]
    with pytest.raises(CorpusError):
        synthetic_vocabulary(4)


# ---------------------------------------------------------------- generation


def test_known_tasks():
    assert set(TASKS) == {"copy", "reversal", "agreement"}


def test_copy_task_repeats_source():
    corpus = generate("copy", 20, (2, 5), 10, seed=1)
    for src, tgt in corpus.records:
        assert tgt == src
        assert 2 <= len(src) <= 5


def test_reversal_task_mirrors_source():
    corpus = generate("reversal", 20, (2, 5), 10, seed=2)
    for src, tgt in corpus.records:
        assert tgt == src[::-1]


def test_agreement_task_appends_parity_closer():
    vocab_size = 12
    corpus = generate("agreement", 40, (2, 6), vocab_size, seed=3)
    for src, tgt in corpus.records:
        assert tgt[:-1] == src
        ids = [int(t[1:]) for t in src]
        assert all(4 <= i < vocab_size - 2 for i in ids)  # closers never in content
        expected = f"w{vocab_size - 2}" if sum(ids) % 2 == 0 else f"w{vocab_size - 1}"
        assert tgt[-1] == expected


def test_agreement_closer_tracks_single_token_change():
    # replacing one token flips the closer exactly when the parity flips
    vocab_size = 12
    corpus = generate("agreement", 1, (4, 4), vocab_size, seed=4)
    src, tgt = corpus.records[0]
    ids = [int(t[1:]) for t in src]
    bumped = ids.copy()
    bumped[0] += 1 if bumped[0] + 1 < vocab_size - 2 else -1
    flipped = f"w{vocab_size - 2}" if sum(bumped) % 2 == 0 else f"w{vocab_size - 1}"
    assert (flipped == tgt[-1]) == (sum(bumped) % 2 == sum(ids) % 2)


def test_generation_is_seed_deterministic():
    a = generate("agreement", 30, (2, 6), 10, seed=9)
    b = generate("agreement", 30, (2, 6), 10, seed=9)
    c = generate("agreement", 30, (2, 6), 10, seed=10)
    assert a.records == b.records
    assert a.records != c.records


def test_generate_splits_are_distinct():
    train, dev, test = generate_splits("copy", (50, 20, 20), (2, 6), 10, seed=5)
    assert len(train.records) == 50 and len(dev.records) == 20
    assert train.records[:20] != dev.records
    assert dev.records != test.records


def test_generate_rejects_bad_arguments():
    with pytest.raises(CorpusError):
        generate("typo", 5, (2, 3), 10, seed=1)
    with pytest.raises(CorpusError):
        generate("copy", 0, (2, 3), 10, seed=1)
    with pytest.raises(CorpusError):
        generate("copy", 5, (3, 2), 10, seed=1)
    with pytest.raises(CorpusError):
        generate("copy", 5, (0, 2), 10, seed=1)
    with pytest.raises(CorpusError):
        generate("agreement", 5, (2, 3), 6, seed=1)  # no room for both closers


# ---------------------------------------------------------------- files


def test_write_read_round_trip_pairs(tmp_path):
    path = tmp_path / "pairs.tsv"
    records = generate("copy", 10, (1, 4), 8, seed=6).records
    write_corpus(path, records)
    assert read_corpus(path) == records


def test_write_read_round_trip_triples(tmp_path):
    path = tmp_path / "triples.tsv"
    records = [(["w4", "w5"], ["w4"], ["w5", "w6"]),
               (["w6"], ["w7", "w7"], [])]  # empty draft field stays valid
    write_corpus(path, records)
    back = read_corpus(path, expect_draft=True)
    assert back == records


def test_read_corpus_rejects_mixed_arity(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("w4 w5\tw4\nw4\tw4\tw4\n", encoding="utf-8")
    with pytest.raises(CorpusError):
        read_corpus(path)


def test_read_corpus_rejects_empty_source_or_target(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("\tw4\n", encoding="utf-8")
    with pytest.raises(CorpusError):
        read_corpus(path)
    path.write_text("w4\t\n", encoding="utf-8")
    with pytest.raises(CorpusError):
        read_corpus(path)


def test_read_corpus_rejects_empty_file(tmp_path):
    path = tmp_path / "empty.tsv"
    path.write_text("", encoding="utf-8")
    with pytest.raises(CorpusError):
        read_corpus(path)


def test_read_corpus_checks_expected_draft_arity(tmp_path):
    path = tmp_path / "pairs.tsv"
    path.write_text("w4\tw5\n", encoding="utf-8")
    assert read_corpus(path, expect_draft=False) == [(["w4"], ["w5"])]
    with pytest.raises(CorpusError):
        read_corpus(path, expect_draft=True)


def test_read_corpus_rejects_single_field(tmp_path):
    path = tmp_path / "one.tsv"
    path.write_text("w4 w5\n", encoding="utf-8")
    with pytest.raises(CorpusError):
        read_corpus(path)


# ---------------------------------------------------------------- encoding


def test_encode_records_pairs_and_triples():
    src_vocab = Vocabulary(["x", "y"])
    tgt_vocab = Vocabulary(["p", "q", "r"])
    pairs = encode_records([(["x"], ["q"])], src_vocab, tgt_vocab)
    assert pairs == [([4], [5])]
    triples = encode_records([(["y"], ["p"], ["r", "q"])], src_vocab, tgt_vocab)
    assert triples == [([5], [4], [6, 5])]  # draft ids come from the target side


def test_encode_records_empty_draft():
    v = synthetic_vocabulary(8)
    out = encode_records([(["w4"], ["w5"], [])], v, v)
    assert out == [([4], [5], [])]
