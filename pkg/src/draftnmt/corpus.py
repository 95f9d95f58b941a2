"""Synthetic parallel corpora and the TAB-separated corpus file format.

Three generator tasks, in increasing order of required context:
  copy       target repeats the source
  reversal   target is the source read backwards
  agreement  target is the source plus one closing token chosen by the
             parity of the sum of all source token ids, so the correct
             closer depends on the whole sentence

File records are one line each, fields separated by a single TAB: source,
target, and (for refinement corpora) draft. Tokens are space-separated
inside a field. A draft field may be empty; source and target may not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CorpusError
from .vocab import RESERVED, Vocabulary

TASKS = ("copy", "reversal", "agreement")


def synthetic_vocabulary(vocab_size: int) -> Vocabulary:
    """Tokens named after their own ids, w4 through w{vocab_size-1}."""
    if vocab_size <= len(RESERVED):
        raise CorpusError(f"vocabulary size must exceed {len(RESERVED)}, got {vocab_size}")
    return Vocabulary([f"w{i}" for i in range(len(RESERVED), vocab_size)])


@dataclass
class ParallelCorpus:
    task: str
    seed_label: str
    records: list  # (src tokens, tgt tokens) or (src, tgt, draft), token lists

    def __len__(self) -> int:
        return len(self.records)


def generate(task: str, count: int, length_range, vocab_size: int, seed) -> ParallelCorpus:
    """Sample a synthetic corpus; equal seeds give identical corpora."""
    if task not in TASKS:
        raise CorpusError(f"unknown task {task!r}; expected one of {', '.join(TASKS)}")
    if count < 1:
        raise CorpusError(f"corpus size must be >= 1, got {count}")
    lo, hi = length_range
    if lo < 1 or hi < lo:
        raise CorpusError(f"invalid length range ({lo}, {hi})")
    reserved = len(RESERVED)
    if task == "agreement":
        if vocab_size < reserved + 3:
            raise CorpusError(
                f"agreement needs at least {reserved + 3} vocabulary entries, got {vocab_size}"
            )
        content_ids = np.arange(reserved, vocab_size - 2)
        even_closer, odd_closer = f"w{vocab_size - 2}", f"w{vocab_size - 1}"
    else:
        if vocab_size <= reserved:
            raise CorpusError(f"vocabulary size must exceed {reserved}, got {vocab_size}")
        content_ids = np.arange(reserved, vocab_size)
    rng = np.random.default_rng(seed)
    records = []
    for _ in range(count):
        length = int(rng.integers(lo, hi + 1))
        ids = rng.choice(content_ids, size=length, replace=True)
        src = [f"w{i}" for i in ids]
        if task == "copy":
            tgt = list(src)
        elif task == "reversal":
            tgt = src[::-1]
        else:
            tgt = src + [even_closer if int(ids.sum()) % 2 == 0 else odd_closer]
        records.append((src, tgt))
    return ParallelCorpus(task=task, seed_label=str(seed), records=records)


def generate_splits(task: str, sizes, length_range, vocab_size: int, seed):
    """Train/dev/test corpora from disjoint seed streams spawned off one seed."""
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(len(sizes))
    return [generate(task, count, length_range, vocab_size, child)
            for count, child in zip(sizes, children)]


def write_corpus(path, records) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write("\t".join(" ".join(side) for side in record) + "\n")


def _split_field(text: str) -> list:
    return text.split(" ") if text else []


def read_corpus(path, expect_draft: bool | None = None) -> list:
    """Parse records; every line must carry the same field count (2 or 3)."""
    records = []
    arity = None
    try:
        f = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc
    with f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) not in (2, 3):
                raise CorpusError(f"{path}:{lineno}: expected 2 or 3 fields, got {len(fields)}")
            if arity is None:
                arity = len(fields)
            elif len(fields) != arity:
                raise CorpusError(f"{path}:{lineno}: inconsistent field count")
            sides = [_split_field(x) for x in fields]
            if not sides[0] or not sides[1]:
                raise CorpusError(f"{path}:{lineno}: empty source or target")
            records.append(tuple(sides))
    if not records:
        raise CorpusError(f"{path}: empty corpus")
    if expect_draft is not None and (arity == 3) != expect_draft:
        want = "with" if expect_draft else "without"
        raise CorpusError(f"{path}: expected records {want} a draft field")
    return records


def encode_records(records, src_vocab: Vocabulary, tgt_vocab: Vocabulary) -> list:
    """Token records to id records; drafts share the target vocabulary."""
    out = []
    for record in records:
        ids = [src_vocab.encode(record[0]), tgt_vocab.encode(record[1])]
        if len(record) == 3:
            ids.append(tgt_vocab.encode(record[2]))
        out.append(tuple(ids))
    return out
