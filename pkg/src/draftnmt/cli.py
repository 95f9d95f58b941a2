"""Command-line front end.

Subcommands: train-stage1, make-drafts, train-stage2, translate, evaluate,
pipeline. Every configuration key is also a flag (same name), and flags win
over --config file values. Failures from known error classes print exactly
one line, ERROR <class>: <message>, and exit non-zero.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import decoding
from .bleu import bleu_report
from .checkpoint import checkpoint_digest, load_checkpoint, save_checkpoint
from .config import build_config, config_field_names
from .corpus import encode_records, read_corpus, synthetic_vocabulary, write_corpus
from .errors import ConfigError, CorpusError, ToolkitError, VocabularyMismatch
from .models import SingleAttentionModel, inherit
from .pipeline import report_lines, run_pipeline
from .training import train
from .vocab import Vocabulary


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value configuration file")
    for name in config_field_names():
        parser.add_argument(f"--{name}", dest=f"cfg_{name}", metavar="V")


def _config_from(args) -> "RunConfig":
    overrides = {}
    for name in config_field_names():
        value = getattr(args, f"cfg_{name}", None)
        if value is not None:
            overrides[name] = value
    return build_config(args.config, overrides)


def _check_tokens(records, src_vocab: Vocabulary, tgt_vocab: Vocabulary, path: str) -> None:
    """Reject corpora whose tokens the vocabularies do not know."""
    for record in records:
        vocabs = (src_vocab,) + (tgt_vocab,) * (len(record) - 1)
        for side, vocab in zip(record, vocabs):
            for token in side:
                if token not in vocab.token_to_id:
                    raise VocabularyMismatch(
                        f"{path}: token {token!r} is not in the vocabulary"
                    )


def _load_kind(path: str, kind: str):
    model, meta = load_checkpoint(path)
    if model.kind != kind:
        raise ConfigError(f"{path} holds a {model.kind}-attention model, expected {kind}")
    return model, meta


def _vocabs(meta) -> tuple:
    return Vocabulary(meta["src_tokens"]), Vocabulary(meta["tgt_tokens"])


def _read_token_lines(path: str) -> list:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return [line.rstrip("\n").split(" ") if line.rstrip("\n") else []
                    for line in f]
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc


def _emit(lines, out_path=None) -> None:
    for line in lines:
        print(line)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as f:
            for line in lines:
                f.write(line + "\n")


def cmd_train_stage1(args) -> int:
    config = _config_from(args)
    records = read_corpus(args.corpus, expect_draft=False)
    vocab = synthetic_vocabulary(config.vocab_size)
    _check_tokens(records, vocab, vocab, args.corpus)
    dev_records = []
    if args.dev:
        dev_records = read_corpus(args.dev, expect_draft=False)
        _check_tokens(dev_records, vocab, vocab, args.dev)
    init_seed, shuffle_seed = np.random.SeedSequence(config.seed).spawn(2)
    model = SingleAttentionModel.create(len(vocab), len(vocab), config.d, config.n,
                                        config.a, config.r, seed=init_seed,
                                        dtype=config.dtype)
    tlog = train(model, encode_records(records, vocab, vocab),
                 encode_records(dev_records, vocab, vocab) if dev_records else [],
                 steps=config.steps_stage1, batch_size=config.batch_size,
                 learning_rate=config.learning_rate, seed=shuffle_seed,
                 clip_norm=config.clip_norm)
    save_checkpoint(args.out, model, seed=config.seed, step_count=config.steps_stage1,
                    src_tokens=vocab.content_tokens, tgt_tokens=vocab.content_tokens)
    _emit(tlog.lines())
    print(f"checkpoint {args.out}")
    return 0


def cmd_make_drafts(args) -> int:
    config = _config_from(args)
    model, meta = _load_kind(args.ckpt, "single")
    src_vocab, tgt_vocab = _vocabs(meta)
    records = read_corpus(args.corpus, expect_draft=False)
    _check_tokens(records, src_vocab, tgt_vocab, args.corpus)
    triples = []
    for src_tok, tgt_tok in records:
        if args.gold_draft:
            draft = list(tgt_tok)
        else:
            best = decoding.beam(model, src_vocab.encode(src_tok), width=config.beam_width)[0]
            draft = tgt_vocab.decode(best.tokens)
        triples.append((src_tok, tgt_tok, draft))
    write_corpus(args.out, triples)
    print(f"drafts {args.out} lines={len(triples)}")
    return 0


def cmd_train_stage2(args) -> int:
    config = _config_from(args)
    stage1, meta1 = _load_kind(args.stage1, "single")
    src_vocab, tgt_vocab = _vocabs(meta1)
    records = read_corpus(args.corpus, expect_draft=True)
    _check_tokens(records, src_vocab, tgt_vocab, args.corpus)
    dev_records = []
    if args.dev:
        dev_records = read_corpus(args.dev, expect_draft=True)
        _check_tokens(dev_records, src_vocab, tgt_vocab, args.dev)
    init_seed, shuffle_seed = np.random.SeedSequence(config.seed).spawn(2)
    model = inherit(stage1, seed=init_seed)
    tlog = train(model, encode_records(records, src_vocab, tgt_vocab),
                 encode_records(dev_records, src_vocab, tgt_vocab) if dev_records else [],
                 steps=config.steps_stage2, batch_size=config.batch_size,
                 learning_rate=config.learning_rate, seed=shuffle_seed,
                 clip_norm=config.clip_norm)
    save_checkpoint(args.out, model, seed=config.seed, step_count=config.steps_stage2,
                    src_tokens=meta1["src_tokens"], tgt_tokens=meta1["tgt_tokens"],
                    stage1_digest=checkpoint_digest(args.stage1))
    _emit(tlog.lines())
    print(f"checkpoint {args.out}")
    return 0


def cmd_translate(args) -> int:
    config = _config_from(args)
    if len(args.ckpt) not in (1, 2):
        raise ConfigError("translate takes one or two --ckpt directories")
    if len(args.ckpt) == 1:
        model, meta = _load_kind(args.ckpt[0], "single")
        src_vocab, tgt_vocab = _vocabs(meta)
        lines = []
        for tokens in _read_token_lines(args.input):
            best = decoding.beam(model, src_vocab.encode(tokens), width=config.beam_width)[0]
            lines.append(" ".join(tgt_vocab.decode(best.tokens)))
    else:
        stage1, meta1 = _load_kind(args.ckpt[0], "single")
        stage2, meta2 = _load_kind(args.ckpt[1], "double")
        if meta1["src_tokens"] != meta2["src_tokens"] or meta1["tgt_tokens"] != meta2["tgt_tokens"]:
            raise VocabularyMismatch("the two checkpoints carry different vocabularies")
        src_vocab, tgt_vocab = _vocabs(meta1)
        lines = []
        for tokens in _read_token_lines(args.input):
            draft, refined = decoding.two_stage_translate(
                stage1, stage2, src_vocab.encode(tokens), width=config.beam_width)
            lines.append(" ".join(tgt_vocab.decode(draft.tokens)) + "\t"
                         + " ".join(tgt_vocab.decode(refined.tokens)))
    _emit(lines, args.out)
    return 0


def cmd_evaluate(args) -> int:
    hyps = _read_token_lines(args.hyp)
    refs = _read_token_lines(args.ref)
    if len(hyps) != len(refs):
        raise CorpusError(f"line counts differ: {len(hyps)} hypotheses, {len(refs)} references")
    report = bleu_report(hyps, refs)
    print(f"BLEU {report['bleu']:.4f}")
    for n, p in enumerate(report["precisions"], start=1):
        print(f"precision-{n} {p:.4f}")
    print(f"brevity-penalty {report['brevity_penalty']:.4f}")
    print(f"lengths hyp={report['hypothesis_length']} ref={report['reference_length']}")
    return 0


def cmd_pipeline(args) -> int:
    config = _config_from(args)
    report = run_pipeline(config, log=print)
    for line in report_lines(report):
        print(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="draftnmt",
        description="Two-stage draft-and-refine translation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-stage1", help="train the one-pass attention model")
    _add_config_flags(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--dev")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train_stage1)

    p = sub.add_parser("make-drafts", help="decode a corpus into draft triples")
    _add_config_flags(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gold-draft", action="store_true",
                   help="use the reference as the draft field")
    p.set_defaults(fn=cmd_make_drafts)

    p = sub.add_parser("train-stage2", help="train the refinement model on triples")
    _add_config_flags(p)
    p.add_argument("--stage1", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--dev")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train_stage2)

    p = sub.add_parser("translate", help="decode plain sentences")
    _add_config_flags(p)
    p.add_argument("--ckpt", action="append", required=True,
                   help="checkpoint directory; give twice for draft + refinement")
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_translate)

    p = sub.add_parser("evaluate", help="corpus BLEU of hypothesis vs reference files")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("pipeline", help="run all phases end to end")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ToolkitError as exc:
        message = str(exc).replace("\n", " ")
        print(f"ERROR {exc.code}: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
