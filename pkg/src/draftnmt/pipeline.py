"""End-to-end run: generate data, train both stages, decode, and report.

Phases, in order: generate-corpora, train-stage1, make-drafts, train-stage2,
translate-test, evaluate. Any failure aborts with the phase name. All
randomness (corpus sampling, both model initializations, both shuffle
streams) derives from the one configured seed, so a report can be re-derived
from its recorded configuration alone.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict

import numpy as np

from . import decoding
from .bleu import bleu_report
from .checkpoint import checkpoint_digest, save_checkpoint
from .config import RunConfig
from .corpus import encode_records, generate_splits, synthetic_vocabulary, write_corpus
from .errors import PhaseError, ToolkitError
from .models import SingleAttentionModel, inherit
from .training import train


def _phase(name: str, fn, log):
    if log:
        log(f"[phase] {name}")
    try:
        return fn()
    except PhaseError:
        raise
    except (ToolkitError, ValueError, OSError) as exc:
        raise PhaseError(f"{name}: {exc}") from exc


def _write_lines(path, lines) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for line in lines:
            f.write(line + "\n")


def _config_lines(config: RunConfig) -> list:
    return [f"{key}={value}" for key, value in asdict(config).items()]


def run_pipeline(config: RunConfig, log=None) -> dict:
    config.validate()
    out = config.out_dir
    os.makedirs(out, exist_ok=True)
    _write_lines(os.path.join(out, "config.txt"), _config_lines(config))
    corpus_seed, s1_init, s1_shuffle, s2_init, s2_shuffle = np.random.SeedSequence(config.seed).spawn(5)
    vocab = synthetic_vocabulary(config.vocab_size)

    def generate_phase():
        splits = generate_splits(config.task,
                                 (config.train_size, config.dev_size, config.test_size),
                                 (config.min_len, config.max_len),
                                 config.vocab_size, corpus_seed)
        for name, part in zip(("train", "dev", "test"), splits):
            write_corpus(os.path.join(out, f"{name}.tsv"), part.records)
        return splits

    train_c, dev_c, test_c = _phase("generate-corpora", generate_phase, log)
    train_ids = encode_records(train_c.records, vocab, vocab)
    dev_ids = encode_records(dev_c.records, vocab, vocab)
    test_ids = encode_records(test_c.records, vocab, vocab)

    def stage1_phase():
        model = SingleAttentionModel.create(len(vocab), len(vocab), config.d, config.n,
                                            config.a, config.r, seed=s1_init,
                                            dtype=config.dtype)
        tlog = train(model, train_ids, dev_ids, steps=config.steps_stage1,
                     batch_size=config.batch_size, learning_rate=config.learning_rate,
                     seed=s1_shuffle, clip_norm=config.clip_norm)
        save_checkpoint(os.path.join(out, "stage1"), model, seed=config.seed,
                        step_count=config.steps_stage1,
                        src_tokens=vocab.content_tokens, tgt_tokens=vocab.content_tokens)
        _write_lines(os.path.join(out, "stage1.log"), tlog.lines())
        return model, tlog

    model1, log1 = _phase("train-stage1", stage1_phase, log)

    def drafts_phase():
        def decode_set(ids, tokens):
            triples = []
            for (src_ids, _), (src_tok, tgt_tok) in zip(ids, tokens):
                best = decoding.beam(model1, src_ids, width=config.beam_width)[0]
                triples.append((src_tok, tgt_tok, vocab.decode(best.tokens)))
            return triples

        train_triples = decode_set(train_ids, train_c.records)
        dev_triples = decode_set(dev_ids, dev_c.records)
        write_corpus(os.path.join(out, "train.triples.tsv"), train_triples)
        write_corpus(os.path.join(out, "dev.triples.tsv"), dev_triples)
        return train_triples, dev_triples

    train_triples, dev_triples = _phase("make-drafts", drafts_phase, log)

    def stage2_phase():
        model = inherit(model1, seed=s2_init)
        tlog = train(model, encode_records(train_triples, vocab, vocab),
                     encode_records(dev_triples, vocab, vocab),
                     steps=config.steps_stage2, batch_size=config.batch_size,
                     learning_rate=config.learning_rate, seed=s2_shuffle,
                     clip_norm=config.clip_norm)
        save_checkpoint(os.path.join(out, "stage2"), model, seed=config.seed,
                        step_count=config.steps_stage2,
                        src_tokens=vocab.content_tokens, tgt_tokens=vocab.content_tokens,
                        stage1_digest=checkpoint_digest(os.path.join(out, "stage1")))
        _write_lines(os.path.join(out, "stage2.log"), tlog.lines())
        return model, tlog

    model2, log2 = _phase("train-stage2", stage2_phase, log)

    def translate_phase():
        stage1_texts = []
        refined_texts = []
        overlaps = []
        empty_drafts = 0
        for src_ids, _ in test_ids:
            beams = decoding.beam(model1, src_ids, width=config.beam_width)
            draft = beams[0]
            if not draft.tokens:
                empty_drafts += 1
            refined = decoding.beam(model2, src_ids, draft_ids=draft.tokens,
                                    width=config.beam_width)[0]
            if len(beams) >= 2:
                overlaps.append(decoding.prefix_overlap(beams))
            stage1_texts.append(vocab.decode(draft.tokens))
            refined_texts.append(vocab.decode(refined.tokens))
        _write_lines(os.path.join(out, "test.stage1.txt"),
                     [" ".join(t) for t in stage1_texts])
        _write_lines(os.path.join(out, "test.refined.txt"),
                     [" ".join(t) for t in refined_texts])
        return stage1_texts, refined_texts, overlaps, empty_drafts

    stage1_texts, refined_texts, overlaps, empty_drafts = _phase("translate-test", translate_phase, log)

    def evaluate_phase():
        refs = [record[1] for record in test_c.records]
        rep1 = bleu_report(stage1_texts, refs)
        rep2 = bleu_report(refined_texts, refs)
        overlap_stats = None
        if overlaps:
            overlap_stats = {"mean": float(np.mean(overlaps)),
                             "min": float(np.min(overlaps)),
                             "max": float(np.max(overlaps)),
                             "sentences": len(overlaps)}
        report = {
            "task": config.task,
            "seed": config.seed,
            "config": asdict(config),
            "stage1_bleu": rep1["bleu"],
            "two_stage_bleu": rep2["bleu"],
            "delta": rep2["bleu"] - rep1["bleu"],
            "stage1_report": rep1,
            "two_stage_report": rep2,
            "prefix_overlap": overlap_stats,
            "empty_drafts": empty_drafts,
            "stage1_best_val": log1.best_val,
            "stage2_best_val": log2.best_val,
            "stage1_digest": checkpoint_digest(os.path.join(out, "stage1")),
            "stage2_digest": checkpoint_digest(os.path.join(out, "stage2")),
        }
        with open(os.path.join(out, "report.json"), "w", encoding="utf-8") as f:
            json.dump(report, f, indent=2, sort_keys=True)
            f.write("\n")
        _write_lines(os.path.join(out, "report.txt"), report_lines(report))
        return report

    return _phase("evaluate", evaluate_phase, log)


def report_lines(report: dict) -> list:
    """Human-readable comparison table: baseline row, refinement row, margin."""
    lines = [
        f"task={report['task']} seed={report['seed']}",
        "system               BLEU",
        f"stage-1 baseline     {report['stage1_bleu']:.4f}",
        f"two-stage refined    {report['two_stage_bleu']:.4f}",
        f"delta                {report['delta']:+.4f}",
    ]
    overlap = report["prefix_overlap"]
    if overlap:
        lines.append(
            "prefix-overlap mean={mean:.4f} min={min:.4f} max={max:.4f} sentences={sentences}".format(**overlap)
        )
    else:
        lines.append("prefix-overlap unavailable (beam too narrow)")
    lines.append(f"empty-drafts {report['empty_drafts']}")
    return lines
