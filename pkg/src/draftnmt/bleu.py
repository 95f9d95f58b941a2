"""Corpus-level BLEU-4 with brevity penalty, no smoothing.

Counts are aggregated over the whole corpus before computing the modified
n-gram precisions. Matching is case-insensitive. A zero precision at any
order zeroes the score, as does an empty hypothesis corpus.
"""

from __future__ import annotations

import math
from collections import Counter


def _ngrams(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i: i + n]) for i in range(len(tokens) - n + 1))


def bleu_report(hypotheses, references, max_n: int = 4) -> dict:
    """Score parallel token-sequence lists; returns the score and its factors."""
    hypotheses = [[t.lower() for t in h] for h in hypotheses]
    references = [[t.lower() for t in r] for r in references]
    if len(hypotheses) != len(references):
        raise ValueError(
            f"bleu: {len(hypotheses)} hypotheses for {len(references)} references"
        )
    if not hypotheses:
        raise ValueError("bleu: empty corpus")
    matched = [0] * max_n
    total = [0] * max_n
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, max_n + 1):
            hyp_counts = _ngrams(hyp, n)
            if not hyp_counts:
                continue
            ref_counts = _ngrams(ref, n)
            total[n - 1] += sum(hyp_counts.values())
            matched[n - 1] += sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
    precisions = [m / t if t else 0.0 for m, t in zip(matched, total)]
    if hyp_len == 0:
        brevity = 0.0
    else:
        brevity = math.exp(min(0.0, 1.0 - ref_len / hyp_len))
    if any(p == 0.0 for p in precisions):
        score = 0.0
    else:
        score = brevity * math.exp(sum(math.log(p) for p in precisions) / max_n)
    return {
        "bleu": score,
        "precisions": precisions,
        "brevity_penalty": brevity,
        "hypothesis_length": hyp_len,
        "reference_length": ref_len,
    }


def bleu(hypotheses, references, max_n: int = 4) -> float:
    return bleu_report(hypotheses, references, max_n)["bleu"]
