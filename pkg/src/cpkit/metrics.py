"""Evaluation primitives: corpus/sentence BLEU and top-1 precision/recall.

BLEU follows the standard construction: clipped n-gram precision up to
order 4, geometric mean, and a brevity penalty against the closest
reference length. Scores are reported in [0, 1]; callers that want the
conventional percent scale multiply by 100.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

MAX_ORDER = 4


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _closest_ref_length(candidate_len: int, references: Sequence[Sequence[str]]) -> int:
    return min(
        (len(ref) for ref in references),
        key=lambda rl: (abs(rl - candidate_len), rl),
    )


@dataclass
class BleuReport:
    score: float
    precisions: tuple[float, float, float, float]
    brevity_penalty: float
    candidate_length: int
    reference_length: int

    def to_json_dict(self) -> dict:
        return {
            "bleu": self.score,
            "bleu_percent": self.score * 100.0,
            "precisions": list(self.precisions),
            "bp": self.brevity_penalty,
            "candidate_length": self.candidate_length,
            "reference_length": self.reference_length,
        }


def corpus_bleu(
    candidates: Sequence[Sequence[str]],
    references: Sequence[Sequence[Sequence[str]]],
) -> BleuReport:
    """Corpus BLEU of ``candidates`` against per-candidate reference sets."""
    if len(candidates) != len(references):
        raise ValueError(
            f"candidate/reference length mismatch: {len(candidates)} vs {len(references)}"
        )
    clipped = [0] * MAX_ORDER
    totals = [0] * MAX_ORDER
    candidate_length = 0
    reference_length = 0
    for candidate, refs in zip(candidates, references):
        if not refs:
            raise ValueError("every candidate needs at least one reference")
        candidate_length += len(candidate)
        reference_length += _closest_ref_length(len(candidate), refs)
        for n in range(1, MAX_ORDER + 1):
            counts = _ngram_counts(candidate, n)
            if not counts:
                continue
            max_ref: Counter = Counter()
            for ref in refs:
                for gram, count in _ngram_counts(ref, n).items():
                    if count > max_ref[gram]:
                        max_ref[gram] = count
            totals[n - 1] += sum(counts.values())
            clipped[n - 1] += sum(min(c, max_ref[g]) for g, c in counts.items())
    precisions = tuple(
        (clipped[i] / totals[i]) if totals[i] else 0.0 for i in range(MAX_ORDER)
    )
    if candidate_length == 0:
        bp = 0.0
    elif candidate_length > reference_length:
        bp = 1.0
    else:
        bp = math.exp(1.0 - reference_length / candidate_length)
    if any(p == 0.0 for p in precisions):
        score = 0.0
    else:
        score = bp * math.exp(sum(math.log(p) for p in precisions) / MAX_ORDER)
    return BleuReport(
        score=score,
        precisions=precisions,  # type: ignore[arg-type]
        brevity_penalty=bp,
        candidate_length=candidate_length,
        reference_length=reference_length,
    )


def sentence_bleu(
    candidate: Sequence[str], references: Sequence[Sequence[str]]
) -> float:
    """Per-sentence BLEU with add-1 smoothing on orders 2..4.

    Unigram precision is left raw so a candidate sharing no words with any
    reference still scores 0.
    """
    if not references:
        raise ValueError("at least one reference required")
    log_sum = 0.0
    for n in range(1, MAX_ORDER + 1):
        counts = _ngram_counts(candidate, n)
        total = sum(counts.values())
        max_ref: Counter = Counter()
        for ref in references:
            for gram, count in _ngram_counts(ref, n).items():
                if count > max_ref[gram]:
                    max_ref[gram] = count
        matched = sum(min(c, max_ref[g]) for g, c in counts.items())
        if n == 1:
            p = matched / total if total else 0.0
        else:
            p = (matched + 1.0) / (total + 1.0)
        if p == 0.0:
            return 0.0
        log_sum += math.log(p)
    if not candidate:
        return 0.0
    ref_len = _closest_ref_length(len(candidate), references)
    bp = 1.0 if len(candidate) > ref_len else math.exp(1.0 - ref_len / len(candidate))
    return bp * math.exp(log_sum / MAX_ORDER)


def precision_recall_at_1(
    predictions: Sequence[str], gold: Sequence[set[str] | frozenset[str]]
) -> tuple[float, float]:
    """Top-1 precision and recall over aligned prediction/gold-set lists."""
    if len(predictions) != len(gold):
        raise ValueError("predictions and gold sets must align")
    if not predictions:
        return 0.0, 0.0
    hits = 0
    gold_total = 0
    for pred, gold_set in zip(predictions, gold):
        if not gold_set:
            raise ValueError("gold label sets must be non-empty")
        gold_total += len(gold_set)
        if pred in gold_set:
            hits += 1
    return hits / len(predictions), hits / gold_total
