"""Unigram-overlap scoring (ROUGE-1) used by the question-consistency filter."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .corpus import tokenize


@dataclass(frozen=True)
class OverlapScore:
    precision: float
    recall: float
    f1: float


def rouge1(candidate: str, reference: str) -> OverlapScore:
    """ROUGE-1 with clipped unigram counts.

    Overlap is the multiset intersection of candidate and reference tokens;
    precision and recall divide by the respective token counts and f1 is
    their harmonic mean. Either side empty yields all zeros.
    """
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        return OverlapScore(0.0, 0.0, 0.0)
    cand_counts = Counter(cand)
    ref_counts = Counter(ref)
    overlap = sum(min(count, ref_counts[token]) for token, count in cand_counts.items())
    precision = overlap / len(cand)
    recall = overlap / len(ref)
    f1 = 0.0 if precision + recall == 0 else 2.0 * precision * recall / (precision + recall)
    return OverlapScore(precision, recall, f1)
