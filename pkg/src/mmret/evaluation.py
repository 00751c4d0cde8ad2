"""Retrieval evaluation: answer-based relevance, MRR/precision, significance.

Relevance is judged by answer presence (a passage is relevant to a query
iff it contains any of the query's acceptable answers as a contiguous
token subsequence), so no manual passage labels are needed. Significance
between systems uses a paired two-tailed t-test with a Bonferroni
correction; the Student-t tail probability is computed from the
regularized incomplete beta function via a continued fraction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .corpus import PassageStore, contains_answer
from .ranking import RankedList


@dataclass(frozen=True)
class Judgment:
    """Acceptable answer strings for one query."""

    query_id: str
    answers: tuple[str, ...]

    def __post_init__(self):
        if not self.answers:
            raise ValueError(f"judgment for {self.query_id!r} has no answers")


def judge(passage_text: str, answers: tuple[str, ...] | list[str]) -> bool:
    """Relevant iff the passage contains any acceptable answer."""
    return any(contains_answer(passage_text, answer) for answer in answers)


def _relevance(ranked: RankedList, judgment: Judgment, store: PassageStore, k: int) -> list[bool]:
    flags = []
    for passage_id, _ in ranked.entries[:k]:
        flags.append(judge(store.text(passage_id), judgment.answers))
    return flags


def mrr_at_k(ranked: RankedList, judgment: Judgment, store: PassageStore, k: int = 5) -> float:
    """Reciprocal rank of the first relevant passage in the top k, else 0."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    for position, relevant in enumerate(_relevance(ranked, judgment, store, k), start=1):
        if relevant:
            return 1.0 / position
    return 0.0


def p_at_k(ranked: RankedList, judgment: Judgment, store: PassageStore, k: int = 5) -> float:
    """Fraction of the top k that is relevant; short lists count misses."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return sum(_relevance(ranked, judgment, store, k)) / k


@dataclass
class EvalResult:
    """Per-query reciprocal rank / precision plus their means."""

    k: int
    per_query: dict[str, tuple[float, float]] = field(default_factory=dict)
    mrr: float = 0.0
    precision: float = 0.0

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            f"mrr@{self.k}": self.mrr,
            f"p@{self.k}": self.precision,
            "per_query": {
                qid: {"rr": rr, "p": p} for qid, (rr, p) in sorted(self.per_query.items())
            },
        }


def evaluate(
    run: dict[str, RankedList],
    judgments: dict[str, Judgment],
    store: PassageStore,
    k: int = 5,
) -> EvalResult:
    """Score a run against judgments; judged queries missing from the run get 0.

    Every query in the run must be judged (an unjudged result list is a
    data error, not a zero).
    """
    unjudged = sorted(set(run) - set(judgments))
    if unjudged:
        raise ValueError(f"run contains unjudged queries: {', '.join(unjudged)}")
    result = EvalResult(k=k)
    for query_id in sorted(judgments):
        judgment = judgments[query_id]
        ranked = run.get(query_id)
        if ranked is None or len(ranked) == 0:
            result.per_query[query_id] = (0.0, 0.0)
            continue
        result.per_query[query_id] = (
            mrr_at_k(ranked, judgment, store, k),
            p_at_k(ranked, judgment, store, k),
        )
    if result.per_query:
        ordered = [result.per_query[qid] for qid in sorted(result.per_query)]
        result.mrr = math.fsum(rr for rr, _ in ordered) / len(ordered)
        result.precision = math.fsum(p for _, p in ordered) / len(ordered)
    return result


# --- paired significance test ------------------------------------------------


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    p_value: float
    p_corrected: float
    degenerate: bool = False


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz iteration)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 301):
        m2 = 2 * m
        numerator = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + numerator * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + numerator / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        numerator = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + numerator * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + numerator / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        step = d * c
        h *= step
        if abs(step - 1.0) < 1e-15:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction failed for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b), accurate on both tails via the symmetry relation."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def student_t_two_sided_p(t_statistic: float, dof: int) -> float:
    """P(|T| >= |t|) for a Student-t variable with the given degrees of freedom."""
    if dof < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {dof}")
    if math.isinf(t_statistic):
        return 0.0
    x = dof / (dof + t_statistic * t_statistic)
    return regularized_incomplete_beta(dof / 2.0, 0.5, x)


def paired_ttest(scores_a: list[float], scores_b: list[float], comparisons: int = 1) -> TTestResult:
    """Paired two-tailed t-test on per-query scores with Bonferroni correction.

    Identical inputs give t=0, p=1. Zero variance with a nonzero mean
    difference (every query moved by exactly the same amount) is reported
    as degenerate with p_corrected = 0 rather than a division by zero.
    """
    if len(scores_a) != len(scores_b):
        raise ValueError(f"paired test needs equal lengths, got {len(scores_a)} and {len(scores_b)}")
    n = len(scores_a)
    if n < 2:
        raise ValueError(f"paired test needs at least 2 pairs, got {n}")
    if comparisons < 1:
        raise ValueError(f"comparisons must be >= 1, got {comparisons}")
    diffs = [float(a) - float(b) for a, b in zip(scores_a, scores_b)]
    mean = math.fsum(diffs) / n
    variance = math.fsum((d - mean) ** 2 for d in diffs) / (n - 1)
    if variance == 0.0:
        if mean == 0.0:
            return TTestResult(t_statistic=0.0, p_value=1.0, p_corrected=1.0)
        return TTestResult(
            t_statistic=math.copysign(math.inf, mean),
            p_value=0.0,
            p_corrected=0.0,
            degenerate=True,
        )
    t_statistic = mean / math.sqrt(variance / n)
    p_value = student_t_two_sided_p(t_statistic, n - 1)
    return TTestResult(
        t_statistic=t_statistic,
        p_value=p_value,
        p_corrected=min(1.0, comparisons * p_value),
    )


# --- run and judgment files --------------------------------------------------


def load_judgments(path) -> dict[str, Judgment]:
    """JSONL of {query_id, answers: [...]} records."""
    judgments: dict[str, Judgment] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                query_id = record["query_id"]
                answers = tuple(record["answers"])
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad judgment record ({exc})") from exc
            if query_id in judgments:
                raise ValueError(f"{path}:{lineno}: duplicate judgment for {query_id!r}")
            judgments[query_id] = Judgment(query_id=query_id, answers=answers)
    return judgments


def save_run(run: dict[str, RankedList], path, header: dict | None = None) -> None:
    """Tab-separated (query_id, passage_id, rank, score) rows, '#' comments first."""
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            for key in sorted(header):
                fh.write(f"# {key}={header[key]}\n")
        for query_id in run:
            for rank, (passage_id, score) in enumerate(run[query_id].entries, start=1):
                fh.write(f"{query_id}\t{passage_id}\t{rank}\t{float(score)!r}\n")


def load_run(path) -> dict[str, RankedList]:
    run: dict[str, list[tuple[str, float]]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields")
            query_id, passage_id, rank_text, score_text = parts
            entries = run.setdefault(query_id, [])
            try:
                rank = int(rank_text)
                score = float(score_text)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad rank or score") from exc
            if rank != len(entries) + 1:
                raise ValueError(f"{path}:{lineno}: rank {rank} out of sequence for {query_id!r}")
            entries.append((passage_id, score))
    result = {qid: RankedList(entries=entries) for qid, entries in run.items()}
    for qid, ranked in result.items():
        ranked.validate()
    return result
