"""BM25 inverted index: construction, scoring, top-k search, and grid tuning."""

from __future__ import annotations

import gzip
import json
import math
from bisect import bisect_left
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import PassageStore, contains_answer, tokenize
from .ranking import RankedList

INDEX_FORMAT = "mmret-bm25-index"
INDEX_VERSION = 1

# Tuning grid endpoints are inclusive; values are built from integer-step
# rationals so repeated runs produce identical floats.
DEFAULT_K1_GRID: tuple[float, ...] = tuple(i / 10 for i in range(5, 16, 2))
DEFAULT_B_GRID: tuple[float, ...] = tuple(i / 10 for i in range(2, 9, 2))


@dataclass(frozen=True)
class BM25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError(f"k1 must be >= 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must be in [0, 1], got {self.b}")


class InvertedIndex:
    """Term postings plus the per-document statistics BM25 needs.

    postings maps term -> [(doc_ordinal, term_frequency), ...] in ascending
    ordinal order. Immutable after build; concurrent searches are safe.
    """

    def __init__(
        self,
        postings: dict[str, list[tuple[int, int]]],
        doc_lengths: list[int],
        doc_ids: list[str],
        avg_doc_len: float,
    ):
        self.postings = postings
        self.doc_lengths = doc_lengths
        self.doc_ids = doc_ids
        self.avg_doc_len = avg_doc_len

    @property
    def doc_count(self) -> int:
        return len(self.doc_ids)

    def idf(self, term: str) -> float:
        """Smoothed ln(1 + (N - df + 0.5) / (df + 0.5)); positive for every indexed term."""
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))

    def term_frequency(self, term: str, doc: int) -> int:
        plist = self.postings.get(term)
        if not plist:
            return 0
        pos = bisect_left(plist, doc, key=lambda entry: entry[0])
        if pos < len(plist) and plist[pos][0] == doc:
            return plist[pos][1]
        return 0


def build_index(store: PassageStore) -> InvertedIndex:
    """Index every passage of the store, in store order."""
    if len(store) == 0:
        raise ValueError("cannot build an index over an empty store")
    postings: dict[str, list[tuple[int, int]]] = {}
    doc_lengths: list[int] = []
    doc_ids: list[str] = []
    for ordinal, passage in enumerate(store):
        tokens = tokenize(passage.text)
        doc_lengths.append(len(tokens))
        doc_ids.append(passage.id)
        counts: dict[str, int] = {}
        for tok in tokens:
            counts[tok] = counts.get(tok, 0) + 1
        for term, tf in counts.items():
            postings.setdefault(term, []).append((ordinal, tf))
    avg_doc_len = sum(doc_lengths) / len(doc_lengths)
    return InvertedIndex(postings, doc_lengths, doc_ids, avg_doc_len)


def _term_weight(tf: int, dl: int, params: BM25Params, avg_doc_len: float) -> float:
    norm = params.k1 * (1.0 - params.b + params.b * dl / avg_doc_len)
    return tf * (params.k1 + 1.0) / (tf + norm)


def bm25_score(index: InvertedIndex, params: BM25Params, query: Sequence[str], doc: int) -> float:
    """Score one document against a tokenized query.

    Duplicate query tokens contribute once per occurrence; terms absent
    from the document contribute zero.
    """
    if not 0 <= doc < index.doc_count:
        raise ValueError(f"doc ordinal {doc} out of range")
    dl = index.doc_lengths[doc]
    total = 0.0
    for term in query:
        tf = index.term_frequency(term, doc)
        if tf:
            total += index.idf(term) * _term_weight(tf, dl, params, index.avg_doc_len)
    return total


def search(index: InvertedIndex, params: BM25Params, query_text: str, k: int) -> RankedList:
    """Top-k passages by BM25 score, ties broken by ascending passage id.

    Only documents matching at least one query term are returned, so the
    result may be shorter than k.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores: dict[int, float] = {}
    # Accumulate per query token occurrence, in query order, so scores are
    # bit-identical to summing bm25_score term by term.
    for term in tokenize(query_text):
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for doc, tf in plist:
            w = idf * _term_weight(tf, index.doc_lengths[doc], params, index.avg_doc_len)
            scores[doc] = scores.get(doc, 0.0) + w
    ranked = sorted(
        ((index.doc_ids[doc], score) for doc, score in scores.items()),
        key=lambda entry: (-entry[1], entry[0]),
    )
    return RankedList(ranked[:k])


@dataclass(frozen=True)
class GridCell:
    k1: float
    b: float
    mrr: float


def _mrr_on_validation(
    index: InvertedIndex,
    store: PassageStore,
    params: BM25Params,
    validation: Sequence[tuple[str, Iterable[str]]],
    cutoff: int,
) -> float:
    total = 0.0
    for query_text, answers in validation:
        answers = list(answers)
        if not answers:
            raise ValueError(f"empty answer set for validation query {query_text!r}")
        ranked = search(index, params, query_text, cutoff)
        for rank, (pid, _) in enumerate(ranked, start=1):
            if any(contains_answer(store.text(pid), answer) for answer in answers):
                total += 1.0 / rank
                break
    return total / len(validation)


def grid_search(
    index: InvertedIndex,
    store: PassageStore,
    validation: Sequence[tuple[str, Iterable[str]]],
    k1_grid: Sequence[float] = DEFAULT_K1_GRID,
    b_grid: Sequence[float] = DEFAULT_B_GRID,
    cutoff: int = 5,
) -> list[GridCell]:
    """Evaluate MRR@cutoff for every (k1, b) pair of the grid."""
    if not validation:
        raise ValueError("validation set is empty")
    if not k1_grid or not b_grid:
        raise ValueError("parameter grids must be nonempty")
    cells = []
    for k1 in k1_grid:
        for b in b_grid:
            params = BM25Params(k1=k1, b=b)
            cells.append(GridCell(k1=k1, b=b, mrr=_mrr_on_validation(index, store, params, validation, cutoff)))
    return cells


def tune_params(
    index: InvertedIndex,
    store: PassageStore,
    validation: Sequence[tuple[str, Iterable[str]]],
    k1_grid: Sequence[float] = DEFAULT_K1_GRID,
    b_grid: Sequence[float] = DEFAULT_B_GRID,
    cutoff: int = 5,
) -> BM25Params:
    """Exhaustive grid search; returns the argmax-MRR cell.

    Ties go to the smaller k1, then the smaller b.
    """
    cells = grid_search(index, store, validation, k1_grid, b_grid, cutoff)
    best = max(cells, key=lambda c: (c.mrr, -c.k1, -c.b))
    return BM25Params(k1=best.k1, b=best.b)


def save_index(index: InvertedIndex, path: str | Path) -> None:
    payload = {
        "format": INDEX_FORMAT,
        "version": INDEX_VERSION,
        "doc_ids": index.doc_ids,
        "doc_lengths": index.doc_lengths,
        "avg_doc_len": index.avg_doc_len,
        "postings": {term: [[doc, tf] for doc, tf in plist] for term, plist in index.postings.items()},
    }
    with gzip.open(Path(path), "wt", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_index(path: str | Path) -> InvertedIndex:
    with gzip.open(Path(path), "rt", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != INDEX_FORMAT:
        raise ValueError(f"{path}: not a BM25 index file")
    if payload.get("version") != INDEX_VERSION:
        raise ValueError(f"{path}: unsupported index version {payload.get('version')}")
    postings = {term: [(doc, tf) for doc, tf in plist] for term, plist in payload["postings"].items()}
    return InvertedIndex(
        postings=postings,
        doc_lengths=list(payload["doc_lengths"]),
        doc_ids=list(payload["doc_ids"]),
        avg_doc_len=float(payload["avg_doc_len"]),
    )
