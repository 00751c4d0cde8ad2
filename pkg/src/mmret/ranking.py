"""Ranked retrieval results shared by the lexical and dense search paths."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class RankedList:
    """Ordered (passage_id, score) results, best first.

    Scores are non-increasing and passage ids distinct; ties are broken
    by ascending passage id at construction time by the search routines.
    """

    entries: list[tuple[str, float]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def ids(self) -> list[str]:
        return [pid for pid, _ in self.entries]

    def validate(self) -> None:
        seen: set[str] = set()
        prev = None
        for pid, score in self.entries:
            if pid in seen:
                raise ValueError(f"duplicate passage id {pid!r} in ranked list")
            seen.add(pid)
            if prev is not None and score > prev:
                raise ValueError("ranked list scores must be non-increasing")
            prev = score
