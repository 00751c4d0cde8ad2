"""Passage collection and image records: loading, tokenization, answer matching."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

# Maximal runs of Unicode alphanumerics; underscore and punctuation split tokens.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class CorpusFormatError(ValueError):
    """Raised for malformed or inconsistent corpus/image files."""


@dataclass(frozen=True)
class Passage:
    """One identified text unit of the retrieval collection."""

    id: str
    text: str


@dataclass
class ImageRecord:
    """An image referenced by id, with an optional textual caption.

    The caption is either supplied on load or filled in by the captioner
    adapter during pipeline runs; image binaries are never touched here.
    """

    image_id: str
    caption: str | None = None


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any run of non-alphanumeric characters.

    No stemming and no stopword removal, so scoring and relevance
    judgment stay reproducible.
    """
    return _TOKEN_RE.findall(text.lower())


def contains_answer(passage_text: str, answer: str) -> bool:
    """True iff the answer's tokens occur contiguously in the passage's tokens.

    This is the case-insensitive exact match used for relevance judgment,
    applied at token granularity so "cat" does not match inside "category".
    Raises ValueError if the answer has no tokens.
    """
    needle = tokenize(answer)
    if not needle:
        raise ValueError("answer must contain at least one token")
    hay = tokenize(passage_text)
    n = len(needle)
    if n > len(hay):
        return False
    first = needle[0]
    return any(hay[i] == first and hay[i : i + n] == needle for i in range(len(hay) - n + 1))


class PassageStore:
    """Insertion-ordered passage collection with id lookup.

    Immutable after construction; safe for concurrent readers.
    """

    def __init__(self, passages: list[Passage]):
        self._passages = list(passages)
        self._by_id: dict[str, Passage] = {}
        for p in self._passages:
            if not p.id:
                raise CorpusFormatError("passage with empty id")
            if not p.text.strip():
                raise CorpusFormatError(f"passage {p.id!r} has empty text")
            if p.id in self._by_id:
                raise CorpusFormatError(f"duplicate passage id {p.id!r}")
            self._by_id[p.id] = p

    def __len__(self) -> int:
        return len(self._passages)

    def __iter__(self):
        return iter(self._passages)

    def __contains__(self, passage_id: str) -> bool:
        return passage_id in self._by_id

    def get(self, passage_id: str) -> Passage:
        try:
            return self._by_id[passage_id]
        except KeyError:
            raise KeyError(f"unknown passage id {passage_id!r}") from None

    def text(self, passage_id: str) -> str:
        return self.get(passage_id).text

    def ids(self) -> list[str]:
        return [p.id for p in self._passages]


def _infer_format(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix == ".tsv":
        return "tsv"
    if suffix in (".jsonl", ".json"):
        return "jsonl"
    raise CorpusFormatError(f"cannot infer corpus format from {path.name!r}; pass format=")


def load_passages(path: str | Path, format: str | None = None) -> PassageStore:
    """Load a passage corpus from `id<TAB>text` TSV or `{"id","text"}` JSONL.

    Blank lines are skipped. Malformed records and duplicate ids raise
    CorpusFormatError naming the offending line or id.
    """
    path = Path(path)
    fmt = format or _infer_format(path)
    if fmt not in ("tsv", "jsonl"):
        raise CorpusFormatError(f"unsupported corpus format {fmt!r}")

    passages: list[Passage] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if fmt == "tsv":
                if "\t" not in line:
                    raise CorpusFormatError(f"{path.name}:{lineno}: expected id<TAB>text")
                pid, text = line.split("\t", 1)
            else:
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorpusFormatError(f"{path.name}:{lineno}: invalid JSON ({exc.msg})") from exc
                if not isinstance(record, dict) or "id" not in record or "text" not in record:
                    raise CorpusFormatError(f"{path.name}:{lineno}: record must have 'id' and 'text'")
                pid, text = str(record["id"]), str(record["text"])
            if not pid:
                raise CorpusFormatError(f"{path.name}:{lineno}: empty passage id")
            if not text.strip():
                raise CorpusFormatError(f"{path.name}:{lineno}: empty passage text")
            if pid in seen:
                raise CorpusFormatError(f"{path.name}:{lineno}: duplicate passage id {pid!r}")
            seen.add(pid)
            passages.append(Passage(id=pid, text=text))
    return PassageStore(passages)


def load_images(path: str | Path) -> list[ImageRecord]:
    """Load image records from JSONL `{"image_id": ..., "caption": ...?}`."""
    path = Path(path)
    records: list[ImageRecord] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path.name}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict) or "image_id" not in record:
                raise CorpusFormatError(f"{path.name}:{lineno}: record must have 'image_id'")
            image_id = str(record["image_id"])
            if not image_id:
                raise CorpusFormatError(f"{path.name}:{lineno}: empty image_id")
            if image_id in seen:
                raise CorpusFormatError(f"{path.name}:{lineno}: duplicate image_id {image_id!r}")
            seen.add(image_id)
            caption = record.get("caption")
            records.append(ImageRecord(image_id=image_id, caption=str(caption) if caption else None))
    return records
