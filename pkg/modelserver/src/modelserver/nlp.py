"""Deterministic rule-based model backends.

These stand in for the captioner / annotator / question generator /
extractive QA checkpoints that a production deployment would load; they
keep every endpoint fully functional and reproducible offline. The
annotator pipeline is versioned (``ANNOTATOR_VERSION``) so clients can
record exactly which chunking rules produced their phrases.

Protocol constants shared with clients: tokens are maximal runs matching
``[^\\W_]+`` and part-of-speech tags come from ``TAG_SET``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

ANNOTATOR_VERSION = "rulechunk-1"
CAPTIONER_VERSION = "refcaption-1"
QG_VERSION = "spanquestion-1"
QA_VERSION = "spanmatch-1"

HIGHLIGHT = "<hl>"
WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)
TAG_SET = ("NOUN", "PROPN", "PRON", "DET", "ADJ", "NUM", "OTHER")


class HeuristicError(Exception):
    """A request this backend cannot serve (reported as HTTP 500)."""


# Closed word classes. Curated for the kind of encyclopedic sentences the
# data-generation pipeline feeds through /annotate; open-class words
# default to NOUN below, which is the safe choice for answer mining.
DETERMINERS = frozenset(
    "the a an this that these those each every either neither another such".split()
)
PRONOUNS = frozenset(
    """i me my mine myself we us our ours ourselves you your yours yourself
    he him his himself she her hers herself it its itself they them their
    theirs themselves who whom whose which what someone anyone everyone
    nobody something anything everything nothing""".split()
)
NUMBER_WORDS = frozenset(
    """zero one two three four five six seven eight nine ten eleven twelve
    thirteen fourteen fifteen sixteen seventeen eighteen nineteen twenty
    thirty forty fifty sixty seventy eighty ninety hundred thousand million
    billion first second third half dozen""".split()
)
ADJECTIVES = frozenset(
    """red blue green yellow white black brown grey gray warm cold hot dry
    wet old young new big small large tall short long wide narrow open
    adult wild rocky sandy frozen golden silver quiet loud bright dark
    heavy light deep shallow""".split()
)
# everything here breaks noun chunks: prepositions, conjunctions,
# auxiliaries, common verbs, adverbs, quantity words used adverbially
FUNCTION_WORDS = frozenset(
    """of in on at by to from with without for and or but nor so yet as if
    than then when while where because since until before after above
    below between among through across along around near over under into
    onto out off up down again once twice is are was were be been being am
    do does did done have has had having can could will would shall should
    may might must not no yes very too quite rather only just also even
    still there here now often never always sometimes usually about
    makes make made travel travels jump jumps jumped weigh weighs weighed
    hunt hunts hunted watch watches watched help helps helped appear
    appears appeared roll rolls rolled cross crosses crossed sell sells
    sold sit sits sat sleep sleeps slept stand stands stood wait waits
    waited live lives lived stay stays stayed come comes came go goes went
    run runs ran say says said see sees saw take takes took""".split()
)

NOUNY_TAGS = frozenset({"NOUN", "PROPN", "NUM"})
CHUNKABLE_TAGS = frozenset({"NOUN", "PROPN", "ADJ", "NUM"})


@dataclass(frozen=True)
class TaggedToken:
    text: str
    offset: int
    tag: str


def tokenize(text: str) -> list[tuple[str, int]]:
    return [(m.group(), m.start()) for m in WORD_RE.finditer(text)]


def tag_word(word: str, offset: int) -> str:
    lowered = word.lower()
    if lowered in DETERMINERS:
        return "DET"
    if lowered in PRONOUNS:
        return "PRON"
    if lowered in NUMBER_WORDS or word.isdigit():
        return "NUM"
    if lowered in ADJECTIVES:
        return "ADJ"
    if lowered in FUNCTION_WORDS:
        return "OTHER"
    if word[:1].isupper() and offset > 0:
        return "PROPN"
    return "NOUN"


def tag_text(text: str) -> list[TaggedToken]:
    return [TaggedToken(w, off, tag_word(w, off)) for w, off in tokenize(text)]


@dataclass(frozen=True)
class Phrase:
    text: str
    offset: int
    tags: tuple[str, ...]


def noun_phrases(text: str) -> list[Phrase]:
    """Contiguous noun chunks, excluding any span with a determiner or pronoun.

    A chunk is a maximal run of adjective/noun/proper-noun/number tokens
    containing at least one noun-like head. Determiners and pronouns never
    appear inside returned phrases: "the cat sat" yields no phrase for
    "the cat" because its determiner disqualifies the whole span.
    """
    phrases: list[Phrase] = []
    current: list[TaggedToken] = []

    def flush() -> None:
        nonlocal current
        if current and any(t.tag in NOUNY_TAGS for t in current):
            start = current[0].offset
            end = current[-1].offset + len(current[-1].text)
            phrases.append(
                Phrase(text=text[start:end], offset=start, tags=tuple(t.tag for t in current))
            )
        current = []

    for token in tag_text(text):
        if token.tag in CHUNKABLE_TAGS:
            current.append(token)
        else:
            flush()
    flush()
    return phrases


STRIP_REF_WORDS = frozenset(
    "img image photo picture pic thumb jpg jpeg png gif webp bmp tiff of the a an and".split()
)


def caption_for(image_ref: str) -> str:
    """Describe an image from its reference string alone.

    The reference is mined for content words (``img-red-lynx-01.jpg`` ->
    "a photo of red lynx"); refs with no describable tokens are errors.
    """
    stem = image_ref.rsplit("/", 1)[-1]
    words = [
        w.lower()
        for w in re.split(r"[^0-9A-Za-z]+", stem)
        if w and not w.isdigit() and w.lower() not in STRIP_REF_WORDS
    ]
    if not words:
        raise HeuristicError(f"image reference {image_ref!r} carries no describable tokens")
    return "a photo of " + " ".join(words)


def highlighted_span(passage_hl: str) -> str:
    """The text between the first pair of highlight markers."""
    start = passage_hl.find(HIGHLIGHT)
    if start < 0:
        raise HeuristicError("passage contains no highlight markers")
    rest = passage_hl[start + len(HIGHLIGHT) :]
    end = rest.find(HIGHLIGHT)
    if end < 0:
        raise HeuristicError("highlight marker is not closed")
    span = rest[:end].strip()
    if not span:
        raise HeuristicError("highlighted span is empty")
    return span


def make_question(passage_hl: str) -> str:
    """Ask about the highlighted span; numeric spans get a quantity question."""
    span = highlighted_span(passage_hl)
    first = WORD_RE.search(span)
    if first is not None and tag_word(first.group(), 1) == "NUM":
        return f"how much is {span}?"
    return f"what is {span}?"


QUESTION_PREFIXES = ("what is ", "how much is ")


def answer_question(question: str, passage: str) -> str:
    """Extract the passage span best matching the phrase the question asks about.

    The question's target phrase is matched token-by-token against the
    passage (case-insensitive); the longest matched prefix is returned in
    the passage's own surface form, so answers are genuine extractions.
    Unanswerable questions return "unknown".
    """
    lowered = question.lower().strip()
    target = None
    for prefix in QUESTION_PREFIXES:
        if lowered.startswith(prefix):
            target = question.strip()[len(prefix) :].rstrip("?").strip()
            break
    if target is None:
        return "unknown"
    wanted = [w.lower() for w, _ in tokenize(target)]
    if not wanted:
        return "unknown"
    passage_tokens = tokenize(passage)
    haystack = [w.lower() for w, _ in passage_tokens]

    best = 0
    best_at = -1
    for start in range(len(haystack)):
        length = 0
        while (
            length < len(wanted)
            and start + length < len(haystack)
            and haystack[start + length] == wanted[length]
        ):
            length += 1
        if length > best:
            best, best_at = length, start
    if best == 0:
        return "unknown"
    first_word, first_off = passage_tokens[best_at]
    last_word, last_off = passage_tokens[best_at + best - 1]
    return passage[first_off : last_off + len(last_word)]
