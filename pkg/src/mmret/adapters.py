"""Model adapter contracts: captioner, annotator, question generator, QA.

The engine only ever talks to these four callables. Stub implementations
keep everything deterministic and dependency-free; RemoteAdapters speaks
the HTTP JSON wire protocol to an external model server.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import httpx

POS_TAGS = ("NOUN", "PROPN", "PRON", "DET", "ADJ", "NUM", "OTHER")

HIGHLIGHT = "<hl>"

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


class AdapterError(Exception):
    """A model adapter failed to produce a usable value."""


@dataclass(frozen=True)
class AnnotatedToken:
    text: str
    pos_tag: str
    char_offset: int


@dataclass
class CandidatePhrase:
    """A potential answer phrase: contiguous annotated tokens plus surface text."""

    tokens: list[AnnotatedToken]
    text: str
    source_passage_id: str = ""

    @property
    def offset(self) -> int:
        return self.tokens[0].char_offset

    def tags(self) -> list[str]:
        return [t.pos_tag for t in self.tokens]


@runtime_checkable
class ModelAdapters(Protocol):
    """Bundle of the four model roles the generation pipeline depends on.

    Every method is deterministic for fixed inputs within a run and raises
    AdapterError on failure.
    """

    def captioner(self, image_ref: str) -> str: ...

    def annotator(self, text: str) -> list[CandidatePhrase]: ...

    def question_generator(self, passage_with_highlight: str) -> str: ...

    def question_answerer(self, question: str, passage: str) -> str: ...


# --- deterministic in-process stubs -----------------------------------------

_DET_WORDS = frozenset("a an the this that these those".split())
_PRON_WORDS = frozenset(
    "i you he she it we they me him her us them my your his its our their "
    "mine yours hers ours theirs myself yourself himself herself itself "
    "ourselves themselves who whom whose which what".split()
)
_NUMBER_WORDS = frozenset(
    "zero one two three four five six seven eight nine ten eleven twelve "
    "twenty thirty forty fifty sixty seventy eighty ninety hundred thousand "
    "million billion".split()
)
_FUNCTION_WORDS = frozenset(
    "and or but if then than because while although of in on at by for with "
    "from to into over under between through during about against up down "
    "off out across along around near above below beside behind beyond "
    "within without toward towards is are was were be been being am do does "
    "did have has had can could will would shall should may might must not "
    "no nor so as also very more most less least such per each every some "
    "any all both few many much several own same other another when where "
    "why how there here jump jumps jumped run runs ran weigh weighs weighed "
    "span spans spanned live lives lived grow grows grew stand stands stood "
    "reach reaches reached measure measures measured hold holds held "
    "contain contains contained cover covers covered stretch stretches "
    "stretched fly flies flew eat eats ate sleep sleeps slept hunt hunts "
    "hunted build builds built call calls called make makes made use uses "
    "used carry carries carried travel travels traveled climb climbs "
    "climbed dig digs dug rise rises rose watch watches watched help helps "
    "helped appear appears appeared roll rolls rolled cross crosses crossed "
    "sell sells sold sit sits sat often".split()
)
_CONTENT_TAGS = frozenset({"NOUN", "PROPN", "ADJ", "NUM"})


def _tag_token(surface: str, char_offset: int) -> str:
    lower = surface.lower()
    if lower in _DET_WORDS:
        return "DET"
    if lower in _PRON_WORDS:
        return "PRON"
    if lower in _NUMBER_WORDS or lower.isdigit():
        return "NUM"
    if lower in _FUNCTION_WORDS:
        return "OTHER"
    if surface[:1].isupper() and char_offset > 0:
        return "PROPN"
    return "NOUN"


def annotate_tokens(text: str) -> list[AnnotatedToken]:
    """Tokenize with character offsets and coarse closed-class tags."""
    return [
        AnnotatedToken(text=m.group(), pos_tag=_tag_token(m.group(), m.start()), char_offset=m.start())
        for m in _WORD_RE.finditer(text)
    ]


def chunk_phrases(text: str) -> list[CandidatePhrase]:
    """Group tokens into noun-chunk-like candidate phrases.

    A chunk is a run of content tokens, optionally led by the determiner or
    pronoun that introduces it (mirroring how a noun chunk carries its
    determiner). Bare pronouns are emitted as single-token chunks.
    """
    tokens = annotate_tokens(text)
    phrases: list[CandidatePhrase] = []
    current: list[AnnotatedToken] = []

    def flush():
        if not current:
            return
        has_content = any(t.pos_tag in _CONTENT_TAGS for t in current)
        is_bare_pron = len(current) == 1 and current[0].pos_tag == "PRON"
        if has_content or is_bare_pron:
            start = current[0].char_offset
            last = current[-1]
            phrases.append(
                CandidatePhrase(tokens=list(current), text=text[start : last.char_offset + len(last.text)])
            )
        current.clear()

    for tok in tokens:
        if tok.pos_tag in _CONTENT_TAGS:
            current.append(tok)
        elif tok.pos_tag in ("DET", "PRON"):
            flush()
            current.append(tok)
        else:
            flush()
    flush()
    return phrases


class StubAdapters:
    """Rule-based adapters; the whole pipeline runs offline with these."""

    def captioner(self, image_ref: str) -> str:
        words = [
            w
            for w in _WORD_RE.findall(image_ref.lower())
            if not w.isdigit() and w not in ("img", "image", "jpg", "jpeg", "png")
        ]
        if not words:
            raise AdapterError(f"cannot caption image ref {image_ref!r}")
        return "a photo of " + " ".join(words)

    def annotator(self, text: str) -> list[CandidatePhrase]:
        return chunk_phrases(text)

    def question_generator(self, passage_with_highlight: str) -> str:
        parts = passage_with_highlight.split(HIGHLIGHT)
        if len(parts) < 3:
            raise AdapterError("highlight markers not found in passage")
        answer = parts[1].strip()
        if not answer:
            raise AdapterError("empty highlighted span")
        return f"what is {answer}?"

    def question_answerer(self, question: str, passage: str) -> str:
        # Echo back the longest token prefix of the asked-about phrase that
        # actually occurs in the passage.
        phrase = question.strip().rstrip("?")
        if phrase.lower().startswith("what is "):
            phrase = phrase[len("what is ") :]
        tokens = _WORD_RE.findall(phrase.lower())
        if not tokens:
            raise AdapterError(f"cannot parse question {question!r}")
        passage_tokens = _WORD_RE.findall(passage.lower())
        best = ""
        for end in range(1, len(tokens) + 1):
            prefix = tokens[:end]
            if any(passage_tokens[i : i + end] == prefix for i in range(len(passage_tokens) - end + 1)):
                best = " ".join(prefix)
            else:
                break
        return best or "unknown"


# --- HTTP wire protocol client ----------------------------------------------


class RemoteAdapters:
    """Adapter bundle backed by a model server speaking the JSON protocol.

    Endpoints: POST /caption {image_ref} -> {caption}; POST /annotate {text}
    -> {phrases: [{text, offset, tags}]}; POST /qg {passage_hl} -> {question};
    POST /qa {question, passage} -> {answer}.
    """

    def __init__(self, base_url: str, client: httpx.Client | None = None, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self._client = client or httpx.Client(timeout=timeout)

    def _post(self, endpoint: str, payload: dict) -> dict:
        try:
            response = self._client.post(f"{self.base_url}{endpoint}", json=payload)
        except httpx.HTTPError as exc:
            raise AdapterError(f"{endpoint}: transport failure: {exc}") from exc
        if response.status_code != 200:
            raise AdapterError(f"{endpoint}: server returned {response.status_code}")
        try:
            body = response.json()
        except ValueError as exc:
            raise AdapterError(f"{endpoint}: response is not JSON") from exc
        if not isinstance(body, dict):
            raise AdapterError(f"{endpoint}: response must be a JSON object")
        return body

    def healthcheck(self) -> None:
        """Probe /healthz; raises AdapterError when the server is unreachable."""
        try:
            response = self._client.get(f"{self.base_url}/healthz")
        except httpx.HTTPError as exc:
            raise AdapterError(f"model server unreachable: {exc}") from exc
        if response.status_code != 200:
            raise AdapterError(f"model server unhealthy: /healthz returned {response.status_code}")

    def captioner(self, image_ref: str) -> str:
        body = self._post("/caption", {"image_ref": image_ref})
        caption = body.get("caption")
        if not isinstance(caption, str) or not caption.strip():
            raise AdapterError("/caption: missing or empty 'caption'")
        return caption

    def annotator(self, text: str) -> list[CandidatePhrase]:
        body = self._post("/annotate", {"text": text})
        phrases = body.get("phrases")
        if not isinstance(phrases, list):
            raise AdapterError("/annotate: missing 'phrases' list")
        return [self._parse_phrase(raw, text) for raw in phrases]

    @staticmethod
    def _parse_phrase(raw: object, source_text: str) -> CandidatePhrase:
        if not isinstance(raw, dict):
            raise AdapterError("/annotate: phrase entries must be objects")
        surface = raw.get("text")
        offset = raw.get("offset")
        tags = raw.get("tags")
        if not isinstance(surface, str) or not isinstance(offset, int) or not isinstance(tags, list):
            raise AdapterError(f"/annotate: malformed phrase entry {raw!r}")
        if source_text[offset : offset + len(surface)] != surface:
            raise AdapterError(f"/annotate: offset {offset} inconsistent with submitted text for {surface!r}")
        matches = list(_WORD_RE.finditer(surface))
        if len(matches) != len(tags):
            raise AdapterError(f"/annotate: {len(tags)} tags for {len(matches)} tokens in {surface!r}")
        tokens = []
        for m, tag in zip(matches, tags):
            if tag not in POS_TAGS:
                raise AdapterError(f"/annotate: unknown tag {tag!r}")
            tokens.append(AnnotatedToken(text=m.group(), pos_tag=tag, char_offset=offset + m.start()))
        if not tokens:
            raise AdapterError(f"/annotate: phrase {surface!r} has no tokens")
        return CandidatePhrase(tokens=tokens, text=surface)

    def question_generator(self, passage_with_highlight: str) -> str:
        body = self._post("/qg", {"passage_hl": passage_with_highlight})
        question = body.get("question")
        if not isinstance(question, str) or not question.strip():
            raise AdapterError("/qg: missing or empty 'question'")
        return question

    def question_answerer(self, question: str, passage: str) -> str:
        body = self._post("/qa", {"question": question, "passage": passage})
        answer = body.get("answer")
        if not isinstance(answer, str):
            raise AdapterError("/qa: missing 'answer'")
        return answer


def make_adapters(mode: str, client: httpx.Client | None = None) -> ModelAdapters:
    """Build an adapter bundle from a mode string: 'stub' or 'remote:URL'."""
    if mode == "stub":
        return StubAdapters()
    if mode.startswith("remote:"):
        url = mode[len("remote:") :]
        if not url:
            raise ValueError("remote adapter mode needs a URL, e.g. remote:http://localhost:8080")
        return RemoteAdapters(url, client=client)
    raise ValueError(f"unknown adapter mode {mode!r}")


# --- contract conformance ----------------------------------------------------


@dataclass
class ConformanceReport:
    """Issues found while exercising an adapter bundle against the contract."""

    failures: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def check_adapter_contract(
    adapters: ModelAdapters,
    texts: list[str],
    image_refs: list[str] | None = None,
) -> ConformanceReport:
    """Exercise all four adapter roles and collect contract violations.

    Checks response shapes, annotation offset consistency, tag vocabulary,
    and determinism (two identical calls must agree; violations are
    reported as warnings because remote models may be intentionally
    sampled).
    """
    report = ConformanceReport()
    image_refs = image_refs if image_refs is not None else ["img-sample-01"]

    for ref in image_refs:
        try:
            caption = adapters.captioner(ref)
            if not caption.strip():
                report.failures.append(f"captioner({ref!r}) returned empty caption")
            elif adapters.captioner(ref) != caption:
                report.warnings.append(f"captioner({ref!r}) is nondeterministic")
        except AdapterError as exc:
            report.failures.append(f"captioner({ref!r}) failed: {exc}")

    for text in texts:
        try:
            phrases = adapters.annotator(text)
        except AdapterError as exc:
            report.failures.append(f"annotator failed on {text!r}: {exc}")
            continue
        last_offset = -1
        for phrase in phrases:
            if not phrase.tokens:
                report.failures.append(f"annotator: empty phrase for {text!r}")
                continue
            if text[phrase.offset : phrase.offset + len(phrase.text)] != phrase.text:
                report.failures.append(f"annotator: offset mismatch for {phrase.text!r} in {text!r}")
            if phrase.offset <= last_offset:
                report.failures.append(f"annotator: offsets not strictly increasing in {text!r}")
            last_offset = phrase.offset
            for tok in phrase.tokens:
                if tok.pos_tag not in POS_TAGS:
                    report.failures.append(f"annotator: unknown tag {tok.pos_tag!r}")
        second = adapters.annotator(text)
        if [(p.text, p.offset, p.tags()) for p in phrases] != [(p.text, p.offset, p.tags()) for p in second]:
            report.warnings.append(f"annotator is nondeterministic on {text!r}")

    for text in texts:
        tokens = _WORD_RE.findall(text)
        if not tokens:
            continue
        target = tokens[-1]
        idx = text.rfind(target)
        highlighted = f"{text[:idx]}{HIGHLIGHT} {target} {HIGHLIGHT}{text[idx + len(target):]}"
        try:
            question = adapters.question_generator(highlighted)
            if not question.strip():
                report.failures.append(f"question_generator returned empty question for {text!r}")
            elif adapters.question_generator(highlighted) != question:
                report.warnings.append(f"question_generator is nondeterministic on {text!r}")
            else:
                answer = adapters.question_answerer(question, text)
                if not isinstance(answer, str):
                    report.failures.append("question_answerer returned a non-string")
                elif adapters.question_answerer(question, text) != answer:
                    report.warnings.append(f"question_answerer is nondeterministic on {question!r}")
        except AdapterError as exc:
            report.failures.append(f"qg/qa round trip failed on {text!r}: {exc}")

    return report
