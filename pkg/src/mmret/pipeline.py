"""Weak-supervision data generation: captions -> passages -> questions -> tuples.

Each image is captioned, the caption is used as a lexical query to find
candidate positive passages, noun-phrase answers are mined from those
passages, a question is generated around each highlighted answer, kept only
if a reading-comprehension model can recover the answer from the passage,
and finally paired with a hard negative passage that does not contain the
answer. Per-item failures skip the item and are tallied; they never abort
the run.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

from .adapters import HIGHLIGHT, AdapterError, CandidatePhrase, ModelAdapters
from .bm25 import BM25Params, InvertedIndex, search
from .corpus import ImageRecord, Passage, PassageStore, contains_answer
from .rouge import rouge1

log = logging.getLogger(__name__)

_EXCLUDED_TAGS = frozenset({"PRON", "DET"})


@dataclass(frozen=True)
class GeneratedExample:
    """One training tuple: question, image, answer, positive and negative passage."""

    question: str
    image_id: str
    answer: str
    positive_passage_id: str
    negative_passage_id: str

    def to_json_dict(self) -> dict:
        return {
            "question": self.question,
            "image_id": self.image_id,
            "answer": self.answer,
            "positive_passage_id": self.positive_passage_id,
            "negative_passage_id": self.negative_passage_id,
        }


@dataclass(frozen=True)
class AuditRecord:
    """Filter-stage evidence for one kept example (QA answer and its overlap)."""

    image_id: str
    positive_passage_id: str
    question: str
    answer: str
    qa_answer: str
    rouge_f1: float


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs for a generation run; defaults follow the reference setup."""

    m: int = 5
    t: float = 0.5
    negative_pool_size: int = 100
    max_phrases_per_passage: int | None = None
    bm25_params: BM25Params = field(default_factory=BM25Params)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"filter threshold must lie in [0, 1], got {self.t}")
        if self.negative_pool_size < 1:
            raise ValueError(f"negative_pool_size must be >= 1, got {self.negative_pool_size}")
        if self.max_phrases_per_passage is not None and self.max_phrases_per_passage < 1:
            raise ValueError("max_phrases_per_passage must be >= 1 when set")


@dataclass
class PipelineReport:
    """Stage-by-stage funnel counts plus skip reasons for one run."""

    images_total: int = 0
    images_captioned: int = 0
    images_matched: int = 0
    passages_matched: int = 0
    phrases_candidates: int = 0
    phrases_selected: int = 0
    questions_generated: int = 0
    questions_kept: int = 0
    examples_emitted: int = 0
    skips: dict[str, int] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class PipelineResult:
    examples: list[GeneratedExample]
    audit: list[AuditRecord]
    report: PipelineReport


@dataclass(frozen=True)
class FilterDecision:
    """Outcome of the QA-consistency filter, carrying audit evidence."""

    keep: bool
    qa_answer: str | None
    f1: float

    def __bool__(self) -> bool:
        return self.keep


def match_passages(
    image: ImageRecord,
    adapters: ModelAdapters,
    index: InvertedIndex,
    store: PassageStore,
    m: int,
    params: BM25Params,
) -> list[Passage]:
    """Caption the image (reusing a provided caption) and retrieve top-m passages.

    Fills ``image.caption`` in place when it was missing. Captioner failures
    propagate as AdapterError; an empty result means no passage matched.
    """
    if image.caption is None:
        image.caption = adapters.captioner(image.image_id)
    ranked = search(index, params, image.caption, m)
    return [store.get(passage_id) for passage_id in ranked.ids()]


def select_answer_phrases(phrases: list[CandidatePhrase]) -> list[CandidatePhrase]:
    """Keep answer-worthy phrases: no pronoun/determiner tokens, deduplicated.

    Duplicate surfaces (case-insensitive) collapse to the earliest offset.
    Output is ordered by character offset.
    """
    earliest: dict[str, CandidatePhrase] = {}
    for phrase in phrases:
        if not phrase.tokens:
            continue
        if any(tok.pos_tag in _EXCLUDED_TAGS for tok in phrase.tokens):
            continue
        key = phrase.text.lower()
        kept = earliest.get(key)
        if kept is None or phrase.offset < kept.offset:
            earliest[key] = phrase
    return sorted(earliest.values(), key=lambda p: p.offset)


def highlight_answer(passage_text: str, phrase: CandidatePhrase) -> str:
    """Wrap the first occurrence of the phrase surface in highlight markers.

    Raises ValueError when the recorded offset does not reproduce the
    surface text (a stale or corrupt annotation).
    """
    surface = phrase.text
    if passage_text[phrase.offset : phrase.offset + len(surface)] != surface:
        raise ValueError(
            f"phrase {surface!r} not found at recorded offset {phrase.offset}"
        )
    idx = passage_text.find(surface)
    return f"{passage_text[:idx]}{HIGHLIGHT} {surface} {HIGHLIGHT}{passage_text[idx + len(surface):]}"


def generate_question(adapters: ModelAdapters, passage: Passage, phrase: CandidatePhrase) -> str:
    """Ask the question generator about the highlighted answer span."""
    return adapters.question_generator(highlight_answer(passage.text, phrase))


def filter_question(
    adapters: ModelAdapters,
    question: str,
    passage: Passage,
    answer: str,
    t: float,
) -> FilterDecision:
    """Keep the question only if QA recovers the answer with rouge-1 F1 > t.

    A QA failure keeps nothing (conservative) and is visible as a None
    qa_answer in the decision.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"filter threshold must lie in [0, 1], got {t}")
    try:
        qa_answer = adapters.question_answerer(question, passage.text)
    except AdapterError as exc:
        log.debug("qa failed for %r on %s: %s", question, passage.id, exc)
        return FilterDecision(keep=False, qa_answer=None, f1=0.0)
    f1 = rouge1(qa_answer, answer).f1
    return FilterDecision(keep=f1 > t, qa_answer=qa_answer, f1=f1)


def sample_negative(
    index: InvertedIndex,
    store: PassageStore,
    question: str,
    answer: str,
    pool_size: int,
    params: BM25Params,
) -> Passage | None:
    """Highest-ranked passage for the question that does not contain the answer."""
    ranked = search(index, params, question, pool_size)
    for passage_id in ranked.ids():
        passage = store.get(passage_id)
        if not contains_answer(passage.text, answer):
            return passage
    return None


def _example_valid(example: GeneratedExample, store: PassageStore) -> bool:
    return (
        bool(example.question.strip())
        and contains_answer(store.text(example.positive_passage_id), example.answer)
        and not contains_answer(store.text(example.negative_passage_id), example.answer)
    )


def _process_image(
    image: ImageRecord,
    store: PassageStore,
    index: InvertedIndex,
    adapters: ModelAdapters,
    config: PipelineConfig,
) -> PipelineResult:
    report = PipelineReport(images_total=1)
    skips: Counter[str] = Counter()
    examples: list[GeneratedExample] = []
    audit: list[AuditRecord] = []

    def done() -> PipelineResult:
        report.skips = dict(skips)
        return PipelineResult(examples=examples, audit=audit, report=report)

    try:
        passages = match_passages(image, adapters, index, store, config.m, config.bm25_params)
    except AdapterError as exc:
        log.info("skipping %s: captioner failed (%s)", image.image_id, exc)
        skips["caption_failed"] += 1
        return done()
    report.images_captioned = 1
    if not passages:
        log.info("skipping %s: caption matched no passages", image.image_id)
        skips["no_bm25_hits"] += 1
        return done()
    report.images_matched = 1
    report.passages_matched = len(passages)

    for passage in passages:
        try:
            raw_phrases = adapters.annotator(passage.text)
        except AdapterError as exc:
            log.info("skipping passage %s: annotator failed (%s)", passage.id, exc)
            skips["annotator_failed"] += 1
            continue
        report.phrases_candidates += len(raw_phrases)
        selected = select_answer_phrases(raw_phrases)
        if config.max_phrases_per_passage is not None:
            selected = selected[: config.max_phrases_per_passage]
        report.phrases_selected += len(selected)

        for phrase in selected:
            phrase = replace(phrase, source_passage_id=passage.id)
            try:
                answer_present = contains_answer(passage.text, phrase.text)
            except ValueError:
                answer_present = False
            if not answer_present:
                skips["answer_not_in_positive"] += 1
                continue
            try:
                question = generate_question(adapters, passage, phrase)
            except ValueError as exc:
                log.info("dropping phrase %r: %s", phrase.text, exc)
                skips["phrase_offset_mismatch"] += 1
                continue
            except AdapterError as exc:
                log.info("dropping phrase %r: question generation failed (%s)", phrase.text, exc)
                skips["qg_failed"] += 1
                continue
            if not question.strip():
                skips["qg_failed"] += 1
                continue
            report.questions_generated += 1

            decision = filter_question(adapters, question, passage, phrase.text, config.t)
            if not decision.keep:
                skips["qa_failed" if decision.qa_answer is None else "filtered_low_overlap"] += 1
                continue
            report.questions_kept += 1

            negative = sample_negative(
                index, store, question, phrase.text, config.negative_pool_size, config.bm25_params
            )
            if negative is None:
                log.info("dropping %r: every candidate negative contains the answer", question)
                skips["negative_not_found"] += 1
                continue

            example = GeneratedExample(
                question=question,
                image_id=image.image_id,
                answer=phrase.text,
                positive_passage_id=passage.id,
                negative_passage_id=negative.id,
            )
            if not _example_valid(example, store):
                log.warning("dropping invalid tuple for %s: %r", image.image_id, example)
                skips["invariant_violation"] += 1
                continue
            examples.append(example)
            audit.append(
                AuditRecord(
                    image_id=image.image_id,
                    positive_passage_id=passage.id,
                    question=question,
                    answer=phrase.text,
                    qa_answer=decision.qa_answer or "",
                    rouge_f1=decision.f1,
                )
            )
            report.examples_emitted += 1
    return done()


def _merge(into: PipelineReport, part: PipelineReport) -> None:
    into.images_total += part.images_total
    into.images_captioned += part.images_captioned
    into.images_matched += part.images_matched
    into.passages_matched += part.passages_matched
    into.phrases_candidates += part.phrases_candidates
    into.phrases_selected += part.phrases_selected
    into.questions_generated += part.questions_generated
    into.questions_kept += part.questions_kept
    into.examples_emitted += part.examples_emitted
    for reason, count in part.skips.items():
        into.skips[reason] = into.skips.get(reason, 0) + count


def run_pipeline(
    images: list[ImageRecord],
    store: PassageStore,
    index: InvertedIndex,
    adapters: ModelAdapters,
    config: PipelineConfig | None = None,
    workers: int = 1,
) -> PipelineResult:
    """Generate training tuples for every image; output order is canonical.

    Examples are ordered by (input image order, positive passage rank,
    phrase offset) regardless of ``workers``: images are processed
    independently and results merged in input order, so the worker count
    can never change the output.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    config = config or PipelineConfig()

    if workers == 1 or len(images) <= 1:
        parts = [_process_image(image, store, index, adapters, config) for image in images]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(lambda image: _process_image(image, store, index, adapters, config), images)
            )

    result = PipelineResult(examples=[], audit=[], report=PipelineReport())
    for part in parts:
        result.examples.extend(part.examples)
        result.audit.extend(part.audit)
        _merge(result.report, part.report)
    log.info(
        "pipeline: %d images -> %d examples (%d skips)",
        result.report.images_total,
        result.report.examples_emitted,
        sum(result.report.skips.values()),
    )
    return result


# --- dataset serialization ---------------------------------------------------


def write_dataset(examples: list[GeneratedExample], path) -> None:
    """Write tuples as JSON lines with a fixed key order (byte-stable)."""
    with open(path, "w", encoding="utf-8") as fh:
        for example in examples:
            fh.write(json.dumps(example.to_json_dict(), ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")


def load_dataset(path) -> list[GeneratedExample]:
    examples = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                examples.append(
                    GeneratedExample(
                        question=record["question"],
                        image_id=record["image_id"],
                        answer=record["answer"],
                        positive_passage_id=record["positive_passage_id"],
                        negative_passage_id=record["negative_passage_id"],
                    )
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad dataset record ({exc})") from exc
    return examples


def write_audit(audit: list[AuditRecord], path) -> None:
    """Sidecar with the QA answers and overlap scores behind each kept tuple."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in audit:
            fh.write(json.dumps(asdict(record), ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")
