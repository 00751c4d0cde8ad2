#!/usr/bin/env python3
"""Build the committed test fixtures: corpus, images, queries, judgments.

Also freezes golden pipeline outputs (dataset + audit) produced with the
stub adapters and default settings, so regressions show up as byte diffs.
Deterministic: a fixed seed drives every word choice.
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from mmret import (  # noqa: E402
    PipelineConfig,
    StubAdapters,
    build_index,
    load_images,
    load_passages,
    run_pipeline,
    write_audit,
    write_dataset,
)

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

ENTITIES = [
    "lion", "eagle", "dolphin", "camel", "falcon",
    "panda", "otter", "bison", "cobra", "heron",
    "gecko", "lynx", "walrus", "ibex", "toucan",
    "beaver", "oryx", "puffin", "jaguar", "tapir",
]

NUMBER_WORDS = [
    "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "twenty", "thirty", "forty", "fifty", "sixty",
    "seventy", "eighty", "ninety",
]
DISTANCE_UNITS = ["feet", "meters", "yards"]
WEIGHT_UNITS = ["kilograms", "pounds", "stones"]

ADJECTIVES = ["gentle", "swift", "sturdy", "cautious", "clever", "patient", "quiet", "bold"]
TERRAINS = ["savanna", "foothills", "wetland", "canyon", "delta", "plateau", "thicket", "lagoon"]
REGIONS = ["eastern", "southern", "northern", "western", "coastal", "inland"]
TIMES = ["dawn", "dusk", "midday", "twilight", "autumn", "winter", "monsoon"]
PARTS = ["tail", "plumage", "hide", "snout", "fur", "crest"]
WATCHERS = ["Visitors", "Rangers", "Herders", "Farmers", "Travelers", "Scouts"]
VILLAGES = [
    "Kebara", "Oronvale", "Tessin", "Maruka", "Veldny", "Sorippa", "Ankove", "Brelach",
    "Quimsa", "Dorvath", "Ellmere", "Fenwick", "Galt", "Harmuz", "Ilvaro", "Jesper",
    "Kolvan", "Lurdim", "Mossby", "Nerak", "Ostrel", "Pellan", "Rontu", "Sivenn",
    "Tarnow", "Umbra", "Verlat", "Wystan", "Yarrol", "Zemkal",
]

DISTRACTOR_TEMPLATES = [
    "The old bridge {verb} a bend of the {adj} river below the {terrain}.",
    "A market stall appears beside a fountain of the {adj} square at {time}.",
    "A {adj} storm rolled over the harbor of {village} before {time}.",
    "An abandoned mill stands along a road of dust to {village}.",
    "The ferry from {village} to {village2} crosses a strait of the bay at {time}.",
    "A {adj} wind carried dust over a rim of the {terrain} all day.",
    "The lighthouse keeper holds a lamp of the tower at {time}.",
    "Traders from {village} sell a bale of {adj} cloth at the river port.",
]
DISTRACTOR_VERBS = ["spans", "crosses", "covers"]


def unique_facts(rng: random.Random, units: list[str], count: int, taken: set[str]) -> list[str]:
    facts = []
    while len(facts) < count:
        fact = f"{rng.choice(NUMBER_WORDS)} {rng.choice(units)}"
        if fact not in taken:
            taken.add(fact)
            facts.append(fact)
    return facts


def entity_passages(rng: random.Random, entity: str, distance: str, weight: str) -> list[str]:
    terrain, terrain2, terrain3 = rng.sample(TERRAINS, 3)
    time1, time2 = rng.sample(TIMES, 2)
    return [
        f"The {entity} makes a home in the {rng.choice(REGIONS)} {terrain} of the wild. "
        f"The {entity} can jump {distance} across a stretch of open {terrain}.",
        f"An adult {entity} weighs {weight} and the {entity} hunts near the edge of the {terrain2} at {time1}.",
        f"The {entity} is a {rng.choice(ADJECTIVES)} animal of the {rng.choice(REGIONS)} {terrain3}.",
        f"{rng.choice(WATCHERS)} watch the {entity} from a ridge of the {terrain2} at {rng.choice(TIMES)}.",
        f"Its {rng.choice(PARTS)} helps the {entity} through a season of {time2} in the {terrain3}.",
        f"Stories about the {entity} travel from a market of {rng.choice(VILLAGES)} to {rng.choice(VILLAGES)}.",
    ]


def distractor_passage(rng: random.Random) -> str:
    template = rng.choice(DISTRACTOR_TEMPLATES)
    village, village2 = rng.sample(VILLAGES, 2)
    return template.format(
        adj=rng.choice(ADJECTIVES),
        terrain=rng.choice(TERRAINS),
        time=rng.choice(TIMES),
        village=village,
        village2=village2,
        verb=rng.choice(DISTRACTOR_VERBS),
    )


def main() -> None:
    rng = random.Random(7)
    FIXTURES.mkdir(parents=True, exist_ok=True)

    taken: set[str] = set()
    distances = unique_facts(rng, DISTANCE_UNITS, len(ENTITIES), taken)
    weights = unique_facts(rng, WEIGHT_UNITS, len(ENTITIES), taken)

    passages: list[tuple[str, str]] = []
    for entity, distance, weight in zip(ENTITIES, distances, weights):
        for text in entity_passages(rng, entity, distance, weight):
            passages.append((f"p{len(passages) + 1:03d}", text))
    while len(passages) < 200:
        passages.append((f"p{len(passages) + 1:03d}", distractor_passage(rng)))

    with open(FIXTURES / "corpus.tsv", "w", encoding="utf-8") as fh:
        for pid, text in passages:
            fh.write(f"{pid}\t{text}\n")

    with open(FIXTURES / "images.jsonl", "w", encoding="utf-8") as fh:
        for entity in ENTITIES:
            fh.write(json.dumps({"image_id": f"img-{entity}-01"}) + "\n")

    with open(FIXTURES / "queries.jsonl", "w", encoding="utf-8") as qf, open(
        FIXTURES / "judgments.jsonl", "w", encoding="utf-8"
    ) as jf:
        for i, (entity, distance, weight) in enumerate(zip(ENTITIES, distances, weights)):
            if i % 2 == 0:
                question = f"how far can the {entity} jump"
                answer = distance
            else:
                question = f"how heavy is an adult {entity}"
                answer = weight
            query_id = f"q{i + 1:02d}"
            qf.write(
                json.dumps(
                    {"query_id": query_id, "question": question, "image_id": f"img-{entity}-01"}
                )
                + "\n"
            )
            jf.write(json.dumps({"query_id": query_id, "answers": [answer]}) + "\n")

    # Freeze pipeline outputs under the stub adapters and default settings.
    store = load_passages(FIXTURES / "corpus.tsv")
    images = load_images(FIXTURES / "images.jsonl")
    index = build_index(store)
    result = run_pipeline(images, store, index, StubAdapters(), PipelineConfig())
    write_dataset(result.examples, FIXTURES / "golden_dataset.jsonl")
    write_audit(result.audit, FIXTURES / "golden_audit.jsonl")
    (FIXTURES / "golden_report.json").write_text(
        json.dumps(result.report.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    print(f"wrote {len(passages)} passages, {len(ENTITIES)} images, "
          f"{len(result.examples)} golden examples -> {FIXTURES}")


if __name__ == "__main__":
    main()
