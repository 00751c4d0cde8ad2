import json
from pathlib import Path

import pytest

from mmret import build_index, load_images, load_judgments, load_passages

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def store():
    return load_passages(FIXTURES / "corpus.tsv")


@pytest.fixture
def images():
    # Function scope: pipeline runs fill captions in on the records.
    return load_images(FIXTURES / "images.jsonl")


@pytest.fixture(scope="session")
def index(store):
    return build_index(store)


@pytest.fixture(scope="session")
def judgments():
    return load_judgments(FIXTURES / "judgments.jsonl")


@pytest.fixture(scope="session")
def held_out_queries():
    with open(FIXTURES / "queries.jsonl", "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
