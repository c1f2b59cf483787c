from pathlib import Path

import pytest

from threadkb.bench import load_corpus, tasks_from_json
from threadkb.gateway import HashingEmbedder
from threadkb.store import build_index

CORPUS_DIR = Path(__file__).resolve().parent.parent / "data" / "synthetic_tsgs"
FIXTURE_DIR = Path(__file__).resolve().parent.parent / "data" / "icm_fixture"


@pytest.fixture(scope="session")
def corpus():
    return load_corpus(CORPUS_DIR)


@pytest.fixture(scope="session")
def corpus_docs(corpus):
    return corpus[0]


@pytest.fixture(scope="session")
def corpus_lus(corpus):
    return corpus[1]


@pytest.fixture(scope="session")
def corpus_manifest(corpus):
    return corpus[2]


@pytest.fixture(scope="session")
def corpus_kb(corpus_lus):
    return build_index(corpus_lus, HashingEmbedder())


@pytest.fixture(scope="session")
def corpus_tasks():
    return tasks_from_json(CORPUS_DIR / "tasks.json")
