import json
from pathlib import Path

import pytest
from hypothesis import settings

from smoothrank.corpus import Corpus, Document, Qrels, Query, QuerySet, load_documents, load_queries

# reproducible property tests: same examples on every run
settings.register_profile("deterministic", derandomize=True)
settings.load_profile("deterministic")

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def toy_corpus():
    """Three small documents with overlapping vocabulary."""
    return Corpus(
        [
            Document("a", "the cat sat on the mat"),
            Document("b", "the dog chased the cat"),
            Document("c", "birds fly over the mat"),
        ]
    )


@pytest.fixture
def small_collection():
    """Twelve docs, three queries, one relevant doc each; enough for n=10 lists."""
    docs = [Document(f"d{i:02d}", f"filler{i} shared topic{i % 3} word{i}") for i in range(9)]
    docs += [
        Document("d09", "apples oranges pears shared"),
        Document("d10", "apples apples bananas shared"),
        Document("d11", "trains planes shared automobiles"),
    ]
    corpus = Corpus(docs)
    queries = QuerySet(
        [
            Query("q0", "apples shared"),
            Query("q1", "trains shared"),
            Query("q2", "topic0 shared"),
        ]
    )
    qrels = Qrels(
        {
            "q0": frozenset({"d09"}),
            "q1": frozenset({"d11"}),
            "q2": frozenset({"d00"}),
        }
    )
    return corpus, queries, qrels


@pytest.fixture(scope="session")
def bm25_fixture():
    """The checked-in 100-doc / 20-query retrieval fixture."""
    corpus = load_documents(DATA_DIR / "bm25_fixture_docs.jsonl")
    queries = load_queries(DATA_DIR / "bm25_fixture_queries.jsonl")
    return corpus, queries


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
