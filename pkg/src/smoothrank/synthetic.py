"""Deterministic synthetic retrieval collection.

Documents are grouped into topics that share a vocabulary, so BM25 finds
topically similar distractors for every query. Relevance is carried by a
small pool of marker words: each document owns a random marker triple and
each query names 2-3 markers of its relevant document plus a handful of
topic words. Document lengths, junk words and query composition are
jittered so that an untrained model has no systematic handle on the
positives, while the signal stays learnable.

Also usable as a module CLI to generate input files for the smoothrank
commands:

    python -m smoothrank.synthetic --out data/ --docs 1000 --queries 200
"""

from __future__ import annotations

import numpy as np

from .corpus import Corpus, Document, Qrels, Query, QuerySet

_TOPIC_VOCAB_SIZE = 30
_COMMON_VOCAB_SIZE = 50
_N_MARKERS = 16
_DOC_MARKERS = 3
_DOC_COMMON_WORDS = 8


def make_collection(
    num_docs: int = 1000,
    num_queries: int = 200,
    num_topics: int = 20,
    seed: int = 7,
) -> tuple[Corpus, QuerySet, Qrels]:
    """Build (corpus, queries, qrels) with one relevant document per query."""
    if num_queries > num_docs:
        raise ValueError("cannot have more queries than documents")
    if num_topics < 1:
        raise ValueError("need at least one topic")
    rng = np.random.default_rng(seed)
    topic_vocab = [
        [f"t{t:02d}w{j:02d}" for j in range(_TOPIC_VOCAB_SIZE)] for t in range(num_topics)
    ]
    common_vocab = [f"common{j:02d}" for j in range(_COMMON_VOCAB_SIZE)]
    markers = [f"marker{j:02d}" for j in range(_N_MARKERS)]

    documents = []
    doc_markers: list[list[str]] = []
    for d in range(num_docs):
        topic = d % num_topics
        n_topic = int(rng.integers(10, 19))
        n_junk = int(rng.integers(4, 11))
        own = [markers[i] for i in rng.permutation(_N_MARKERS)[:_DOC_MARKERS]]
        words = [
            topic_vocab[topic][i] for i in rng.integers(0, _TOPIC_VOCAB_SIZE, size=n_topic)
        ]
        words += [
            common_vocab[i]
            for i in rng.integers(0, _COMMON_VOCAB_SIZE, size=_DOC_COMMON_WORDS)
        ]
        words += [f"d{d:04d}x{j}" for j in range(n_junk)]
        words += own
        order = rng.permutation(len(words))
        documents.append(Document(f"d{d:04d}", " ".join(words[i] for i in order)))
        doc_markers.append(own)

    stride = num_docs // num_queries
    queries = []
    judgments = {}
    for q in range(num_queries):
        d = q * stride
        topic = d % num_topics
        n_mk = int(rng.integers(2, 4))
        n_topical = int(rng.integers(3, 7))
        mk = [doc_markers[d][i] for i in rng.permutation(_DOC_MARKERS)[:n_mk]]
        pool = topic_vocab[topic]
        picks = [pool[i] for i in rng.permutation(len(pool))[:n_topical]]
        qid = f"q{q:03d}"
        queries.append(Query(qid, " ".join(mk + picks)))
        judgments[qid] = frozenset({f"d{d:04d}"})

    return Corpus(documents), QuerySet(queries), Qrels(judgments)


def write_collection(corpus: Corpus, queries: QuerySet, qrels: Qrels, out_dir) -> None:
    import json
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "documents.jsonl", "w", encoding="utf-8") as fh:
        for doc in corpus:
            fh.write(json.dumps({"id": doc.id, "text": doc.text}) + "\n")
    with open(out / "queries.jsonl", "w", encoding="utf-8") as fh:
        for query in queries:
            fh.write(json.dumps({"id": query.id, "text": query.text}) + "\n")
    with open(out / "qrels.txt", "w", encoding="utf-8") as fh:
        for query in queries:
            for doc_id in sorted(qrels.relevant_for(query.id)):
                fh.write(f"{query.id} 0 {doc_id} 1\n")


def main(argv=None) -> int:
    import argparse

    parser = argparse.ArgumentParser(description="Generate a synthetic retrieval collection.")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--docs", type=int, default=1000)
    parser.add_argument("--queries", type=int, default=200)
    parser.add_argument("--topics", type=int, default=20)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args(argv)
    corpus, queries, qrels = make_collection(args.docs, args.queries, args.topics, args.seed)
    write_collection(corpus, queries, qrels, args.out)
    print(f"wrote {len(corpus)} documents, {len(queries)} queries to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
