"""Collection loading and candidate-list assembly.

File formats:
    documents.jsonl / queries.jsonl
        UTF-8, one JSON object per line with string fields "id" and "text".
    qrels.txt
        whitespace-separated lines "qid 0 docid rel" with rel in {0, 1};
        rel=0 lines are dropped (unjudged and judged-non-relevant are
        treated identically).
    candidates.tsv
        tab-separated columns qid, docid, label, ns_score with a header
        row; ns_score is printed with 6 decimal places.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

from .validation import check_binary_label, check_unit_interval


class DataFormatError(ValueError):
    """An input file violates its documented format."""


@dataclass(frozen=True)
class Document:
    id: str
    text: str


@dataclass(frozen=True)
class Query:
    id: str
    text: str


class Corpus:
    """Ordered, id-unique document collection. Immutable after construction."""

    def __init__(self, documents: Iterable[Document]):
        self._docs: list[Document] = []
        self._by_id: dict[str, Document] = {}
        for doc in documents:
            if not doc.id:
                raise DataFormatError("document id must be non-empty")
            if doc.id in self._by_id:
                raise DataFormatError(f"duplicate document id: {doc.id!r}")
            self._docs.append(doc)
            self._by_id[doc.id] = doc

    def __len__(self) -> int:
        return len(self._docs)

    def __iter__(self) -> Iterator[Document]:
        return iter(self._docs)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._by_id

    def ids(self) -> list[str]:
        return [d.id for d in self._docs]

    def text(self, doc_id: str) -> str:
        try:
            return self._by_id[doc_id].text
        except KeyError:
            raise KeyError(f"unknown document id: {doc_id!r}") from None


class QuerySet:
    """Ordered, id-unique query collection."""

    def __init__(self, queries: Iterable[Query]):
        self._queries: list[Query] = []
        self._by_id: dict[str, Query] = {}
        for q in queries:
            if not q.id:
                raise DataFormatError("query id must be non-empty")
            if q.id in self._by_id:
                raise DataFormatError(f"duplicate query id: {q.id!r}")
            self._queries.append(q)
            self._by_id[q.id] = q

    def __len__(self) -> int:
        return len(self._queries)

    def __iter__(self) -> Iterator[Query]:
        return iter(self._queries)

    def __contains__(self, query_id: str) -> bool:
        return query_id in self._by_id

    def get(self, query_id: str) -> Query:
        try:
            return self._by_id[query_id]
        except KeyError:
            raise KeyError(f"unknown query id: {query_id!r}") from None

    def text(self, query_id: str) -> str:
        return self.get(query_id).text


@dataclass(frozen=True)
class Qrels:
    """Binary relevance judgments: query id -> set of relevant doc ids."""

    judgments: dict[str, frozenset[str]]

    def relevant_for(self, query_id: str) -> frozenset[str]:
        return self.judgments.get(query_id, frozenset())


class Candidate(NamedTuple):
    doc_id: str
    label: int
    ns_score: float


@dataclass(frozen=True)
class CandidateList:
    """One query's candidate documents: exactly one relevant, n total."""

    query_id: str
    candidates: tuple[Candidate, ...]
    n: int

    def __post_init__(self):
        if len(self.candidates) != self.n:
            raise ValueError(
                f"candidate list for {self.query_id!r} has {len(self.candidates)} "
                f"entries, expected n={self.n}"
            )
        labels = [c.label for c in self.candidates]
        if sum(labels) != 1:
            raise ValueError(
                f"candidate list for {self.query_id!r} must contain exactly one "
                f"relevant document, found {sum(labels)}"
            )
        ids = [c.doc_id for c in self.candidates]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate doc ids in candidate list for {self.query_id!r}")
        for c in self.candidates:
            check_binary_label("label", c.label)
            check_unit_interval("ns_score", c.ns_score)

    def relevant_id(self) -> str:
        for c in self.candidates:
            if c.label == 1:
                return c.doc_id
        raise AssertionError("unreachable: validated in __post_init__")


def _parse_jsonl(path, kind: str):
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}: line {lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise DataFormatError(f"{path}: line {lineno}: expected a JSON object")
            for field in ("id", "text"):
                if field not in obj or not isinstance(obj[field], str):
                    raise DataFormatError(
                        f"{path}: line {lineno}: missing or non-string field {field!r}"
                    )
            records.append((obj["id"], obj["text"], lineno))
    seen = {}
    for rid, _, lineno in records:
        if rid in seen:
            raise DataFormatError(
                f"{path}: line {lineno}: duplicate {kind} id {rid!r} (first seen on line {seen[rid]})"
            )
        seen[rid] = lineno
    return records


def load_documents(path) -> Corpus:
    """Load a JSONL document file, preserving file order."""
    return Corpus(Document(rid, text) for rid, text, _ in _parse_jsonl(path, "document"))


def load_queries(path) -> QuerySet:
    """Load a JSONL query file, preserving file order."""
    return QuerySet(Query(rid, text) for rid, text, _ in _parse_jsonl(path, "query"))


def load_qrels(path) -> Qrels:
    """Load TREC-style binary qrels; only rel=1 lines are stored."""
    judgments: dict[str, set[str]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise DataFormatError(
                    f"{path}: line {lineno}: expected 'qid 0 docid rel', got {line.strip()!r}"
                )
            qid, _, docid, rel_str = parts
            if rel_str not in ("0", "1"):
                raise DataFormatError(
                    f"{path}: line {lineno}: relevance must be 0 or 1, got {rel_str!r}"
                )
            if rel_str == "1":
                judgments.setdefault(qid, set()).add(docid)
    return Qrels({qid: frozenset(ids) for qid, ids in judgments.items()})


def build_candidate_lists(queries: QuerySet, qrels: Qrels, sampler, n: int) -> list[CandidateList]:
    """Assemble one n-candidate list per query: the positive first, then n-1
    sampled negatives with their normalized sampler scores.

    The positive is the lexicographically first relevant doc id for the
    query; its other relevant documents are excluded from the negative pool.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    lists = []
    for query in queries:
        relevant = qrels.relevant_for(query.id)
        if not relevant:
            raise ValueError(f"query {query.id!r} has no relevant document in the qrels")
        positive_id = min(relevant)
        positive_ns, negatives = sampler.sample(query, relevant, positive_id, n - 1)
        candidates = [Candidate(positive_id, 1, positive_ns)]
        candidates.extend(Candidate(neg.doc_id, 0, neg.normalized_score) for neg in negatives)
        lists.append(CandidateList(query.id, tuple(candidates), n))
    return lists


def write_candidates(lists: Iterable[CandidateList], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("qid\tdocid\tlabel\tns_score\n")
        for cl in lists:
            for c in cl.candidates:
                fh.write(f"{cl.query_id}\t{c.doc_id}\t{c.label}\t{c.ns_score:.6f}\n")


def load_candidates(path) -> list[CandidateList]:
    """Read candidates.tsv back into CandidateLists (consecutive rows group by qid)."""
    lists: list[CandidateList] = []
    current_qid = None
    current: list[Candidate] = []

    def flush():
        if current_qid is not None:
            lists.append(CandidateList(current_qid, tuple(current), len(current)))

    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if lineno == 1 and line.startswith("qid\t"):
                continue
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 4:
                raise DataFormatError(f"{path}: line {lineno}: expected 4 tab-separated columns")
            qid, docid, label_str, score_str = parts
            try:
                label = int(label_str)
                score = float(score_str)
            except ValueError:
                raise DataFormatError(f"{path}: line {lineno}: malformed label or ns_score") from None
            if qid != current_qid:
                flush()
                current_qid = qid
                current = []
            current.append(Candidate(docid, label, score))
    flush()
    return lists
