"""Tokenization, inverted-index BM25 scoring, negative sampling and
weak-supervision score statistics.

BM25 variant: Lucene-style nonnegative idf with k1=1.2, b=0.75,

    score(q, d) = sum over unique query terms t of
                  idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len/avglen))
    idf(t)      = ln(1 + (N - df + 0.5) / (df + 0.5))

which is nonnegative, so per-query min-max scaling lands in [0, 1].
"""

from __future__ import annotations

import json
import math
import re
import zlib
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .corpus import Corpus, Query
from .smoothing import TrainInstance

K1 = 1.2
B = 0.75

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric character; no stemming."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class InvertedIndex:
    """Term postings plus the per-document statistics BM25 needs.

    postings maps term -> [(doc_id, term_frequency), ...] in corpus order.
    Treated as immutable after build_index.
    """

    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]
    doc_count: int
    avg_doc_length: float
    _tf: dict[str, dict[str, int]] = field(init=False, repr=False)

    def __post_init__(self):
        self._tf = {term: dict(plist) for term, plist in self.postings.items()}

    def df(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def term_frequency(self, term: str, doc_id: str) -> int:
        return self._tf.get(term, {}).get(doc_id, 0)


def build_index(corpus: Corpus) -> InvertedIndex:
    if len(corpus) == 0:
        raise ValueError("cannot index an empty corpus")
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    for doc in corpus:
        tokens = tokenize(doc.text)
        doc_lengths[doc.id] = len(tokens)
        counts: dict[str, int] = {}
        for tok in tokens:
            counts[tok] = counts.get(tok, 0) + 1
        for term, tf in counts.items():
            postings.setdefault(term, []).append((doc.id, tf))
    avg = sum(doc_lengths.values()) / len(doc_lengths)
    return InvertedIndex(postings, doc_lengths, len(doc_lengths), avg)


def idf(index: InvertedIndex, term: str) -> float:
    df = index.df(term)
    return math.log(1.0 + (index.doc_count - df + 0.5) / (df + 0.5))


def _tf_weight(tf: int, doc_len: int, avg_len: float) -> float:
    return tf * (K1 + 1.0) / (tf + K1 * (1.0 - B + B * doc_len / avg_len))


def bm25_score(index: InvertedIndex, query_terms: Sequence[str], doc_id: str) -> float:
    """Score one indexed document; 0 iff it shares no term with the query."""
    if doc_id not in index.doc_lengths:
        raise ValueError(f"unknown document id: {doc_id!r}")
    doc_len = index.doc_lengths[doc_id]
    score = 0.0
    for term in dict.fromkeys(query_terms):
        tf = index.term_frequency(term, doc_id)
        if tf == 0:
            continue
        score += idf(index, term) * _tf_weight(tf, doc_len, index.avg_doc_length)
    return score


def bm25_score_tokens(index: InvertedIndex, query_terms: Sequence[str], doc_tokens: Sequence[str]) -> float:
    """Score an arbitrary token sequence against the index's collection stats.

    Used for feature extraction where the document may not be indexed;
    agrees with bm25_score for documents whose text is in the index.
    """
    doc_len = len(doc_tokens)
    if doc_len == 0:
        return 0.0
    counts: dict[str, int] = {}
    for tok in doc_tokens:
        counts[tok] = counts.get(tok, 0) + 1
    score = 0.0
    for term in dict.fromkeys(query_terms):
        tf = counts.get(term, 0)
        if tf == 0:
            continue
        score += idf(index, term) * _tf_weight(tf, doc_len, index.avg_doc_length)
    return score


def retrieve_top_k(index: InvertedIndex, query_text: str, k: int) -> list[tuple[str, float]]:
    """Top-k documents by BM25, descending score with ascending doc-id ties.

    Documents sharing no term with the query score 0 and are never returned.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores: dict[str, float] = {}
    for term in dict.fromkeys(tokenize(query_text)):
        plist = index.postings.get(term)
        if not plist:
            continue
        term_idf = idf(index, term)
        for doc_id, tf in plist:
            w = term_idf * _tf_weight(tf, index.doc_lengths[doc_id], index.avg_doc_length)
            scores[doc_id] = scores.get(doc_id, 0.0) + w
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:k]


def minmax_normalize(raw_scores: Sequence[float]) -> list[float]:
    """Affine rescale to [0, 1]; a constant list maps to all 0.5."""
    if len(raw_scores) == 0:
        raise ValueError("cannot normalize an empty score list")
    lo = min(raw_scores)
    hi = max(raw_scores)
    if hi == lo:
        return [0.5] * len(raw_scores)
    span = hi - lo
    return [(s - lo) / span for s in raw_scores]


class ScoredCandidate(NamedTuple):
    doc_id: str
    raw_score: float
    normalized_score: float


def _check_pool_size(universe_size: int, n_relevant_in_universe: int, m: int) -> None:
    if universe_size - n_relevant_in_universe < m:
        raise ValueError(
            f"corpus too small: need {m} distinct non-relevant documents, "
            f"only {universe_size - n_relevant_in_universe} available"
        )


def _bm25_pool(index, query_text, relevant_ids, m, rng):
    """Retrieved top-(m + |relevant|) entries plus random zero-score padding,
    min-max normalized together. Returns [(doc_id, raw, normalized)]."""
    in_universe = sum(1 for r in relevant_ids if r in index.doc_lengths)
    _check_pool_size(index.doc_count, in_universe, m)
    retrieved = retrieve_top_k(index, query_text, m + len(relevant_ids))
    non_relevant = [(d, s) for d, s in retrieved if d not in relevant_ids]
    need = m - len(non_relevant)
    pads: list[tuple[str, float]] = []
    if need > 0:
        taken = {d for d, _ in retrieved}
        free = [d for d in index.doc_lengths if d not in relevant_ids and d not in taken]
        order = rng.permutation(len(free))
        pads = [(free[i], 0.0) for i in order[:need]]
    entries = retrieved + pads
    norms = minmax_normalize([s for _, s in entries])
    return [(d, s, ns) for (d, s), ns in zip(entries, norms)]


def sample_negatives_bm25(
    index: InvertedIndex,
    query_text: str,
    relevant_ids: frozenset[str] | set[str],
    m: int,
    rng: np.random.Generator,
) -> list[ScoredCandidate]:
    """The m top-ranked non-relevant documents for the query.

    If fewer than m documents match the query, the list is padded with
    uniformly random non-relevant documents at raw score 0 (rng is only
    consumed in that case). Normalization is min-max over the whole pool.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    pool = _bm25_pool(index, query_text, relevant_ids, m, rng)
    negatives = [ScoredCandidate(d, s, ns) for d, s, ns in pool if d not in relevant_ids]
    return negatives[:m]


def sample_negatives_random(
    corpus: Corpus,
    relevant_ids: frozenset[str] | set[str],
    m: int,
    seed,
) -> list[ScoredCandidate]:
    """m uniform draws without replacement from the non-relevant documents.

    Random sampling carries no similarity signal, so every normalized score
    is fixed at 0.5 (the value that makes weak-supervision smoothing
    coincide with uniform smoothing).
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    free = [doc.id for doc in corpus if doc.id not in relevant_ids]
    if len(free) < m:
        raise ValueError(
            f"corpus too small: need {m} distinct non-relevant documents, "
            f"only {len(free)} available"
        )
    order = rng.permutation(len(free))
    return [ScoredCandidate(free[i], 0.0, 0.5) for i in order[:m]]


def _query_rng(seed: int, query_id: str) -> np.random.Generator:
    # Per-query stream so sampling is independent of query iteration order.
    return np.random.default_rng([seed, zlib.crc32(query_id.encode("utf-8"))])


class BM25NegativeSampler:
    """Negative sampler drawing the top-scoring non-relevant documents."""

    kind = "bm25"

    def __init__(self, index: InvertedIndex, seed: int = 0):
        self.index = index
        self.seed = seed

    def sample(self, query: Query, relevant_ids, positive_id: str, m: int):
        """Returns (positive ns_score, m negatives).

        The positive's score is its raw BM25 score passed through the same
        per-query min-max transform as the pool, clamped to [0, 1]; it is
        recorded for bookkeeping and unused by the smoothing formulas.
        """
        rng = _query_rng(self.seed, query.id)
        pool = _bm25_pool(self.index, query.text, relevant_ids, m, rng)
        negatives = [ScoredCandidate(d, s, ns) for d, s, ns in pool if d not in relevant_ids][:m]
        raws = [s for _, s, _ in pool]
        lo, hi = min(raws), max(raws)
        positive_raw = bm25_score(self.index, tokenize(query.text), positive_id)
        if hi == lo:
            positive_ns = 0.5
        else:
            positive_ns = min(1.0, max(0.0, (positive_raw - lo) / (hi - lo)))
        return positive_ns, negatives


class RandomNegativeSampler:
    """Negative sampler drawing uniformly from the collection."""

    kind = "random"

    def __init__(self, corpus: Corpus, seed: int = 0):
        self.corpus = corpus
        self.seed = seed

    def sample(self, query: Query, relevant_ids, positive_id: str, m: int):
        if positive_id not in self.corpus:
            raise ValueError(f"unknown document id: {positive_id!r}")
        rng = _query_rng(self.seed, query.id)
        return 0.5, sample_negatives_random(self.corpus, relevant_ids, m, rng)


N_HISTOGRAM_BINS = 20


@dataclass(frozen=True)
class ScoreStats:
    """20-bin histogram over [0, 1] plus the mean of negative ns_scores."""

    histogram: tuple[tuple[float, float, int], ...]
    mean: float
    count: int


def ns_score_stats(instances: Iterable[TrainInstance]) -> ScoreStats:
    """Distribution of the sampler scores over negative instances.

    The last bin is upper-inclusive so a score of exactly 1.0 is counted.
    """
    scores = [inst.ns_score for inst in instances if inst.label == 0]
    if not scores:
        raise ValueError("no negative instances to analyze")
    counts = [0] * N_HISTOGRAM_BINS
    for s in scores:
        counts[min(int(s * N_HISTOGRAM_BINS), N_HISTOGRAM_BINS - 1)] += 1
    histogram = tuple(
        (i / N_HISTOGRAM_BINS, (i + 1) / N_HISTOGRAM_BINS, counts[i])
        for i in range(N_HISTOGRAM_BINS)
    )
    return ScoreStats(histogram, sum(scores) / len(scores), len(scores))


def write_score_stats(stats: ScoreStats, path) -> None:
    """histogram.csv: one row per bin, then a final 'mean' summary line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bin_lower,bin_upper,count\n")
        for lower, upper, count in stats.histogram:
            fh.write(f"{lower:.2f},{upper:.2f},{count}\n")
        fh.write(f"mean,{stats.mean:.6f},{stats.count}\n")


INDEX_FORMAT_VERSION = 1


def save_index(index: InvertedIndex, corpus: Corpus, path) -> None:
    """Serialize the index together with the raw document texts.

    Embedding the texts makes the file a self-contained artifact for the
    train/evaluate commands, which need them for feature extraction.
    """
    payload = {
        "format_version": INDEX_FORMAT_VERSION,
        "doc_count": index.doc_count,
        "avg_doc_length": index.avg_doc_length,
        "documents": [{"id": d.id, "text": d.text} for d in corpus],
        "doc_lengths": index.doc_lengths,
        "postings": {term: [[d, tf] for d, tf in plist] for term, plist in index.postings.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_index(path) -> tuple[InvertedIndex, Corpus]:
    from .corpus import DataFormatError, Document

    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: not a valid index file ({exc.msg})") from None
    if payload.get("format_version") != INDEX_FORMAT_VERSION:
        raise DataFormatError(
            f"{path}: unsupported index format version {payload.get('format_version')!r}"
        )
    corpus = Corpus(Document(d["id"], d["text"]) for d in payload["documents"])
    postings = {term: [(d, int(tf)) for d, tf in plist] for term, plist in payload["postings"].items()}
    index = InvertedIndex(
        postings,
        {d: int(n) for d, n in payload["doc_lengths"].items()},
        int(payload["doc_count"]),
        float(payload["avg_doc_length"]),
    )
    if index.doc_count != len(corpus):
        raise DataFormatError(f"{path}: document count does not match embedded corpus")
    mean_length = sum(index.doc_lengths.values()) / index.doc_count
    if abs(index.avg_doc_length - mean_length) > 1e-12:
        raise DataFormatError(f"{path}: avg_doc_length is inconsistent with doc_lengths")
    return index, corpus
