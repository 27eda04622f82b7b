"""Re-ranking evaluation, seed aggregation, and significance statistics.

The significance machinery is self-contained: two-sided Student t p-values
come from the regularized incomplete beta function evaluated with a
continued fraction (absolute error budget 1e-10), and the critical values
for confidence intervals are found by bisecting that same tail function.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .corpus import CandidateList, Corpus, Query, QuerySet
from .ranker import ModelParams, extract_features, forward
from .retrieval import InvertedIndex
from .smoothing import SmoothingPolicy, Schedule, parse_policy
from .trainer import TrainConfig, train
from .validation import check_unit_interval


@dataclass(frozen=True)
class RunResult:
    """One (config, seed) evaluation: the metric value and per-query hits."""

    config_id: str
    seed: int
    metric_name: str
    value: float
    per_query: tuple[tuple[str, int], ...]

    def __post_init__(self):
        if self.per_query:
            mean = sum(v for _, v in self.per_query) / len(self.per_query)
            if abs(mean - self.value) > 1e-12:
                raise ValueError("value must equal the mean of per_query values")


@dataclass(frozen=True)
class Aggregate:
    """Mean, sample standard deviation and 95% CI half-width over seeds."""

    mean: float
    std: float
    ci95_half_width: float
    runs: int


def rank_candidates(
    model: ModelParams,
    corpus: Corpus,
    index: InvertedIndex,
    query: Query,
    candidate_list: CandidateList,
) -> list[str]:
    """Candidates sorted by predicted relevance probability, descending;
    ties broken by ascending doc id."""
    scored = []
    for cand in candidate_list.candidates:
        features = extract_features(query.text, corpus.text(cand.doc_id), index)
        logits, _ = forward(model, features)
        shifted = np.exp(logits - logits.max())
        p_rel = float(shifted[1] / shifted.sum())
        scored.append((-p_rel, cand.doc_id))
    scored.sort()
    return [doc_id for _, doc_id in scored]


def recall_at_k(ranking: Sequence[str], relevant_id: str, k: int) -> int:
    """1 if the relevant document is within the top k positions, else 0."""
    if relevant_id not in ranking:
        raise ValueError(f"relevant document {relevant_id!r} not present in the ranking")
    if not 1 <= k <= len(ranking):
        raise ValueError(f"k must be in [1, {len(ranking)}], got {k}")
    return 1 if relevant_id in ranking[:k] else 0


def evaluate(
    model: ModelParams,
    corpus: Corpus,
    queries: QuerySet,
    index: InvertedIndex,
    candidate_lists: Sequence[CandidateList],
    k: int,
    config_id: str = "",
    seed: int = 0,
) -> RunResult:
    """Mean recall@k over the candidate lists (metric name R<n>@<k>)."""
    if not candidate_lists:
        raise ValueError("no candidate lists to evaluate")
    sizes = {cl.n for cl in candidate_lists}
    if len(sizes) != 1:
        raise ValueError(f"candidate lists have mixed sizes {sorted(sizes)}")
    n = sizes.pop()
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    per_query = []
    for cl in candidate_lists:
        ranking = rank_candidates(model, corpus, index, queries.get(cl.query_id), cl)
        per_query.append((cl.query_id, recall_at_k(ranking, cl.relevant_id(), k)))
    value = sum(v for _, v in per_query) / len(per_query)
    return RunResult(config_id, seed, f"R{n}@{k}", value, tuple(per_query))


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise RuntimeError(f"incomplete beta continued fraction failed to converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0, x in [0, 1]."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    front = math.exp(
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, df: int) -> float:
    """P(|T| >= |t|) for T ~ Student t with df degrees of freedom."""
    if df < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {df}")
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def student_t_critical(confidence: float, df: int) -> float:
    """t value with P(|T| <= t) == confidence, by bisection on the tail."""
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence}")
    tail = 1.0 - confidence
    lo, hi = 0.0, 1.0
    while student_t_two_sided_p(hi, df) > tail:
        hi *= 2.0
        if hi > 1e18:
            raise RuntimeError("bisection bracket for the t critical value blew up")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if student_t_two_sided_p(mid, df) > tail:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Two-sided paired Student t-test on equally long sequences.

    Degenerate rules keep pipelines total: all-zero differences give
    (0, 1); zero-variance nonzero-mean differences give (signed inf, 0).
    """
    if len(a) != len(b):
        raise ValueError(f"paired samples must have equal length, got {len(a)} and {len(b)}")
    n = len(a)
    if n < 2:
        raise ValueError(f"need at least 2 pairs, got {n}")
    diffs = [float(x) - float(y) for x, y in zip(a, b)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, mean), 0.0
    t = mean / math.sqrt(var / n)
    return t, student_t_two_sided_p(t, n - 1)


def bonferroni(p_values: Sequence[float], m: int) -> list[float]:
    """Adjust each p-value to min(1, m * p)."""
    if m < len(p_values) or m < 1:
        raise ValueError(f"m must be >= the number of comparisons ({len(p_values)}), got {m}")
    for p in p_values:
        check_unit_interval("p-value", p)
    return [min(1.0, m * p) for p in p_values]


def aggregate_runs(results: Sequence[RunResult]) -> Aggregate:
    """Mean, sample std and Student-t 95% CI half-width over >= 2 runs."""
    if len(results) < 2:
        raise ValueError(f"need at least 2 runs to aggregate, got {len(results)}")
    config_ids = {r.config_id for r in results}
    metrics = {r.metric_name for r in results}
    if len(config_ids) != 1 or len(metrics) != 1:
        raise ValueError(
            f"runs must share config_id and metric, got {sorted(config_ids)} / {sorted(metrics)}"
        )
    values = [r.value for r in results]
    n = len(values)
    mean = sum(values) / n
    std = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))
    ci = student_t_critical(0.95, n - 1) * std / math.sqrt(n)
    return Aggregate(mean, std, ci, n)


@dataclass(frozen=True)
class SweepRow:
    policy: str
    epsilon: float
    mean: float
    std: float
    ci95: float
    runs: int


BASELINE_LABEL = "baseline"


def _config_for(base: TrainConfig, policy_name: str, epsilon: float, switch_at: int | None) -> TrainConfig:
    if policy_name == BASELINE_LABEL:
        policy, schedule = SmoothingPolicy("hard", 0.0), Schedule("constant")
    else:
        policy, schedule = parse_policy(policy_name, epsilon, switch_at)
    return replace(base, policy=policy, schedule=schedule)


def epsilon_sweep(
    base_config: TrainConfig,
    corpus: Corpus,
    queries: QuerySet,
    index: InvertedIndex,
    train_lists: Sequence[CandidateList],
    eval_lists: Sequence[CandidateList] | None = None,
    *,
    epsilons: Sequence[float],
    seeds: Sequence[int],
    policies: Sequence[str] = ("t-ls", "t-wsls"),
    k: int = 1,
    switch_at: int | None = None,
    threads: int = 1,
) -> tuple[list[SweepRow], dict[tuple[str, float, int], RunResult]]:
    """Train and evaluate every (policy, epsilon, seed) cell plus the
    no-smoothing baseline; returns aggregated rows and the per-cell results.

    Cells are independent, so they may run on a thread pool; rows are merged
    in deterministic (policy, epsilon, seed) order regardless.
    """
    if not seeds:
        raise ValueError("at least one seed is required")
    if len(seeds) < 2:
        raise ValueError("at least 2 seeds are required to aggregate")
    for eps in epsilons:
        check_unit_interval("epsilon", eps)
    eval_lists = list(eval_lists) if eval_lists is not None else list(train_lists)
    if switch_at is None:
        switch_at = base_config.total_instances // 2

    cells: list[tuple[str, float, int]] = [(BASELINE_LABEL, 0.0, seed) for seed in seeds]
    for policy_name in policies:
        for eps in epsilons:
            for seed in seeds:
                cells.append((policy_name, float(eps), seed))

    def run_cell(cell):
        policy_name, eps, seed = cell
        config = replace(_config_for(base_config, policy_name, eps, switch_at), seed=seed)
        params, _ = train(config, corpus, queries, index, train_lists)
        return evaluate(
            params, corpus, queries, index, eval_lists, k,
            config_id=config.config_id, seed=seed,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run_cell, cells))
    else:
        outcomes = [run_cell(cell) for cell in cells]
    results = dict(zip(cells, outcomes))

    rows = []
    groups: list[tuple[str, float]] = [(BASELINE_LABEL, 0.0)]
    groups += [(p, float(e)) for p in policies for e in epsilons]
    for policy_name, eps in groups:
        group = [results[(policy_name, eps, seed)] for seed in seeds]
        agg = aggregate_runs(group)
        rows.append(SweepRow(policy_name, eps, agg.mean, agg.std, agg.ci95_half_width, agg.runs))
    return rows, results


def write_sweep_csv(rows: Sequence[SweepRow], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("policy,epsilon,mean,std,ci95,runs\n")
        for row in rows:
            fh.write(
                f"{row.policy},{row.epsilon:.6f},{row.mean:.6f},{row.std:.6f},"
                f"{row.ci95:.6f},{row.runs}\n"
            )


def append_results_csv(rows, path) -> None:
    """rows: (config_id, policy, epsilon, seed, metric, value) tuples."""
    new_file = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", encoding="utf-8") as fh:
        if new_file:
            fh.write("config_id,policy,epsilon,seed,metric,value\n")
        for config_id, policy, epsilon, seed, metric, value in rows:
            fh.write(f"{config_id},{policy},{epsilon:.6f},{seed},{metric},{value:.6f}\n")


def significance_report(
    baseline_values: Sequence[float],
    comparisons: Sequence[tuple[str, float, Sequence[float]]],
    alpha: float = 0.05,
    bonferroni_m: int = 2,
) -> str:
    """Human-readable table of seed-paired comparisons against the baseline.

    comparisons holds (policy, epsilon, per-seed values) with values paired
    to baseline_values by position. Markers: significant gain, significant
    loss, or blank, judged on Bonferroni-adjusted p-values.
    """
    raw_ps = []
    for _, _, values in comparisons:
        _, p = paired_t_test(values, baseline_values)
        raw_ps.append(p)
    adjusted = bonferroni(raw_ps, max(bonferroni_m, len(raw_ps))) if raw_ps else []
    base_mean = sum(baseline_values) / len(baseline_values)
    lines = [
        f"{'policy':<10} {'epsilon':>8} {'mean':>9} {'p-value':>10} marker",
        f"{BASELINE_LABEL:<10} {0.0:>8.2f} {base_mean:>9.6f} {'-':>10} ",
    ]
    for (policy_name, eps, values), p_adj in zip(comparisons, adjusted):
        mean = sum(values) / len(values)
        marker = ""
        if p_adj < alpha:
            marker = "▲" if mean > base_mean else "▼"
        lines.append(f"{policy_name:<10} {eps:>8.2f} {mean:>9.6f} {p_adj:>10.6f} {marker}")
    return "\n".join(lines) + "\n"
