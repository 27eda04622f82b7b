"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines and timings. Oracles used here are independent of the code paths
they check: brute-force scoring from raw texts, finite differences,
Simpson integration of the t density, and one-line re-summations.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from smoothrank.cli import main as cli_main
from smoothrank.corpus import build_candidate_lists, load_documents, load_queries, write_candidates
from smoothrank.evaluation import (
    SweepRow,
    bonferroni,
    evaluate,
    paired_t_test,
    write_sweep_csv,
)
from smoothrank.ranker import (
    FEATURE_DIM,
    HIDDEN_DIM,
    ModelParams,
    backward,
    forward,
    init_params,
)
from smoothrank.retrieval import BM25NegativeSampler, build_index, retrieve_top_k, tokenize
from smoothrank.smoothing import (
    CONSTANT,
    Schedule,
    SmoothingPolicy,
    TargetDistribution,
    cross_entropy,
    epsilon_at,
    ls_target,
    parse_policy,
    wsls_target,
)
from smoothrank.synthetic import make_collection
from smoothrank.trainer import TrainConfig, train

DATA_DIR = Path(__file__).parent / "data"

K1 = 1.2
B = 0.75

EXPERIMENT_SEEDS = (1, 2, 3, 4, 5)
EXPERIMENT_INSTANCES = 5000
EXPERIMENT_SWITCH = 2500
EXPERIMENT_LR = 2e-2


def report(criterion, name, t0):
    print(f"ACCEPTANCE {criterion} ({name}): PASS ({time.perf_counter() - t0:.2f}s)")


@pytest.fixture(scope="module")
def synthetic_experiment():
    """The shared 1000-doc / 200-query collection with NS_bm25 candidates."""
    corpus, queries, qrels = make_collection(1000, 200, 20, seed=7)
    index = build_index(corpus)
    sampler = BM25NegativeSampler(index, seed=0)
    lists = build_candidate_lists(queries, qrels, sampler, 10)
    return corpus, queries, index, lists


def test_criterion_1_label_distribution_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(123)
    for _ in range(10000):
        y = int(rng.integers(0, 2))
        s = float(rng.uniform(0, 1))
        eps = float(rng.uniform(0, 1))
        target = wsls_target(y, s, eps)
        assert abs(target.p_nonrel + target.p_rel - 1.0) <= 1e-12
        assert wsls_target(y, 0.5, eps) == ls_target(y, eps)
        assert wsls_target(1, s, eps) == ls_target(1, eps)
        s2 = float(rng.uniform(0, 1))
        lo, hi = sorted((s, s2))
        assert wsls_target(0, lo, eps).p_rel <= wsls_target(0, hi, eps).p_rel
    report(1, "label distributions", t0)


def test_criterion_2_schedule_suite(tmp_path):
    t0 = time.perf_counter()
    policy = SmoothingPolicy("ls", 0.35)
    for x in (1, 2, 17, 1000, 25000):
        schedule = Schedule("two_stage", x)
        assert epsilon_at(schedule, policy, x - 1) == 0.35
        assert epsilon_at(schedule, policy, x) == 0.0
        values = [epsilon_at(schedule, policy, i) for i in range(0, x + 50)]
        steps = [(a, b) for a, b in zip(values, values[1:]) if a != b]
        assert steps == [(0.35, 0.0)]
        assert values.index(0.0) == x

    # a full 1,000-instance run: switching at the end of the budget must be
    # bitwise identical to never switching
    corpus, queries, qrels = make_collection(60, 12, 4, seed=3)
    index = build_index(corpus)
    lists = build_candidate_lists(queries, qrels, BM25NegativeSampler(index, seed=0), 6)
    common = dict(batch_size=32, total_instances=1000, seed=4, n=6)
    cfg_const = TrainConfig(policy=SmoothingPolicy("ls", 0.2), schedule=CONSTANT, **common)
    cfg_switch = TrainConfig(
        policy=SmoothingPolicy("ls", 0.2), schedule=Schedule("two_stage", 1000), **common
    )
    train(cfg_const, corpus, queries, index, lists, checkpoint_path=tmp_path / "const.bin")
    train(cfg_switch, corpus, queries, index, lists, checkpoint_path=tmp_path / "switch.bin")
    assert (tmp_path / "const.bin").read_bytes() == (tmp_path / "switch.bin").read_bytes()
    report(2, "schedules", t0)


def test_criterion_3_gradient_check():
    t0 = time.perf_counter()
    rng = np.random.default_rng(31)
    h = 1e-5
    d_dim, h_dim = 12, 7
    checked = 0
    worst = 0.0
    while checked < 100:
        params = ModelParams(
            rng.normal(0, 0.5, size=(d_dim, h_dim)),
            rng.normal(0, 0.5, size=h_dim),
            rng.normal(0, 0.5, size=(h_dim, 2)),
            rng.normal(0, 0.5, size=2),
        )
        x = rng.normal(size=d_dim)
        # finite differences are invalid across a relu kink; regenerate if
        # a pre-activation sits near zero
        if np.any(np.abs(x @ params.W1 + params.b1) < 1e-3):
            continue
        p_rel = float(rng.uniform(0.05, 0.95))
        target = TargetDistribution(1 - p_rel, p_rel)
        _, hidden = forward(params, x)
        analytic = backward(params, x, hidden, target)
        for name, tensor in params.tensors().items():
            grad = analytic.tensors()[name].reshape(-1)
            flat = tensor.reshape(-1)
            for i in range(flat.size):
                keep = flat[i]
                flat[i] = keep + h
                up = cross_entropy(target, forward(params, x)[0])
                flat[i] = keep - h
                down = cross_entropy(target, forward(params, x)[0])
                flat[i] = keep
                numeric = (up - down) / (2 * h)
                rel = abs(grad[i] - numeric) / max(abs(grad[i]), abs(numeric), 1e-8)
                worst = max(worst, rel)
        checked += 1
    assert worst <= 1e-5, f"max relative gradient error {worst}"
    report(3, f"gradient check, max rel err {worst:.2e}", t0)


def test_criterion_4_bm25_retrieval_oracle():
    t0 = time.perf_counter()
    corpus = load_documents(DATA_DIR / "bm25_fixture_docs.jsonl")
    queries = load_queries(DATA_DIR / "bm25_fixture_queries.jsonl")
    assert len(corpus) == 100 and len(queries) == 20
    index = build_index(corpus)

    # brute force: re-derive df and score every document from raw texts
    tokenized = {doc.id: tokenize(doc.text) for doc in corpus}
    n = len(tokenized)
    avg = sum(len(t) for t in tokenized.values()) / n
    df = {}
    for tokens in tokenized.values():
        for term in set(tokens):
            df[term] = df.get(term, 0) + 1

    for query in queries:
        expected = {}
        for doc_id, tokens in tokenized.items():
            score = 0.0
            for term in dict.fromkeys(tokenize(query.text)):
                tf = tokens.count(term)
                if tf == 0:
                    continue
                idf = math.log(1 + (n - df[term] + 0.5) / (df[term] + 0.5))
                score += idf * tf * (K1 + 1) / (tf + K1 * (1 - B + B * len(tokens) / avg))
            if score > 0.0:
                expected[doc_id] = score
        want = sorted(expected.items(), key=lambda kv: (-kv[1], kv[0]))[:10]
        got = retrieve_top_k(index, query.text, 10)
        assert [d for d, _ in got] == [d for d, _ in want], query.id
        for (_, got_score), (_, want_score) in zip(got, want):
            assert abs(got_score - want_score) <= 1e-12
    report(4, "BM25 top-10 vs brute force, 100 docs x 20 queries", t0)


def test_criterion_5_metric_and_statistics_oracles(synthetic_experiment):
    t0 = time.perf_counter()
    corpus, queries, index, lists = synthetic_experiment

    # evaluate() against an independent re-scoring pass
    model = init_params(99, FEATURE_DIM, HIDDEN_DIM)
    subset = lists[:40]
    result = evaluate(model, corpus, queries, index, subset, k=1)
    from smoothrank.ranker import extract_features

    hits = 0
    for cl in subset:
        query = queries.get(cl.query_id)
        scored = []
        for cand in cl.candidates:
            logits, _ = forward(model, extract_features(query.text, corpus.text(cand.doc_id), index))
            shifted = np.exp(logits - logits.max())
            scored.append((-float(shifted[1] / shifted.sum()), cand.doc_id))
        if min(scored)[1] == cl.relevant_id():
            hits += 1
    assert result.value == hits / len(subset)

    # recall_at_k spot identities on real rankings
    from smoothrank.evaluation import rank_candidates, recall_at_k

    for cl in subset[:5]:
        ranking = rank_candidates(model, corpus, index, queries.get(cl.query_id), cl)
        rank = ranking.index(cl.relevant_id())
        for k in range(1, 11):
            assert recall_at_k(ranking, cl.relevant_id(), k) == (1 if rank < k else 0)

    # paired t-test p-values vs numerical integration on 20 fixed cases
    def t_density(x, dof):
        c = math.exp(math.lgamma((dof + 1) / 2) - math.lgamma(dof / 2)) / math.sqrt(dof * math.pi)
        return c * (1.0 + x * x / dof) ** (-(dof + 1) / 2)

    def p_by_integration(t, dof, panels=20000):
        t = abs(t)
        xs = np.linspace(0.0, t, 2 * panels + 1)
        ys = t_density(xs, dof)
        h = t / (2 * panels)
        integral = h / 3 * (ys[0] + 4 * ys[1:-1:2].sum() + 2 * ys[2:-2:2].sum() + ys[-1])
        return 1.0 - 2.0 * integral

    fixed_cases = [
        ([1.0, 2.0, 3.0, 4.0, 5.0], [0.0, 0.0, 0.0, 0.0, 0.0]),  # t = sqrt(18), n=5
        ([0.5, 0.8], [0.1, 0.9]),
        ([0.1, 0.2, 0.35], [0.3, 0.1, 0.2]),
        ([1.5, 2.5, 3.0, 1.0], [1.0, 2.0, 3.5, 0.5]),
        ([0.62, 0.58, 0.61, 0.60, 0.59], [0.55, 0.54, 0.60, 0.52, 0.58]),
        ([0.2, 0.4, 0.6, 0.8, 1.0, 1.2], [0.25, 0.35, 0.65, 0.75, 1.05, 1.15]),
        ([3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0], [2.0, 7.0, 1.0, 8.0, 2.0, 8.0, 1.0]),
        ([0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2], [0.85, 0.82, 0.65, 0.63, 0.52, 0.38, 0.33, 0.18]),
        ([1.0, 1.1, 0.9, 1.05, 0.95, 1.02, 0.98, 1.03, 0.97], [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]),
        ([2.1, 2.2], [2.0, 2.5]),
        ([0.0, 1.0, 0.5], [0.5, 0.5, 0.0]),
        ([10.0, 12.0, 11.0, 13.0], [11.0, 11.5, 10.0, 14.0]),
        ([0.33, 0.66, 0.99, 0.11, 0.44], [0.22, 0.77, 0.88, 0.12, 0.55]),
        ([5.0, 4.0, 3.0, 2.0, 1.0, 0.0], [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]),
        ([0.601, 0.598, 0.604, 0.599, 0.602], [0.600, 0.601, 0.600, 0.601, 0.600]),
        ([1.0, 2.0, 4.0, 8.0, 16.0], [1.5, 2.5, 3.5, 9.0, 15.0]),
        ([0.5, 0.25, 0.75, 0.125], [0.25, 0.5, 0.625, 0.25]),
        ([7.0, 7.1, 6.9, 7.05, 7.2, 6.8, 7.15], [7.0, 7.0, 7.0, 7.0, 7.0, 7.0, 7.0]),
        ([0.05, 0.95, 0.45, 0.55, 0.35, 0.65], [0.1, 0.9, 0.5, 0.5, 0.4, 0.6]),
        ([2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0, 29.0],
         [2.5, 2.5, 5.5, 6.5, 11.5, 12.5, 17.5, 18.5, 23.5, 28.5]),
    ]
    assert len(fixed_cases) == 20
    for a, b in fixed_cases:
        t_stat, p = paired_t_test(a, b)
        if math.isinf(t_stat):
            assert p == 0.0
            continue
        if t_stat == 0.0:
            assert p == 1.0
            continue
        want = p_by_integration(t_stat, len(a) - 1)
        assert abs(p - want) <= 1e-8, (a, b)
    # the DERIVED headline case, frozen from an independent reference
    t_stat, p = paired_t_test([1.0, 2.0, 3.0, 4.0, 5.0], [0.0] * 5)
    assert t_stat == pytest.approx(math.sqrt(18.0), abs=1e-12)
    assert p == pytest.approx(0.013235599563682695, abs=1e-10)

    # bonferroni clamps
    assert bonferroni([0.03], 2) == [0.06]
    assert bonferroni([0.8], 2) == [1.0]
    assert bonferroni([0.5], 1) == [0.5]
    report(5, "metric and statistics oracles", t0)


def test_criterion_6_end_to_end_experiment(synthetic_experiment, tmp_path):
    t0 = time.perf_counter()
    corpus, queries, index, lists = synthetic_experiment

    def config_for(policy_name, seed):
        if policy_name == "hard":
            policy, schedule = parse_policy("hard", 0.0)
        else:
            policy, schedule = parse_policy(policy_name, 0.2, EXPERIMENT_SWITCH)
        return TrainConfig(
            policy=policy,
            schedule=schedule,
            batch_size=32,
            total_instances=EXPERIMENT_INSTANCES,
            lr=EXPERIMENT_LR,
            seed=seed,
            n=10,
        )

    frozen_values = []
    for seed in EXPERIMENT_SEEDS:
        frozen = init_params(seed, FEATURE_DIM, HIDDEN_DIM)
        frozen_values.append(evaluate(frozen, corpus, queries, index, lists, 1).value)

    policies = ("hard", "t-ls", "t-wsls")
    values = {}
    logs = {}
    for policy_name in policies:
        for seed in EXPERIMENT_SEEDS:
            cfg = config_for(policy_name, seed)
            params, log = train(cfg, corpus, queries, index, lists)
            result = evaluate(
                params, corpus, queries, index, lists, 1, config_id=cfg.config_id, seed=seed
            )
            values[(policy_name, seed)] = result.value
            logs[(policy_name, seed)] = log

    # every trained model beats the analytic random baseline 1/n = 0.1,
    # significantly better than the frozen-at-init model under the
    # artifact's own paired t-test
    for policy_name in policies:
        trained = [values[(policy_name, seed)] for seed in EXPERIMENT_SEEDS]
        assert all(v > 0.1 for v in trained), (policy_name, trained)
        t_stat, p = paired_t_test(trained, frozen_values)
        assert t_stat > 0.0, (policy_name, trained, frozen_values)
        assert p < 0.05, (policy_name, p)

    # trainlog epsilon transitions occur exactly at the switch point: the
    # first zero entry is the batch containing global instance 2500
    first_zero_at = 32 * math.ceil(EXPERIMENT_SWITCH / 32)  # 2528
    for policy_name in ("t-ls", "t-wsls"):
        for seed in EXPERIMENT_SEEDS:
            entries = logs[(policy_name, seed)].entries
            eps_column = [(e.instances_seen, e.epsilon) for e in entries]
            transitions = [
                (prev, cur)
                for prev, cur in zip(eps_column, eps_column[1:])
                if prev[1] != cur[1]
            ]
            assert len(transitions) == 1
            (before, after) = transitions[0]
            assert before == (first_zero_at - 32, 0.2)
            assert after == (first_zero_at, 0.0)

    # bitwise reproducibility per seed
    cfg = config_for("t-wsls", 3)
    train(cfg, corpus, queries, index, lists, checkpoint_path=tmp_path / "rerun1.bin")
    train(cfg, corpus, queries, index, lists, checkpoint_path=tmp_path / "rerun2.bin")
    assert (tmp_path / "rerun1.bin").read_bytes() == (tmp_path / "rerun2.bin").read_bytes()

    # report, but do not assert, the smoothing-vs-baseline direction
    from smoothrank.evaluation import student_t_critical

    rows = []
    for policy_name in policies:
        group = [values[(policy_name, seed)] for seed in EXPERIMENT_SEEDS]
        label = "baseline" if policy_name == "hard" else policy_name
        eps = 0.0 if policy_name == "hard" else 0.2
        mean = sum(group) / len(group)
        std = math.sqrt(sum((v - mean) ** 2 for v in group) / (len(group) - 1))
        ci = student_t_critical(0.95, len(group) - 1) * std / math.sqrt(len(group))
        rows.append(SweepRow(label, eps, mean, std, ci, len(group)))
    write_sweep_csv(rows, tmp_path / "sweep.csv")
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == "policy,epsilon,mean,std,ci95,runs"
    assert len(lines) == 4
    elapsed = time.perf_counter() - t0
    assert elapsed < 300, f"end-to-end experiment took {elapsed:.0f}s"
    report(6, "end-to-end synthetic experiment", t0)


def test_criterion_7_ns_score_analysis(synthetic_experiment, tmp_path, capsys):
    t0 = time.perf_counter()
    _, _, _, lists = synthetic_experiment
    candidates_path = tmp_path / "candidates.tsv"
    write_candidates(lists, candidates_path)
    histogram_path = tmp_path / "histogram.csv"
    assert cli_main(["analyze-ns", "--candidates", str(candidates_path), "--out", str(histogram_path)]) == 0

    lines = histogram_path.read_text().splitlines()
    assert lines[0] == "bin_lower,bin_upper,count"
    bins = [line.split(",") for line in lines[1:21]]
    mean_line = lines[21].split(",")
    assert mean_line[0] == "mean"

    negative_count = sum(1 for cl in lists for c in cl.candidates if c.label == 0)
    assert sum(int(b[2]) for b in bins) == negative_count == int(mean_line[2])

    # one-line re-summation oracle over the file the command actually read
    file_scores = [
        float(line.split("\t")[3])
        for line in candidates_path.read_text().splitlines()[1:]
        if line.split("\t")[2] == "0"
    ]
    oracle_mean = sum(file_scores) / len(file_scores)
    assert 0.0 <= oracle_mean <= 1.0
    assert float(mean_line[1]) == pytest.approx(oracle_mean, abs=5e-7)  # printed at 6dp
    report(7, f"ns-score analysis, mean {oracle_mean:.4f}", t0)
