"""Command-line entry point.

Subcommands: index, sample, train, evaluate, sweep, analyze-ns.
Exit codes: 0 success, 1 data errors, 2 usage or I/O errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import evaluation, manifest
from .corpus import (
    DataFormatError,
    build_candidate_lists,
    load_candidates,
    load_qrels,
    load_queries,
    write_candidates,
)
from .ranker import FEATURE_DIM, HIDDEN_DIM, CheckpointError, load_checkpoint
from .retrieval import (
    BM25NegativeSampler,
    RandomNegativeSampler,
    build_index,
    load_index,
    ns_score_stats,
    save_index,
    write_score_stats,
)
from .smoothing import POLICY_NAMES, TrainInstance, parse_policy
from .trainer import TrainConfig, train, write_trainlog


class UsageError(Exception):
    """Bad flag combinations or out-of-range arguments."""


def _resolve_policy_args(args) -> tuple[str, float, int | None]:
    name = args.policy
    epsilon = args.epsilon
    if name == "hard":
        if epsilon is None:
            epsilon = 0.0
        if epsilon != 0.0:
            raise UsageError("--policy hard requires --epsilon 0")
    elif epsilon is None:
        epsilon = 0.2
    if not 0.0 <= epsilon <= 1.0:
        raise UsageError(f"--epsilon must lie in [0, 1], got {epsilon}")
    switch_at = None
    if name.startswith("t-"):
        # Half-budget default when --switch-at is omitted.
        switch_at = args.switch_at if args.switch_at is not None else args.instances // 2
        if not 1 <= switch_at <= args.instances:
            raise UsageError(
                f"--switch-at must lie in [1, --instances], got {switch_at}"
            )
    return name, epsilon, switch_at


def cmd_index(args) -> int:
    from .corpus import load_documents

    corpus = load_documents(args.docs)
    index = build_index(corpus)
    save_index(index, corpus, args.out)
    print(f"doc_count={index.doc_count} avg_doc_length={index.avg_doc_length:.6f}")
    return 0


def cmd_sample(args) -> int:
    if args.n < 2:
        raise UsageError(f"--n must be >= 2, got {args.n}")
    index, corpus = load_index(args.index)
    queries = load_queries(args.queries)
    qrels = load_qrels(args.qrels)
    if args.ns == "bm25":
        sampler = BM25NegativeSampler(index, seed=args.seed)
    else:
        sampler = RandomNegativeSampler(corpus, seed=args.seed)
    lists = build_candidate_lists(queries, qrels, sampler, args.n)
    write_candidates(lists, args.out)
    print(f"wrote {sum(cl.n for cl in lists)} candidates for {len(lists)} queries to {args.out}")
    return 0


def cmd_train(args) -> int:
    name, epsilon, switch_at = _resolve_policy_args(args)
    policy, schedule = parse_policy(name, epsilon, switch_at)
    config = TrainConfig(
        policy=policy,
        schedule=schedule,
        batch_size=args.batch_size,
        total_instances=args.instances,
        lr=args.lr,
        seed=args.seed,
        n=args.n,
    )
    index, corpus = load_index(args.index)
    queries = load_queries(args.queries)
    lists = load_candidates(args.candidates)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    checkpoint_path = out_dir / "checkpoint.bin"
    _, log = train(config, corpus, queries, index, lists, checkpoint_path=checkpoint_path)
    trainlog_path = out_dir / "trainlog.csv"
    write_trainlog(log, trainlog_path)
    manifest.write_manifest(
        out_dir / "manifest.json",
        config,
        inputs={"candidates": args.candidates, "index": args.index, "queries": args.queries},
        outputs=[str(checkpoint_path), str(trainlog_path)],
    )
    print(f"trained {config.label} (epsilon={epsilon:g}, seed={args.seed}) -> {checkpoint_path}")
    return 0


def cmd_evaluate(args) -> int:
    index, corpus = load_index(args.index)
    queries = load_queries(args.queries)
    lists = load_candidates(args.candidates)
    sizes = {cl.n for cl in lists}
    if len(sizes) == 1 and args.k > next(iter(sizes)):
        raise UsageError(f"--k must not exceed the candidate list size ({next(iter(sizes))})")
    params, _ = load_checkpoint(args.checkpoint, expected_dims=(FEATURE_DIM, HIDDEN_DIM))
    run_info = {"config_id": "unknown", "policy": "unknown", "epsilon": 0.0, "seed": 0}
    manifest_path = Path(args.checkpoint).parent / "manifest.json"
    if manifest_path.exists():
        snapshot = manifest.load_manifest(manifest_path)["config"]
        run_info = {
            "config_id": f"{snapshot['policy']}_eps{snapshot['epsilon']:g}",
            "policy": snapshot["policy"],
            "epsilon": snapshot["epsilon"],
            "seed": snapshot["seed"],
        }
    result = evaluation.evaluate(
        params, corpus, queries, index, lists, args.k,
        config_id=run_info["config_id"], seed=run_info["seed"],
    )
    evaluation.append_results_csv(
        [(result.config_id, run_info["policy"], run_info["epsilon"], result.seed,
          result.metric_name, result.value)],
        args.out,
    )
    print(f"{result.metric_name}={result.value:.6f} ({len(result.per_query)} queries)")
    return 0


def cmd_sweep(args) -> int:
    epsilons = [float(e) for e in args.epsilons.split(",") if e != ""]
    policies = [p for p in args.policies.split(",") if p != ""]
    seeds = [int(s) for s in args.seeds.split(",") if s != ""]
    if not seeds:
        raise UsageError("--seeds must list at least one seed")
    if len(seeds) < 2:
        raise UsageError("--seeds must list at least 2 seeds for aggregation")
    for p in policies:
        if p not in POLICY_NAMES or not p.startswith("t-"):
            raise UsageError(f"--policies entries must be two-stage policies, got {p!r}")
    index, corpus = load_index(args.index)
    queries = load_queries(args.queries)
    train_lists = load_candidates(args.candidates)
    eval_lists = load_candidates(args.eval_candidates) if args.eval_candidates else None
    base = TrainConfig(
        policy=parse_policy("hard", 0.0)[0],
        batch_size=args.batch_size,
        total_instances=args.instances,
        lr=args.lr,
        n=train_lists[0].n,
    )
    threads = int(os.environ.get("SMOOTHRANK_THREADS", "1"))
    rows, results = evaluation.epsilon_sweep(
        base, corpus, queries, index, train_lists, eval_lists,
        epsilons=epsilons, seeds=seeds, policies=policies, k=args.k,
        switch_at=args.switch_at, threads=max(1, threads),
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    evaluation.write_sweep_csv(rows, out_dir / "sweep.csv")
    result_rows = []
    for (policy_name, eps, seed), result in sorted(results.items()):
        result_rows.append((result.config_id, policy_name, eps, seed, result.metric_name, result.value))
    evaluation.append_results_csv(result_rows, out_dir / "results.csv")

    baseline_values = [results[(evaluation.BASELINE_LABEL, 0.0, s)].value for s in seeds]
    comparisons = [
        (p, e, [results[(p, e, s)].value for s in seeds])
        for p in policies
        for e in epsilons
    ]
    report = evaluation.significance_report(
        baseline_values, comparisons, bonferroni_m=args.bonferroni_m
    )
    (out_dir / "significance.txt").write_text(report, encoding="utf-8")
    manifest.write_manifest(
        out_dir / "manifest.json",
        base,
        inputs={"candidates": args.candidates, "index": args.index, "queries": args.queries},
        outputs=[str(out_dir / "sweep.csv"), str(out_dir / "results.csv"),
                 str(out_dir / "significance.txt")],
    )
    print(report, end="")
    return 0


def cmd_analyze_ns(args) -> int:
    lists = load_candidates(args.candidates)
    instances = [
        TrainInstance(cl.query_id, c.doc_id, c.label, c.ns_score)
        for cl in lists
        for c in cl.candidates
    ]
    stats = ns_score_stats(instances)
    write_score_stats(stats, args.out)
    print(f"negatives={stats.count} mean={stats.mean:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smoothrank")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build and serialize a BM25 index")
    p.add_argument("--docs", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("sample", help="build candidate lists with a negative sampler")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--ns", choices=("bm25", "random"), default="bm25")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("train", help="train a ranker on candidate lists")
    p.add_argument("--candidates", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--policy", choices=POLICY_NAMES, default="ls")
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--switch-at", dest="switch_at", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=32)
    p.add_argument("--instances", type=int, default=50000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on candidate lists")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="epsilon sensitivity sweep over seeds")
    p.add_argument("--candidates", required=True)
    p.add_argument("--eval-candidates", dest="eval_candidates", default=None)
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--epsilons", default="0,0.1,0.2,0.3,0.4,0.5")
    p.add_argument("--policies", default="t-ls,t-wsls")
    p.add_argument("--seeds", default="1,2,3,4,5")
    p.add_argument("--batch-size", dest="batch_size", type=int, default=32)
    p.add_argument("--instances", type=int, default=50000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--switch-at", dest="switch_at", type=int, default=None)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--bonferroni-m", dest="bonferroni_m", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze-ns", help="histogram of negative sampler scores")
    p.add_argument("--candidates", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze_ns)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataFormatError, CheckpointError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
