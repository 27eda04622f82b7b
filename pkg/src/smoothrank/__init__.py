"""smoothrank: pointwise learning-to-rank with label smoothing,
weak-supervision smoothing and BM25 negative sampling."""

__version__ = "0.1.0"

from .corpus import (
    Candidate,
    CandidateList,
    Corpus,
    DataFormatError,
    Document,
    Qrels,
    Query,
    QuerySet,
    build_candidate_lists,
    load_candidates,
    load_documents,
    load_qrels,
    load_queries,
    write_candidates,
)
from .estimator import SmoothedPointwiseRanker
from .evaluation import (
    Aggregate,
    RunResult,
    aggregate_runs,
    bonferroni,
    epsilon_sweep,
    evaluate,
    paired_t_test,
    rank_candidates,
    recall_at_k,
)
from .ranker import (
    AdamState,
    ModelParams,
    adam_step,
    backward,
    extract_features,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .retrieval import (
    BM25NegativeSampler,
    InvertedIndex,
    RandomNegativeSampler,
    ScoredCandidate,
    ScoreStats,
    bm25_score,
    build_index,
    minmax_normalize,
    ns_score_stats,
    retrieve_top_k,
    sample_negatives_bm25,
    sample_negatives_random,
    tokenize,
)
from .smoothing import (
    Schedule,
    SmoothingPolicy,
    TargetDistribution,
    TrainInstance,
    ce_gradient,
    cross_entropy,
    epsilon_at,
    hard_target,
    ls_target,
    parse_policy,
    wsls_target,
)
from .trainer import TrainConfig, TrainLog, make_instance_stream, train

__all__ = [
    "__version__",
    "Candidate",
    "CandidateList",
    "Corpus",
    "DataFormatError",
    "Document",
    "Qrels",
    "Query",
    "QuerySet",
    "build_candidate_lists",
    "load_candidates",
    "load_documents",
    "load_qrels",
    "load_queries",
    "write_candidates",
    "SmoothedPointwiseRanker",
    "Aggregate",
    "RunResult",
    "aggregate_runs",
    "bonferroni",
    "epsilon_sweep",
    "evaluate",
    "paired_t_test",
    "rank_candidates",
    "recall_at_k",
    "AdamState",
    "ModelParams",
    "adam_step",
    "backward",
    "extract_features",
    "forward",
    "init_params",
    "load_checkpoint",
    "save_checkpoint",
    "BM25NegativeSampler",
    "InvertedIndex",
    "RandomNegativeSampler",
    "ScoredCandidate",
    "ScoreStats",
    "bm25_score",
    "build_index",
    "minmax_normalize",
    "ns_score_stats",
    "retrieve_top_k",
    "sample_negatives_bm25",
    "sample_negatives_random",
    "tokenize",
    "Schedule",
    "SmoothingPolicy",
    "TargetDistribution",
    "TrainInstance",
    "ce_gradient",
    "cross_entropy",
    "epsilon_at",
    "hard_target",
    "ls_target",
    "parse_policy",
    "wsls_target",
    "TrainConfig",
    "TrainLog",
    "make_instance_stream",
    "train",
]
