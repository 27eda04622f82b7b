"""Deterministic training loop.

The budget is counted in training instances, not epochs: the flattened
(query, candidate) pairs are shuffled with the run seed and cycled, with a
fresh shuffle per pass, until the configured number of instances has been
consumed. The smoothing schedule advances on the global instance counter,
so a two-stage switch can land mid-batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .corpus import CandidateList, Corpus, QuerySet
from .ranker import (
    FEATURE_DIM,
    HIDDEN_DIM,
    AdamState,
    ModelParams,
    adam_step,
    backward,
    extract_features,
    forward,
    init_params,
    save_checkpoint,
)
from .retrieval import InvertedIndex
from .smoothing import (
    CONSTANT,
    Schedule,
    SmoothingPolicy,
    TrainInstance,
    cross_entropy,
    epsilon_at,
    policy_label,
    target_for,
)
from .validation import check_positive_int


@dataclass(frozen=True)
class TrainConfig:
    policy: SmoothingPolicy
    schedule: Schedule = CONSTANT
    batch_size: int = 32
    total_instances: int = 50000
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    seed: int = 1
    n: int = 10

    def __post_init__(self):
        check_positive_int("batch_size", self.batch_size)
        check_positive_int("total_instances", self.total_instances)
        check_positive_int("n", self.n, minimum=2)
        if self.schedule.kind == "two_stage" and self.schedule.switch_at > self.total_instances:
            raise ValueError(
                f"switch_at ({self.schedule.switch_at}) must not exceed "
                f"total_instances ({self.total_instances})"
            )

    @property
    def label(self) -> str:
        return policy_label(self.policy, self.schedule)

    @property
    def config_id(self) -> str:
        return f"{self.label}_eps{self.policy.epsilon:g}"


class LogEntry(NamedTuple):
    """One row per batch; epsilon is the scheduled value at the logged
    counter, i.e. epsilon_at(schedule, policy, instances_seen)."""

    instances_seen: int
    epsilon: float
    loss: float


@dataclass
class TrainLog:
    entries: list[LogEntry] = field(default_factory=list)
    checkpoint_path: str | None = None


def make_instance_stream(
    candidate_lists: Sequence[CandidateList],
    total_instances: int,
    seed: int,
) -> list[TrainInstance]:
    """Flatten, shuffle, and cycle the (query, candidate) pairs.

    Pass p is shuffled with seed + p, so the stream is fully determined by
    (candidate_lists, total_instances, seed).
    """
    if not candidate_lists:
        raise ValueError("no candidate lists to train on")
    check_positive_int("total_instances", total_instances)
    base = [
        TrainInstance(cl.query_id, c.doc_id, c.label, c.ns_score)
        for cl in candidate_lists
        for c in cl.candidates
    ]
    stream: list[TrainInstance] = []
    pass_index = 0
    while len(stream) < total_instances:
        order = np.random.default_rng(seed + pass_index).permutation(len(base))
        remaining = total_instances - len(stream)
        stream.extend(base[i] for i in order[:remaining])
        pass_index += 1
    return stream


def train(
    config: TrainConfig,
    corpus: Corpus,
    queries: QuerySet,
    index: InvertedIndex,
    candidate_lists: Sequence[CandidateList],
    checkpoint_path=None,
) -> tuple[ModelParams, TrainLog]:
    """Run the full training budget and return the final weights and log.

    Single-threaded by contract so identical (config, seed) reruns are
    bitwise identical. When checkpoint_path is given, weights and optimizer
    state are saved there at the end.
    """
    instances = make_instance_stream(candidate_lists, config.total_instances, config.seed)
    params = init_params(config.seed, FEATURE_DIM, HIDDEN_DIM)
    state = AdamState.zeros_like(params)
    log = TrainLog()

    query_text = {q.id: q.text for q in queries}
    doc_text = {d.id: d.text for d in corpus}
    feature_cache: dict[tuple[str, str], np.ndarray] = {}

    def features_for(inst: TrainInstance) -> np.ndarray:
        key = (inst.query_id, inst.doc_id)
        cached = feature_cache.get(key)
        if cached is None:
            if inst.query_id not in query_text:
                raise ValueError(f"candidate list references unknown query id {inst.query_id!r}")
            if inst.doc_id not in doc_text:
                raise ValueError(f"candidate list references unknown document id {inst.doc_id!r}")
            cached = extract_features(query_text[inst.query_id], doc_text[inst.doc_id], index)
            feature_cache[key] = cached
        return cached

    consumed = 0
    while consumed < config.total_instances:
        batch = instances[consumed : consumed + config.batch_size]
        grad_sum = params.zeros_like()
        loss_sum = 0.0
        for offset, inst in enumerate(batch):
            eps_eff = epsilon_at(config.schedule, config.policy, consumed + offset)
            target = target_for(config.policy, inst.label, inst.ns_score, eps_eff)
            x = features_for(inst)
            logits, hidden = forward(params, x)
            loss_sum += cross_entropy(target, logits)
            grad_sum.add_scaled(backward(params, x, hidden, target), 1.0)
        scale = 1.0 / len(batch)
        grad_mean = params.zeros_like()
        grad_mean.add_scaled(grad_sum, scale)
        adam_step(params, grad_mean, state, config.lr, config.beta1, config.beta2, config.eps_adam)
        consumed += len(batch)
        log.entries.append(
            LogEntry(
                consumed,
                epsilon_at(config.schedule, config.policy, consumed),
                loss_sum * scale,
            )
        )

    if checkpoint_path is not None:
        save_checkpoint(params, state, checkpoint_path)
        log.checkpoint_path = str(checkpoint_path)
    return params, log


def write_trainlog(log: TrainLog, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("instances_seen,epsilon,loss\n")
        for entry in log.entries:
            fh.write(f"{entry.instances_seen},{entry.epsilon:.6f},{entry.loss:.6f}\n")
