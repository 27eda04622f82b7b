"""Target label distributions, smoothing schedules, and the training loss.

Three ways to build the two-class target for a (query, document) pair with
binary label y:

    hard    all mass on y.
    ls      mix the one-hot target with the uniform distribution:
            (1 - eps) * onehot(y) + eps * [0.5, 0.5].
    wsls    for negatives, replace the uniform component with the sampler's
            normalized retrieval score s, putting eps * s on the relevant
            class; positives keep the uniform mix (the label is trusted).

A two-stage schedule applies the configured eps for the first switch_at
training instances, then switches to hard labels (eps = 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .validation import (
    check_binary_label,
    check_choice,
    check_positive_int,
    check_unit_interval,
)

POLICY_KINDS = ("hard", "ls", "wsls")
SCHEDULE_KINDS = ("constant", "two_stage")
POLICY_NAMES = ("hard", "ls", "wsls", "t-ls", "t-wsls")

_SUM_TOLERANCE = 1e-12


@dataclass(frozen=True)
class TargetDistribution:
    """Two-class target: mass on non-relevant (k=0) and relevant (k=1)."""

    p_nonrel: float
    p_rel: float

    def __post_init__(self):
        check_unit_interval("p_nonrel", self.p_nonrel)
        check_unit_interval("p_rel", self.p_rel)
        if abs(self.p_nonrel + self.p_rel - 1.0) > _SUM_TOLERANCE:
            raise ValueError(
                f"target distribution must sum to 1, got {self.p_nonrel + self.p_rel!r}"
            )

    def as_pair(self) -> tuple[float, float]:
        return (self.p_nonrel, self.p_rel)


def hard_target(y: int) -> TargetDistribution:
    """One-hot target: all mass on the ground-truth class."""
    check_binary_label("y", y)
    return TargetDistribution(0.0, 1.0) if y == 1 else TargetDistribution(1.0, 0.0)


def ls_target(y: int, epsilon: float) -> TargetDistribution:
    """Uniform-mixture smoothing: eps/2 on the wrong class, 1 - eps/2 on y."""
    check_binary_label("y", y)
    check_unit_interval("epsilon", epsilon)
    off = 0.5 * epsilon
    on = 1.0 - off
    return TargetDistribution(off, on) if y == 1 else TargetDistribution(on, off)


def wsls_target(y: int, ns_score: float, epsilon: float) -> TargetDistribution:
    """Weak-supervision smoothing.

    Negatives receive eps * ns_score mass on the relevant class, so the
    model is penalized less for scoring retrieval-similar documents as
    relevant. Positives carry a trusted label and fall back to ls_target;
    ns_score 0.5 reproduces ls_target exactly for either label.
    """
    check_binary_label("y", y)
    check_unit_interval("ns_score", ns_score)
    check_unit_interval("epsilon", epsilon)
    if y == 1:
        return ls_target(1, epsilon)
    p_rel = epsilon * ns_score
    return TargetDistribution(1.0 - p_rel, p_rel)


@dataclass(frozen=True)
class SmoothingPolicy:
    """Which target constructor to use and its smoothing strength."""

    kind: str
    epsilon: float = 0.0

    def __post_init__(self):
        check_choice("policy kind", self.kind, POLICY_KINDS)
        check_unit_interval("epsilon", self.epsilon)
        if self.kind == "hard" and self.epsilon != 0.0:
            raise ValueError("hard policy requires epsilon = 0")


@dataclass(frozen=True)
class Schedule:
    """Constant epsilon, or a two-stage switch to hard labels at switch_at."""

    kind: str = "constant"
    switch_at: int | None = None

    def __post_init__(self):
        check_choice("schedule kind", self.kind, SCHEDULE_KINDS)
        if self.kind == "two_stage":
            if self.switch_at is None:
                raise ValueError("two-stage schedule requires switch_at")
            check_positive_int("switch_at", self.switch_at)


CONSTANT = Schedule("constant")


def epsilon_at(schedule: Schedule, policy: SmoothingPolicy, instances_seen: int) -> float:
    """Effective epsilon after instances_seen training instances.

    Instances with 0-based index < switch_at use the configured epsilon;
    later instances train on hard labels.
    """
    if instances_seen < 0:
        raise ValueError(f"instances_seen must be >= 0, got {instances_seen}")
    if schedule.kind == "two_stage" and instances_seen >= schedule.switch_at:
        return 0.0
    return policy.epsilon


def target_for(policy: SmoothingPolicy, label: int, ns_score: float, effective_epsilon: float) -> TargetDistribution:
    if policy.kind == "hard":
        return hard_target(label)
    if policy.kind == "ls":
        return ls_target(label, effective_epsilon)
    return wsls_target(label, ns_score, effective_epsilon)


def parse_policy(name: str, epsilon: float, switch_at: int | None = None):
    """Map a config string to (SmoothingPolicy, Schedule).

    Accepted names: "hard", "ls", "wsls", "t-ls", "t-wsls"; the t- prefix
    selects the two-stage schedule and requires switch_at.
    """
    check_choice("policy", name, POLICY_NAMES)
    if name.startswith("t-"):
        return SmoothingPolicy(name[2:], epsilon), Schedule("two_stage", switch_at)
    return SmoothingPolicy(name, epsilon), CONSTANT


def policy_label(policy: SmoothingPolicy, schedule: Schedule) -> str:
    if schedule.kind == "two_stage" and policy.kind != "hard":
        return f"t-{policy.kind}"
    return policy.kind


@dataclass(frozen=True)
class TrainInstance:
    """One training example: a (query, document) pair with its binary label
    and the normalized negative-sampler score."""

    query_id: str
    doc_id: str
    label: int
    ns_score: float

    def __post_init__(self):
        check_binary_label("label", self.label)
        check_unit_interval("ns_score", self.ns_score)


def _log_softmax(logits) -> tuple[float, float]:
    z0, z1 = float(logits[0]), float(logits[1])
    m = z0 if z0 > z1 else z1
    lse = m + math.log(math.exp(z0 - m) + math.exp(z1 - m))
    return z0 - lse, z1 - lse


def cross_entropy(target: TargetDistribution, logits) -> float:
    """-sum_k q(k) log softmax(logits)[k], via the log-sum-exp form.

    Zero-mass classes contribute exactly 0 even when their log-probability
    underflows to -inf.
    """
    z0, z1 = float(logits[0]), float(logits[1])
    if not (math.isfinite(z0) and math.isfinite(z1)):
        raise ValueError(f"logits must be finite, got ({z0!r}, {z1!r})")
    lp0, lp1 = _log_softmax(logits)
    loss = 0.0
    if target.p_nonrel != 0.0:
        loss -= target.p_nonrel * lp0
    if target.p_rel != 0.0:
        loss -= target.p_rel * lp1
    return loss


def ce_gradient(target: TargetDistribution, logits) -> tuple[float, float]:
    """Gradient of cross_entropy w.r.t. the logits: softmax(z) - q."""
    lp0, lp1 = _log_softmax(logits)
    return (math.exp(lp0) - target.p_nonrel, math.exp(lp1) - target.p_rel)
