"""Scikit-learn style wrapper around the training pipeline.

SmoothedPointwiseRanker follows the estimator protocol (get_params /
set_params / fit returning self), so it composes with sklearn tooling such
as clone and parameter grids. The collection context (corpus, queries,
index) is passed to fit alongside the candidate lists.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .corpus import CandidateList, Corpus, QuerySet
from .evaluation import evaluate, rank_candidates
from .ranker import extract_features, forward
from .retrieval import InvertedIndex
from .smoothing import parse_policy
from .trainer import TrainConfig, train


class SmoothedPointwiseRanker(BaseEstimator):
    """Pointwise neural ranker trained with a configurable smoothing policy.

    Parameters
    ----------
    policy : one of "hard", "ls", "wsls", "t-ls", "t-wsls"
        Target construction rule; the t- prefix enables the two-stage
        schedule that reverts to hard labels after switch_at instances.
    epsilon : float in [0, 1]
        Smoothing strength (must be 0 for the hard policy).
    switch_at : int or None
        Instance index at which two-stage policies drop to hard labels;
        defaults to half of total_instances.
    batch_size, total_instances, lr, beta1, beta2, eps_adam, seed, n
        Training-loop configuration, mirroring TrainConfig.
    """

    def __init__(
        self,
        policy: str = "ls",
        epsilon: float = 0.2,
        switch_at: int | None = None,
        batch_size: int = 32,
        total_instances: int = 50000,
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps_adam: float = 1e-8,
        seed: int = 1,
        n: int = 10,
    ):
        self.policy = policy
        self.epsilon = epsilon
        self.switch_at = switch_at
        self.batch_size = batch_size
        self.total_instances = total_instances
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps_adam = eps_adam
        self.seed = seed
        self.n = n

    def _build_config(self) -> TrainConfig:
        switch_at = self.switch_at
        if self.policy.startswith("t-") and switch_at is None:
            switch_at = self.total_instances // 2
        epsilon = self.epsilon if self.policy != "hard" else 0.0
        policy, schedule = parse_policy(self.policy, epsilon, switch_at)
        return TrainConfig(
            policy=policy,
            schedule=schedule,
            batch_size=self.batch_size,
            total_instances=self.total_instances,
            lr=self.lr,
            beta1=self.beta1,
            beta2=self.beta2,
            eps_adam=self.eps_adam,
            seed=self.seed,
            n=self.n,
        )

    def fit(self, X, y=None, *, corpus: Corpus, queries: QuerySet, index: InvertedIndex):
        """Train on a sequence of CandidateLists.

        y is ignored; the labels live inside the candidate lists.
        """
        candidate_lists = list(X)
        if not candidate_lists:
            raise ValueError("fit requires at least one candidate list")
        config = self._build_config()
        params, log = train(config, corpus, queries, index, candidate_lists)
        self.config_ = config
        self.params_ = params
        self.log_ = log
        self.corpus_ = corpus
        self.queries_ = queries
        self.index_ = index
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError(
                "This SmoothedPointwiseRanker instance is not fitted yet; call fit first."
            )

    def predict_proba(self, X) -> np.ndarray:
        """Class probabilities for (query_text, doc_text) pairs, shape (n, 2)."""
        self._check_fitted()
        probs = []
        for query_text, doc_text in X:
            features = extract_features(query_text, doc_text, self.index_)
            logits, _ = forward(self.params_, features)
            shifted = np.exp(logits - logits.max())
            probs.append(shifted / shifted.sum())
        return np.array(probs)

    def predict(self, X) -> np.ndarray:
        """Binary relevance predictions for (query_text, doc_text) pairs."""
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)

    def rank(self, candidate_list: CandidateList) -> list[str]:
        """Candidate doc ids ordered by predicted relevance."""
        self._check_fitted()
        query = self.queries_.get(candidate_list.query_id)
        return rank_candidates(self.params_, self.corpus_, self.index_, query, candidate_list)

    def score(self, X, y=None, k: int = 1) -> float:
        """Mean recall@k over candidate lists (higher is better)."""
        self._check_fitted()
        result = evaluate(
            self.params_, self.corpus_, self.queries_, self.index_, list(X), k,
            config_id=self.config_.config_id, seed=self.seed,
        )
        return result.value
