"""Chocolate/kale environment.

Documents carry an observable "kaleness" ``q`` in [0, 1]. Chocolate
(``q = 0``) yields large immediate engagement; kale (``q = 1``) yields less
but slowly raises the user's satisfaction, and satisfied users click more.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Tuple

import numpy as np

from ..choice import ChoiceConfig, interest
from ..core import Corpus, Document, ObservabilityConfig, UserState
from .base import Environment, sample_interests, sample_topic_vectors


@dataclass(frozen=True)
class ChocKaleConfig:
    num_topics: int = 5
    mu_choc: float = 1.0
    sigma_choc: float = 1.0
    mu_kale: float = 0.3
    sigma_kale: float = 0.3
    satisfaction_step: float = 0.01
    satisfaction_noise: float = 0.005
    initial_satisfaction: float = 0.5
    # shift of every item score per unit of (satisfaction - 0.5)
    satisfaction_sensitivity: float = 4.0
    affinity_scale: float = 1.0
    episode_length: int = 100
    topic_weights: Optional[Tuple[float, ...]] = None
    user_prior: Mapping[str, Any] = field(default_factory=lambda: {"kind": "uniform", "low": -1.0, "high": 1.0})
    candidate_count: int = 10
    slate_size: int = 1
    fixed_corpus: bool = False
    choice: ChoiceConfig = ChoiceConfig(kind="conditional", score_fn="exp", null_score=0.0)
    observability: ObservabilityConfig = ObservabilityConfig(doc_fields=("topics", "quality"))

    def __post_init__(self):
        if self.sigma_choc <= 0 or self.sigma_kale <= 0:
            raise ValueError("sigma_choc and sigma_kale must be positive")
        if not 0.0 < self.satisfaction_step < 1.0:
            raise ValueError("satisfaction_step must lie in (0, 1)")
        if not 0.0 <= self.initial_satisfaction <= 1.0:
            raise ValueError("initial_satisfaction must lie in [0, 1]")
        if self.satisfaction_noise < 0:
            raise ValueError("satisfaction_noise must be non-negative")
        if not 1 <= self.slate_size <= self.candidate_count:
            raise ValueError("need 1 <= slate_size <= candidate_count")

    def engagement_params(self, kaleness: float) -> Tuple[float, float]:
        """Lognormal (mu, sigma) interpolated linearly in kaleness."""
        q = kaleness
        return (1 - q) * self.mu_choc + q * self.mu_kale, (1 - q) * self.sigma_choc + q * self.sigma_kale

    def expected_engagement(self, kaleness: float) -> float:
        mu, sigma = self.engagement_params(kaleness)
        return math.exp(mu + 0.5 * sigma * sigma)


class ChocKaleEnv(Environment):
    kind = "choc_kale"
    config_cls = ChocKaleConfig

    def sample_user(self, rng: np.random.Generator) -> UserState:
        cfg = self.config
        return UserState(
            sample_interests(cfg.user_prior, cfg.num_topics, rng),
            float(cfg.episode_length),
            float(cfg.initial_satisfaction),
        )

    def sample_corpus(self, rng: np.random.Generator) -> Corpus:
        cfg = self.config
        topics = sample_topic_vectors(cfg.candidate_count, cfg.num_topics, True, cfg.topic_weights, rng)
        kaleness = rng.uniform(0.0, 1.0, cfg.candidate_count)
        docs = tuple(
            Document(i, vec, 1.0, float(q), observable_quality=float(q))
            for i, ((vec, _), q) in enumerate(zip(topics, kaleness))
        )
        return Corpus(docs, config_digest=self.digest)

    def score(self, user: UserState, doc: Document) -> float:
        cfg = self.config
        return cfg.affinity_scale * interest(user, doc) + cfg.satisfaction_sensitivity * (user.satisfaction - 0.5)

    def engagement(self, doc: Document, state: UserState, rng: np.random.Generator) -> float:
        mu, sigma = self.config.engagement_params(doc.quality)
        return float(np.exp(mu + sigma * rng.normal()))

    def transition(self, state, slate, corpus, response, rng) -> UserState:
        if not response.clicked:
            return state
        cfg = self.config
        q = corpus[slate[response.chosen_index]].quality
        drift = cfg.satisfaction_step * (2.0 * q - 1.0) + cfg.satisfaction_noise * rng.normal()
        sat = min(1.0, max(0.0, state.satisfaction + drift))
        return UserState(state.interests, state.budget, sat, state.observable_features)
