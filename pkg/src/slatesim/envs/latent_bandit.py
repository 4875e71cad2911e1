"""Latent-state bandit environment.

Single-item recommendation. Each user has a static, hidden interest vector;
documents have one topic and a lognormal latent quality. Click probability
is proportional to ``f(affinity_scale * I(u, d) + L_d)``. Reward is the
click indicator, so average reward is the click-through rate.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Tuple

import numpy as np

from ..choice import ChoiceConfig, interest
from ..core import Corpus, Document, ObservabilityConfig, UserState
from .base import Environment, sample_interests, sample_topic_vectors

# Quality lognormal sigma. The log-mean default -sigma^2/2 makes E[L_d] = 1.
DEFAULT_QUALITY_SIGMA = 0.5

HIGH_AFFINITY = 5.0
LOW_AFFINITY = 0.5


@dataclass(frozen=True)
class LatentBanditConfig:
    num_topics: int = 10
    # per-topic log-means; None means -sigma^2/2 for every topic
    quality_log_means: Optional[Tuple[float, ...]] = None
    quality_log_stddev: float = DEFAULT_QUALITY_SIGMA
    affinity_scale: float = HIGH_AFFINITY
    episode_length: int = 500
    topic_weights: Optional[Tuple[float, ...]] = None
    user_prior: Mapping[str, Any] = field(default_factory=lambda: {"kind": "uniform", "low": -1.0, "high": 1.0})
    candidate_count: int = 20
    slate_size: int = 1
    # a fresh candidate set per session, so no document id carries value
    # from one user to the next
    fixed_corpus: bool = False
    choice: ChoiceConfig = ChoiceConfig(kind="conditional", score_fn="exp", null_score=3.0)
    observability: ObservabilityConfig = ObservabilityConfig(doc_fields=("topics",))

    def __post_init__(self):
        if self.num_topics < 1:
            raise ValueError("num_topics must be >= 1")
        if self.quality_log_stddev <= 0:
            raise ValueError("quality_log_stddev must be positive")
        if self.affinity_scale <= 0:
            raise ValueError("affinity_scale must be positive")
        if self.quality_log_means is not None and len(self.quality_log_means) != self.num_topics:
            raise ValueError("quality_log_means needs one entry per topic")
        if not 1 <= self.slate_size <= self.candidate_count:
            raise ValueError("need 1 <= slate_size <= candidate_count")

    @property
    def topic_log_means(self) -> Tuple[float, ...]:
        if self.quality_log_means is not None:
            return tuple(self.quality_log_means)
        return (-0.5 * self.quality_log_stddev ** 2,) * self.num_topics


class LatentBanditEnv(Environment):
    kind = "latent_bandit"
    config_cls = LatentBanditConfig

    def sample_user(self, rng: np.random.Generator) -> UserState:
        cfg = self.config
        # no time budget in this environment: sessions end on episode_length
        return UserState(sample_interests(cfg.user_prior, cfg.num_topics, rng), float(cfg.episode_length))

    def sample_corpus(self, rng: np.random.Generator) -> Corpus:
        cfg = self.config
        topics = sample_topic_vectors(cfg.candidate_count, cfg.num_topics, True, cfg.topic_weights, rng)
        mus = cfg.topic_log_means
        z = rng.normal(0.0, 1.0, cfg.candidate_count)
        docs = tuple(
            Document(i, vec, 1.0, float(np.exp(mus[t] + cfg.quality_log_stddev * zi)))
            for i, ((vec, t), zi) in enumerate(zip(topics, z))
        )
        return Corpus(docs, config_digest=self.digest)

    def score(self, user: UserState, doc: Document) -> float:
        return self.config.affinity_scale * interest(user, doc) + doc.quality

    def engagement(self, doc, state, rng) -> float:
        return 1.0

    def reward(self, response) -> float:
        return 1.0 if response.clicked else 0.0
