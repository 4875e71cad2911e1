"""Interest-evolution environment.

Users have interests in ``[-1, 1]`` per topic that drift as they consume
documents, and a time budget that each consumption spends (minus a bonus
for satisfying documents). Document quality is latent until consumed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Tuple

import numpy as np

from ..choice import ChoiceConfig
from ..core import Corpus, Document, ObservabilityConfig, Response, UserState
from .base import (
    Environment,
    budget_after,
    nudge_interest,
    sample_interests,
    sample_topic_vectors,
    satisfaction,
)


@dataclass(frozen=True)
class InterestEvolutionConfig:
    num_topics: int = 10
    one_hot_topics: bool = True
    doc_length: float = 4.0
    # per-topic mean quality; None spreads them evenly over [-1, 1]
    quality_means: Optional[Tuple[float, ...]] = None
    quality_stddev: float = 0.1
    satisfaction_weight: float = 0.5
    nudge_fraction: float = 0.3
    positive_nudge_prob: float = 0.9
    initial_budget: float = 200.0
    bonus_coefficient: float = 0.5
    no_click_cost: float = 0.5
    user_prior: Mapping[str, Any] = field(default_factory=lambda: {"kind": "uniform", "low": -1.0, "high": 1.0})
    topic_weights: Optional[Tuple[float, ...]] = None
    slate_size: int = 3
    candidate_count: int = 10
    episode_length: int = 1000
    fixed_corpus: bool = False
    choice: ChoiceConfig = ChoiceConfig(kind="conditional", score_fn="exp", null_score=0.0)
    observability: ObservabilityConfig = ObservabilityConfig()

    def __post_init__(self):
        if self.num_topics < 1:
            raise ValueError("num_topics must be >= 1")
        if self.doc_length <= 0 or self.initial_budget <= 0 or self.quality_stddev < 0:
            raise ValueError("doc_length, initial_budget must be positive and quality_stddev non-negative")
        for name in ("satisfaction_weight", "nudge_fraction", "positive_nudge_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        # satisfaction is clipped to [0, 1] before the bonus, so this keeps bonus < length
        if not 0.0 <= self.bonus_coefficient < 1.0:
            raise ValueError("bonus_coefficient must lie in [0, 1)")
        if self.no_click_cost < 0:
            raise ValueError("no_click_cost must be non-negative")
        if self.quality_means is not None and len(self.quality_means) != self.num_topics:
            raise ValueError("quality_means needs one entry per topic")
        if not 1 <= self.slate_size <= self.candidate_count:
            raise ValueError("need 1 <= slate_size <= candidate_count")

    @property
    def topic_quality_means(self) -> Tuple[float, ...]:
        if self.quality_means is not None:
            return tuple(self.quality_means)
        return tuple(np.linspace(-1.0, 1.0, self.num_topics).tolist()) if self.num_topics > 1 else (0.0,)


class InterestEvolutionEnv(Environment):
    kind = "interest_evolution"
    config_cls = InterestEvolutionConfig

    def sample_user(self, rng: np.random.Generator) -> UserState:
        cfg = self.config
        return UserState(sample_interests(cfg.user_prior, cfg.num_topics, rng), float(cfg.initial_budget))

    def sample_corpus(self, rng: np.random.Generator) -> Corpus:
        cfg = self.config
        topics = sample_topic_vectors(cfg.candidate_count, cfg.num_topics, cfg.one_hot_topics, cfg.topic_weights, rng)
        means = cfg.topic_quality_means
        noise = rng.normal(0.0, 1.0, cfg.candidate_count)
        docs = tuple(
            Document(i, vec, cfg.doc_length, float(means[t] + cfg.quality_stddev * z))
            for i, ((vec, t), z) in enumerate(zip(topics, noise))
        )
        return Corpus(docs, config_digest=self.digest)

    def revealed_quality(self, doc: Document) -> Optional[float]:
        return doc.quality

    def transition(self, state, slate, corpus, response: Response, rng) -> UserState:
        cfg = self.config
        if not response.clicked:
            return UserState(state.interests, max(0.0, state.budget - cfg.no_click_cost),
                             state.satisfaction, state.observable_features)
        doc = corpus[slate[response.chosen_index]]
        appeal = satisfaction(state, doc, cfg.satisfaction_weight)
        t = doc.topic
        interests = list(state.interests)
        interests[t] = nudge_interest(interests[t], cfg.nudge_fraction, rng.random() < cfg.positive_nudge_prob)
        budget = budget_after(state.budget, doc.length, cfg.bonus_coefficient, appeal)
        return UserState(tuple(interests), budget, state.satisfaction, state.observable_features)
