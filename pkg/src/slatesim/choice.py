"""User choice models.

Every model maps (user state, slate) to a probability vector of length
``k + 1``: one entry per slate position and a final entry for "no click".
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import Corpus, Document, DimensionMismatch, Response, SimulationError, UserState

KINDS = ("conditional", "logit", "cascade")
SCORE_FNS = ("identity", "exp", "affine")
SQUASHES = ("sigmoid", "clip")


class InvalidScore(SimulationError, ValueError):
    """A conditional choice model produced a negative weight."""


@dataclass(frozen=True)
class ChoiceConfig:
    kind: str = "conditional"
    score_fn: str = "exp"
    # affine transform parameters, used when score_fn == "affine"
    slope: float = 1.0
    offset: float = 0.0
    # None disables the no-click outcome (except for cascade, where it is exhaustion)
    null_score: Optional[float] = 0.0
    cascade_attention: float = 1.0
    cascade_squash: str = "sigmoid"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown choice kind {self.kind!r}")
        if self.score_fn not in SCORE_FNS:
            raise ValueError(f"unknown score_fn {self.score_fn!r}")
        if self.cascade_squash not in SQUASHES:
            raise ValueError(f"unknown cascade_squash {self.cascade_squash!r}")
        if not 0.0 < self.cascade_attention <= 1.0:
            raise ValueError("cascade_attention must lie in (0, 1]")

    def transform(self, x):
        """Apply the configured score transformation ``f`` (scalar or array)."""
        if self.score_fn == "identity":
            return x
        if self.score_fn == "exp":
            return np.exp(x)
        return self.slope * x + self.offset


def interest(user: UserState, doc: Document) -> float:
    """Topic affinity: dot product of user interests and document topics."""
    u, d = user.interests, doc.topics
    if len(u) != len(d):
        raise DimensionMismatch(f"user has {len(u)} topics, document {doc.id} has {len(d)}")
    return math.fsum(a * b for a, b in zip(u, d))


def score(user: UserState, doc: Document, *, affinity_scale: float = 1.0, quality_weight: float = 0.0) -> float:
    """Base (pre-transformation) score ``affinity_scale * I(u, d) + quality_weight * L_d``."""
    return affinity_scale * interest(user, doc) + quality_weight * doc.quality


ScoreFn = Callable[[UserState, Document], float]


def choice_distribution(
    user: UserState,
    slate: Sequence[int],
    corpus: Corpus,
    cfg: ChoiceConfig,
    score_fn: ScoreFn = interest,
) -> np.ndarray:
    scores = [score_fn(user, corpus[i]) for i in slate]
    return distribution_from_scores(scores, cfg)


def distribution_from_scores(scores: Sequence[float], cfg: ChoiceConfig) -> np.ndarray:
    k = len(scores)
    s = np.asarray(scores, dtype=float)
    out = np.zeros(k + 1)
    if cfg.kind == "cascade":
        squashed = 1.0 / (1.0 + np.exp(-s)) if cfg.cascade_squash == "sigmoid" else np.clip(s, 0.0, 1.0)
        remaining = 1.0
        attention = 1.0
        for j in range(k):
            p = remaining * attention * squashed[j]
            out[j] = p
            remaining -= p
            attention *= cfg.cascade_attention
        out[k] = max(remaining, 0.0)
        return out / out.sum()

    has_null = cfg.null_score is not None
    if has_null:
        s = np.append(s, cfg.null_score)
    if cfg.kind == "logit":
        w = np.exp(s - s.max())
    else:
        w = cfg.transform(s) if cfg.score_fn != "exp" else np.exp(s - s.max())
        if np.any(w < 0):
            raise InvalidScore(f"score transformation produced negative weight(s): {w.tolist()}")
    total = w.sum()
    if not total > 0:
        raise InvalidScore("all choice weights are zero")
    w = w / total
    if has_null:
        out[:] = w
    else:
        out[:k] = w
    return out


def sample_choice(dist: Sequence[float], rng: np.random.Generator) -> Response:
    """Draw a slate position (or no click) from a ``k + 1`` distribution."""
    k = len(dist) - 1
    u = rng.random()
    acc = 0.0
    for i, p in enumerate(dist):
        acc += p
        if u < acc:
            return Response(None if i == k else i)
    # u landed in the rounding gap above the total mass: take the last non-zero outcome
    i = max(j for j, p in enumerate(dist) if p > 0)
    return Response(None if i == k else i)
