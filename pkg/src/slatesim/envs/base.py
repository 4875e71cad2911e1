"""Shared environment machinery: priors, the Environment base class and
the transition/termination helpers used by the packaged environments."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from ..choice import ChoiceConfig, choice_distribution, interest, sample_choice
from ..core import (
    Corpus,
    Document,
    ObservabilityConfig,
    Observation,
    Response,
    Slate,
    UserState,
    doc_observables,
    user_observables,
)
from ..rng import make_rng


def config_digest(obj: Any) -> str:
    """Hex SHA-256 of the canonical JSON encoding of ``obj``."""
    if dataclasses.is_dataclass(obj):
        obj = dataclasses.asdict(obj)
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=list)
    return hashlib.sha256(blob.encode()).hexdigest()


def build_config(cls, data: Optional[Mapping[str, Any]]):
    """Instantiate config dataclass ``cls`` from a JSON-like mapping.

    Nested ``choice``, ``observability`` mappings become their dataclasses;
    lists become tuples so the result stays hashable.
    """
    data = dict(data or {})
    data.pop("kind", None)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} field(s): {sorted(unknown)}")
    if isinstance(data.get("choice"), Mapping):
        data["choice"] = ChoiceConfig(**data["choice"])
    if isinstance(data.get("observability"), Mapping):
        obs = {k: tuple(v) if isinstance(v, list) else v for k, v in data["observability"].items()}
        data["observability"] = ObservabilityConfig(**obs)
    for key, value in data.items():
        if isinstance(value, list):
            data[key] = tuple(value)
    return cls(**data)


def config_to_dict(cfg) -> dict:
    return json.loads(json.dumps(dataclasses.asdict(cfg), default=list))


def sample_interests(prior: Mapping[str, Any], num_topics: int, rng: np.random.Generator) -> tuple:
    kind = prior.get("kind", "uniform")
    if kind == "uniform":
        low, high = prior.get("low", -1.0), prior.get("high", 1.0)
        return tuple(float(x) for x in rng.uniform(low, high, num_topics))
    if kind == "point":
        values = tuple(float(x) for x in prior["interests"])
        if len(values) != num_topics:
            raise ValueError(f"point prior has {len(values)} entries, expected {num_topics}")
        return values
    raise ValueError(f"unknown user prior kind {kind!r}")


def prior_mean(prior: Mapping[str, Any], num_topics: int) -> tuple:
    """Mean interest vector of a user prior (the "average user")."""
    kind = prior.get("kind", "uniform")
    if kind == "uniform":
        return (0.5 * (prior.get("low", -1.0) + prior.get("high", 1.0)),) * num_topics
    return tuple(float(x) for x in prior["interests"])


def sample_topic_vectors(
    n: int,
    num_topics: int,
    one_hot: bool,
    topic_weights: Optional[Sequence[float]],
    rng: np.random.Generator,
) -> list:
    """Draw ``n`` topic vectors and their dominant topics from P_D."""
    if topic_weights is None:
        p = np.full(num_topics, 1.0 / num_topics)
    else:
        p = np.asarray(topic_weights, dtype=float)
        p = p / p.sum()
    topics = rng.choice(num_topics, size=n, p=p)
    if one_hot:
        vectors = []
        for t in topics:
            v = [0.0] * num_topics
            v[int(t)] = 1.0
            vectors.append(tuple(v))
        return list(zip(vectors, topics.tolist()))
    # mixed documents: uniform entries in [0, 1] with the categorical topic boosted to 1
    raw = rng.uniform(0.0, 1.0, size=(n, num_topics))
    raw[np.arange(n), topics] = 1.0
    return [(tuple(float(x) for x in row), int(t)) for row, t in zip(raw, topics)]


def satisfaction(user: UserState, doc: Document, alpha: float) -> float:
    """Convex blend of topic affinity and document quality."""
    return (1.0 - alpha) * interest(user, doc) + alpha * doc.quality


def nudge_magnitude(level: float, fraction: float) -> float:
    """Size of an interest nudge: ``fraction * (1 - |I|) * |I|``."""
    a = abs(level)
    return fraction * (1.0 - a) * a


def nudge_interest(level: float, fraction: float, toward_pole: bool) -> float:
    step = nudge_magnitude(level, fraction)
    sign = 1.0 if level >= 0 else -1.0
    new = level + step * sign if toward_pole else level - step * sign
    return min(1.0, max(-1.0, new))


def budget_after(budget: float, length: float, bonus_coefficient: float, appeal: float) -> float:
    """Budget left after consuming a document of ``length`` with satisfaction ``appeal``."""
    bonus = bonus_coefficient * length * min(1.0, max(0.0, appeal))
    return max(0.0, budget - length + bonus)


def is_terminal(state: UserState, step: int, episode_length: int) -> bool:
    return state.budget <= 0 or step >= episode_length


class Environment:
    """A bundle of user, document, choice and transition models.

    The simulator owns the control loop; an environment only answers
    questions about the state it is handed. Subclasses set ``kind`` and
    implement the sampling and transition hooks.
    """

    kind = "base"
    config_cls: type = object

    def __init__(self, config=None, seed: int = 0):
        if config is None or isinstance(config, Mapping):
            config = build_config(self.config_cls, config)
        self.config = config
        self.seed = seed
        self.digest = config_digest({"kind": self.kind, **config_to_dict(config)})
        self._fixed_corpus = None
        self._doc_obs_cache = None
        if getattr(config, "fixed_corpus", False):
            self._fixed_corpus = self.sample_corpus(make_rng(seed, "corpus"))

    # subclass hooks -------------------------------------------------
    def sample_user(self, rng: np.random.Generator) -> UserState:
        raise NotImplementedError

    def sample_corpus(self, rng: np.random.Generator) -> Corpus:
        raise NotImplementedError

    def score(self, user: UserState, doc: Document) -> float:
        return interest(user, doc)

    def engagement(self, doc: Document, state: UserState, rng: np.random.Generator) -> float:
        return doc.length

    def transition(self, state: UserState, slate: Slate, corpus: Corpus, response: Response,
                   rng: np.random.Generator) -> UserState:
        return state

    def reward(self, response: Response) -> float:
        return response.engagement if response.clicked else 0.0

    # common behaviour -----------------------------------------------
    @property
    def slate_size(self) -> int:
        return self.config.slate_size

    @property
    def num_topics(self) -> int:
        return self.config.num_topics

    @property
    def observability(self) -> ObservabilityConfig:
        return self.config.observability

    @property
    def choice(self) -> ChoiceConfig:
        return self.config.choice

    def candidates(self, rng: np.random.Generator) -> Corpus:
        """Candidate set for a new episode: the fixed corpus or a fresh sample."""
        if self._fixed_corpus is not None:
            return self._fixed_corpus
        return self.sample_corpus(rng)

    def observe(self, state: UserState, corpus: Corpus, last_response: Optional[Response] = None) -> Observation:
        # candidates do not change within an episode, so their observable
        # part is computed once per corpus
        cached = self._doc_obs_cache
        if cached is None or cached[0] is not corpus:
            cached = self._doc_obs_cache = (corpus, doc_observables(corpus, self.observability))
        return Observation(user_observables(state, self.observability), cached[1], last_response)

    def choice_distribution(self, state: UserState, slate: Slate, corpus: Corpus) -> np.ndarray:
        return choice_distribution(state, slate, corpus, self.choice, self.score)

    def respond(self, state: UserState, slate: Slate, corpus: Corpus, rng: np.random.Generator) -> Response:
        """Sample the user's choice and, on a click, its engagement."""
        dist = self.choice_distribution(state, slate, corpus)
        choice = sample_choice(dist, rng)
        if not choice.clicked:
            return choice
        doc = corpus[slate[choice.chosen_index]]
        return Response(choice.chosen_index, float(self.engagement(doc, state, rng)), self.revealed_quality(doc))

    def revealed_quality(self, doc: Document) -> Optional[float]:
        return None

    def is_terminal(self, state: UserState, step: int) -> bool:
        return is_terminal(state, step, self.config.episode_length)

    def with_overrides(self, overrides: Optional[Mapping[str, Any]]) -> "Environment":
        """A copy of this environment with some config entries replaced.

        Used to evaluate under a different choice model or user prior. A
        fixed corpus is re-derived from the same seed, so it is identical.
        """
        if not overrides:
            return self
        data = config_to_dict(self.config)
        for key, value in overrides.items():
            if isinstance(value, Mapping) and isinstance(data.get(key), Mapping):
                data[key] = {**data[key], **value}
            else:
                data[key] = value
        return type(self)(build_config(self.config_cls, data), seed=self.seed)

