"""Domain types shared by environments, agents and the simulator.

The environment sees full :class:`UserState`; agents only ever see an
:class:`Observation` built by :func:`project_observation`. Everything here
is an immutable value type.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence, Tuple

Slate = Tuple[int, ...]

# Fields that may ever appear in an Observation. Anything else is latent.
USER_FIELDS = ("interests", "budget", "satisfaction")
DOC_FIELDS = ("topics", "length", "quality")


class SimulationError(Exception):
    """Base class for errors raised while simulating."""


class DuplicateItem(SimulationError):
    pass


class UnknownDocument(SimulationError):
    pass


class DimensionMismatch(SimulationError, ValueError):
    pass


@dataclass(frozen=True)
class Document:
    id: int
    topics: Tuple[float, ...]
    length: float = 1.0
    quality: float = 0.0
    # set only by environments that expose quality (choc-kale)
    observable_quality: Optional[float] = None

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError(f"document {self.id}: length must be positive, got {self.length}")

    @property
    def topic(self) -> int:
        """Index of the dominant topic (the sole topic for one-hot documents)."""
        topics = self.topics
        return max(range(len(topics)), key=topics.__getitem__)


@dataclass(frozen=True)
class Corpus:
    documents: Tuple[Document, ...]
    seed: Optional[int] = None
    config_digest: str = ""

    def __post_init__(self):
        if not self.documents:
            raise ValueError("corpus must be non-empty")
        ids = [d.id for d in self.documents]
        if len(set(ids)) != len(ids):
            raise ValueError("corpus document ids must be distinct")
        object.__setattr__(self, "_index", {d.id: d for d in self.documents})

    def __len__(self):
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    def __contains__(self, doc_id):
        return doc_id in self._index

    def __getitem__(self, doc_id: int) -> Document:
        return self._index[doc_id]

    @property
    def ids(self) -> Tuple[int, ...]:
        return tuple(d.id for d in self.documents)


@dataclass(frozen=True)
class UserState:
    interests: Tuple[float, ...]
    budget: float
    satisfaction: float = 1.0
    observable_features: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError(f"budget must be non-negative, got {self.budget}")
        if not 0.0 <= self.satisfaction <= 1.0:
            raise ValueError(f"satisfaction must lie in [0, 1], got {self.satisfaction}")


@dataclass(frozen=True)
class Response:
    chosen_index: Optional[int] = None
    engagement: float = 0.0
    revealed_quality: Optional[float] = None

    @property
    def clicked(self) -> bool:
        return self.chosen_index is not None

    def to_dict(self) -> dict:
        return {
            "chosen_index": self.chosen_index,
            "engagement": self.engagement,
            "revealed_quality": self.revealed_quality,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Response":
        return cls(d.get("chosen_index"), d.get("engagement", 0.0), d.get("revealed_quality"))


@dataclass(frozen=True)
class Observation:
    """What an agent is allowed to see on one turn.

    ``features`` is empty when built by an environment; agent layers
    return copies with their own entries added (see :meth:`augment`).
    """

    user_observable: Mapping[str, Any]
    doc_observables: Tuple[Mapping[str, Any], ...]
    last_response: Optional[Response] = None
    features: Mapping[str, Any] = field(default_factory=dict)

    @property
    def candidate_ids(self) -> Tuple[int, ...]:
        return tuple(d["id"] for d in self.doc_observables)

    def doc(self, doc_id: int) -> Mapping[str, Any]:
        for d in self.doc_observables:
            if d["id"] == doc_id:
                return d
        raise UnknownDocument(doc_id)

    def augment(self, **features) -> "Observation":
        merged = dict(self.features)
        merged.update(features)
        return Observation(self.user_observable, self.doc_observables, self.last_response, merged)

    def to_dict(self) -> dict:
        return {
            "user": _jsonable(self.user_observable),
            "docs": [_jsonable(d) for d in self.doc_observables],
            "last_response": None if self.last_response is None else self.last_response.to_dict(),
        }


@dataclass(frozen=True)
class ObservabilityConfig:
    """Per-field whitelist of what an agent may observe."""

    user_fields: Tuple[str, ...] = ()
    doc_fields: Tuple[str, ...] = ("topics", "length")
    # names from UserState.observable_features; None exposes all of them
    user_feature_names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        bad = [f for f in self.user_fields if f not in USER_FIELDS]
        bad += [f for f in self.doc_fields if f not in DOC_FIELDS]
        if bad:
            raise ValueError(f"unknown observable field(s): {bad}")


def project_observation(
    state: UserState,
    corpus: Corpus,
    observability: ObservabilityConfig,
    last_response: Optional[Response] = None,
) -> Observation:
    return Observation(
        user_observables(state, observability), doc_observables(corpus, observability), last_response
    )


def user_observables(state: UserState, observability: ObservabilityConfig) -> dict:
    user: dict = {}
    names = observability.user_feature_names
    for name, value in state.observable_features.items():
        if names is None or name in names:
            user[name] = value
    for name in observability.user_fields:
        user[name] = getattr(state, name)
    return user


def doc_observables(corpus: Corpus, observability: ObservabilityConfig) -> Tuple[dict, ...]:
    fields = observability.doc_fields
    out = []
    for doc in corpus.documents:
        entry = {"id": doc.id}
        for name in fields:
            # "quality" means the exposed quality, never the latent one
            entry[name] = doc.observable_quality if name == "quality" else getattr(doc, name)
        out.append(entry)
    return tuple(out)


def validate_slate(slate: Sequence[int], corpus: Corpus) -> None:
    """Raise unless ``slate`` is duplicate-free and drawn from ``corpus``."""
    seen = set()
    for doc_id in slate:
        if doc_id in seen:
            raise DuplicateItem(f"document {doc_id} appears more than once in slate {list(slate)}")
        seen.add(doc_id)
        if doc_id not in corpus:
            raise UnknownDocument(f"document {doc_id} is not among the current candidates")


def _jsonable(value):
    if isinstance(value, Mapping):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (tuple, list)):
        return [_jsonable(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if hasattr(value, "item"):  # numpy scalar
        return value.item()
    return value
