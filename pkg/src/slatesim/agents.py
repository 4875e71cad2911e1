"""Baseline recommender agents.

All agents follow one protocol::

    step = agent.begin_episode(obs)
    step = agent.step(reward, obs)       # once per later turn
    agent.end_episode(reward, obs)

``reward`` is the reward earned by the previous slate and ``obs`` carries
the user's response to it in ``obs.last_response``. Agents never see a
:class:`~slatesim.core.UserState`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .core import Document, Observation, Slate, SimulationError, UserState
from .rng import make_rng, rng_from_state, rng_state


class CorpusTooSmall(SimulationError):
    pass


class ActionSpaceOverflow(SimulationError):
    """Slate enumeration would exceed the configured action cap."""


@dataclass
class AgentStep:
    slate: Slate
    diagnostics: Dict[str, Any] = field(default_factory=dict)


class Agent:
    """Base class. Subclasses override :meth:`act` and, if they learn,
    :meth:`learn`."""

    kind = "agent"
    omniscient = False

    def __init__(self, slate_size: int = 1, seed: int = 0):
        if slate_size < 1:
            raise ValueError("slate_size must be >= 1")
        self.slate_size = slate_size
        self.rng = make_rng(seed, "agent")
        self.training = True

    # protocol -------------------------------------------------------
    def begin_episode(self, obs: Observation) -> AgentStep:
        return self.act(obs)

    def step(self, reward: float, obs: Observation) -> AgentStep:
        if self.training:
            self.learn(reward, obs, done=False)
        return self.act(obs)

    def end_episode(self, reward: float, obs: Observation) -> None:
        if self.training:
            self.learn(reward, obs, done=True)

    def act(self, obs: Observation) -> AgentStep:
        raise NotImplementedError

    def learn(self, reward: float, obs: Observation, done: bool) -> None:
        pass

    # bookkeeping ----------------------------------------------------
    def set_training(self, training: bool) -> "Agent":
        self.training = training
        return self

    def reseed(self, seed: int, phase: str = "agent", index: int = 0) -> None:
        self.rng = make_rng(seed, phase, index)

    def state_dict(self) -> dict:
        return {"rng": rng_state(self.rng)}

    def load_state_dict(self, state: dict) -> None:
        self.rng = rng_from_state(state["rng"])


def doc_topic(doc_obs) -> int:
    topics = doc_obs["topics"]
    return max(range(len(topics)), key=topics.__getitem__)


class RandomAgent(Agent):
    """Uniformly random duplicate-free slates."""

    kind = "random"

    def act(self, obs: Observation) -> AgentStep:
        ids = obs.candidate_ids
        if len(ids) < self.slate_size:
            raise CorpusTooSmall(f"{len(ids)} candidates cannot fill a slate of {self.slate_size}")
        picks = self.rng.choice(len(ids), size=self.slate_size, replace=False)
        return AgentStep(tuple(ids[i] for i in picks))


class GreedyAgent(Agent):
    """Myopic top-k ranking by a known expected-reward function.

    ``objective="choice"`` is the omniscient baseline: it scores every
    candidate for the average user of the prior with the environment's own
    choice score and transformation, which requires the latent document
    qualities. The simulator hands those over through :meth:`see_corpus`.
    When the observation exposes the user's interests they replace the
    average user, which turns the baseline into a personalised myopic ranker.
    ``"engagement"`` ranks by expected engagement computed from an observable
    quality (choc-kale); ``"kaleness"`` ranks by that quality itself.
    """

    kind = "greedy"
    OBJECTIVES = ("choice", "engagement", "kaleness")

    def __init__(self, env, slate_size: int = 1, seed: int = 0, objective: str = "choice"):
        super().__init__(slate_size, seed)
        if objective not in self.OBJECTIVES:
            raise ValueError(f"unknown greedy objective {objective!r}")
        self.objective = objective
        self.omniscient = objective == "choice"
        self._env = env
        self._corpus = None
        if self.omniscient:
            from .envs import prior_mean

            self.average_user = UserState(prior_mean(env.config.user_prior, env.num_topics), 1.0)

    def see_corpus(self, corpus) -> None:
        self._corpus = corpus

    def value(self, doc_obs, user: Optional[UserState] = None) -> float:
        if self.objective == "choice":
            doc: Document = self._corpus[doc_obs["id"]]
            return float(self._env.choice.transform(self._env.score(user or self.average_user, doc)))
        q = doc_obs["quality"]
        if self.objective == "engagement":
            return self._env.config.expected_engagement(q)
        return q

    def act(self, obs: Observation) -> AgentStep:
        if self.objective == "choice" and self._corpus is None:
            raise SimulationError("omniscient greedy agent was not shown the corpus")
        user = None
        if "interests" in obs.user_observable:
            user = UserState(tuple(obs.user_observable["interests"]), 1.0)
        ranked = sorted(obs.doc_observables, key=lambda d: (-self.value(d, user), d["id"]))
        if len(ranked) < self.slate_size:
            raise CorpusTooSmall(f"{len(ranked)} candidates cannot fill a slate of {self.slate_size}")
        return AgentStep(tuple(d["id"] for d in ranked[: self.slate_size]))


# ---------------------------------------------------------------------------
# observation featurizers for the tabular learners


def _bin(x: float, low: float, high: float, bins: int) -> int:
    if x <= low:
        return 0
    if x >= high:
        return bins - 1
    return min(bins - 1, int((x - low) / (high - low) * bins))


def _cluster_stats(obs: Observation):
    try:
        return obs.features["cluster_click_stats"]
    except KeyError:
        raise SimulationError("this featurizer needs a cluster_click_stats layer") from None


def features_constant(obs: Observation, bins: int) -> tuple:
    return ()


def features_user(obs: Observation, bins: int, low: float = -1.0, high: float = 1.0) -> tuple:
    """Every numeric user observable, binned uniformly on [low, high]."""
    out = []
    for name in sorted(obs.user_observable):
        value = obs.user_observable[name]
        values = value if isinstance(value, (tuple, list)) else (value,)
        out.extend(_bin(float(v), low, high, bins) for v in values)
    return tuple(out)


def features_topic_ctr(obs: Observation, bins: int) -> tuple:
    """Per-topic click-through rates binned on [0, 1]; -1 for unexplored topics."""
    stats = _cluster_stats(obs)
    return tuple(
        _bin(c / n, 0.0, 1.0, bins) if n else -1 for n, c in zip(stats["impressions"], stats["clicks"])
    )


def features_best_topic(obs: Observation, bins: int) -> tuple:
    """Topic with the highest observed click-through rate and that rate, binned.

    Ties and the all-unexplored case resolve to the lowest topic id; the
    empty-history state is ``(-1, 0)``.
    """
    stats = _cluster_stats(obs)
    best, best_rate = -1, -1.0
    for t, (n, c) in enumerate(zip(stats["impressions"], stats["clicks"])):
        if n and c / n > best_rate:
            best, best_rate = t, c / n
    if best < 0:
        return (-1, 0)
    return (best, _bin(best_rate, 0.0, 1.0, bins))


def features_last_click(obs: Observation, bins: int) -> tuple:
    """Topic of the last clicked document (-1 before any click).

    Needs a history layer, since the observation alone does not say which
    document the last response refers to.
    """
    history = obs.features.get("history", ())
    for past_obs, slate, response in reversed(history):
        if response is not None and response.clicked:
            return (doc_topic(past_obs.doc(slate[response.chosen_index])),)
    return (-1,)


def _topic_stat_bucket(stats, topic: int, bins: int) -> tuple:
    """A document described by what has been seen of its topic: (-1,) if
    never shown, else (binned click-through rate, impression bucket)."""
    n = stats["impressions"][topic]
    if n == 0:
        return (-1,)
    return (_bin(stats["clicks"][topic] / n, 0.0, 1.0, bins), 0 if n < 3 else 1 if n < 10 else 2)


# How a Q-table names actions. "ids": the slate itself. "topics": the
# slate's topic sequence, so values carry over between look-alike documents
# and corpora. "topic_stats": each slot described by its topic's click
# history (needs a cluster_click_stats layer).
ACTION_FEATURES = ("ids", "topics", "topic_stats")

FEATURIZERS: Dict[str, Callable[..., tuple]] = {
    "constant": features_constant,
    "user": features_user,
    "topic_ctr": features_topic_ctr,
    "best_topic": features_best_topic,
    "last_click": features_last_click,
}


class TabularQAgent(Agent):
    """Q-learning over discretized observations and enumerated slates.

    Actions are unordered k-subsets of the candidate ids, enumerated in
    lexicographic id order; argmax ties resolve to the earliest action.
    """

    kind = "tabular_q"
    ordered_slates = False

    def __init__(
        self,
        slate_size: int = 1,
        seed: int = 0,
        features: str = "user",
        bins: int = 5,
        gamma: float = 0.9,
        epsilon: float = 0.1,
        learning_rate=None,
        action_cap: int = 10_000,
        action_features: str = "ids",
    ):
        super().__init__(slate_size, seed)
        if not 0.0 <= gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if features not in FEATURIZERS:
            raise ValueError(f"unknown featurizer {features!r}; expected one of {sorted(FEATURIZERS)}")
        self.features = features
        self.bins = bins
        self.gamma = gamma
        self.epsilon = epsilon
        # None: 1/visits; a number: constant; {"power": w}: visits ** -w
        self.learning_rate = learning_rate
        self.action_cap = action_cap
        if action_features not in ACTION_FEATURES:
            raise ValueError(f"unknown action_features {action_features!r}; expected one of {ACTION_FEATURES}")
        self.action_features = action_features
        self.q: Dict[Hashable, Dict[Hashable, List[float]]] = {}
        self._last: Optional[Tuple[Hashable, Hashable]] = None
        self._actions_cache: Tuple[Any, List[Tuple[Slate, Hashable]]] = (None, [])

    def key(self, obs: Observation) -> Hashable:
        return FEATURIZERS[self.features](obs, self.bins)

    def action_key(self, obs: Observation, slate: Slate) -> Hashable:
        if self.action_features == "ids":
            return slate
        if self.action_features == "topics":
            key = tuple(doc_topic(obs.doc(i)) for i in slate)
        else:
            stats = _cluster_stats(obs)
            key = tuple(
                _topic_stat_bucket(stats, doc_topic(obs.doc(i)), self.bins) for i in slate
            )
        return key if self.ordered_slates else tuple(sorted(key))

    def actions(self, obs: Observation) -> List[Tuple[Slate, Hashable]]:
        """Every candidate slate with its Q-table action key, in enumeration order."""
        docs = obs.doc_observables
        if self._actions_cache[0] is docs:
            if self.action_features == "topic_stats":
                return [(slate, self.action_key(obs, slate)) for slate, _ in self._actions_cache[1]]
            return self._actions_cache[1]
        ids = tuple(sorted(d["id"] for d in docs))
        k = self.slate_size
        if len(ids) < k:
            raise CorpusTooSmall(f"{len(ids)} candidates cannot fill a slate of {k}")
        count = math.perm(len(ids), k) if self.ordered_slates else math.comb(len(ids), k)
        if count > self.action_cap:
            raise ActionSpaceOverflow(f"{count} slates exceed the action cap of {self.action_cap}")
        gen = itertools.permutations(ids, k) if self.ordered_slates else itertools.combinations(ids, k)
        acts = [(slate, self.action_key(obs, slate)) for slate in gen]
        self._actions_cache = (docs, acts)
        return acts

    def q_value(self, key: Hashable, action: Hashable) -> float:
        entry = self.q.get(key, {}).get(action)
        return entry[0] if entry else 0.0

    def greedy_action(self, key: Hashable, actions: Sequence[Tuple[Slate, Hashable]]):
        """``(slate, action_key, q)`` of the first maximising action."""
        row = self.q.get(key)
        if not row:
            return actions[0] + (0.0,)
        best, best_q = actions[0], -math.inf
        for a in actions:
            entry = row.get(a[1])
            q = entry[0] if entry else 0.0
            if q > best_q:
                best, best_q = a, q
        return best + (best_q,)

    def act(self, obs: Observation) -> AgentStep:
        key = self.key(obs)
        actions = self.actions(obs)
        explore = self.training and self.rng.random() < self.epsilon
        if explore:
            slate, akey = actions[int(self.rng.integers(len(actions)))]
        else:
            slate, akey, _ = self.greedy_action(key, actions)
        self._last = (key, akey)
        return AgentStep(slate, {"explore": explore})

    def _rate(self, visits: int) -> float:
        lr = self.learning_rate
        if lr is None:
            return 1.0 / visits
        if isinstance(lr, dict):
            return visits ** -float(lr["power"])
        return float(lr)

    def update(self, key: Hashable, action: Hashable, reward: float, next_value: float) -> None:
        """One Q-learning backup toward ``reward + gamma * next_value``."""
        entry = self.q.setdefault(key, {}).setdefault(action, [0.0, 0])
        entry[1] += 1
        entry[0] += self._rate(entry[1]) * (reward + self.gamma * next_value - entry[0])

    def learn(self, reward: float, obs: Observation, done: bool) -> None:
        if self._last is None:
            return
        key, action = self._last
        next_value = 0.0 if done else self.greedy_action(self.key(obs), self.actions(obs))[2]
        self.update(key, action, reward, next_value)
        if done:
            self._last = None

    def begin_episode(self, obs: Observation) -> AgentStep:
        self._last = None
        return self.act(obs)

    def state_dict(self) -> dict:
        table = [
            [list(key), list(action), entry[0], entry[1]]
            for key, row in self.q.items()
            for action, entry in row.items()
        ]
        return {**super().state_dict(), "table": table}

    def load_state_dict(self, state: dict) -> None:
        super().load_state_dict(state)
        self.q = {}
        for key, action, q, n in state["table"]:
            self.q.setdefault(tuple(key), {})[tuple(action)] = [float(q), int(n)]
        self._last = None


class FullSlateQAgent(TabularQAgent):
    """Slate-as-action Q-learning: every ordered slate is its own action.

    Stands in for a slate-level Q-network with a table, so it is only
    practical when ``m! / (m - k)!`` stays small.
    """

    kind = "full_slate_q"
    ordered_slates = True


class UCB1Agent(Agent):
    """UCB1 over topics, fed by a cluster_click_stats layer.

    Chooses the topic with the largest ``clicks/impressions +
    sqrt(2 ln n / impressions)`` among topics present in the candidates
    (never-shown topics first, lowest id first), then recommends that
    topic's documents ranked by observable quality, then id.
    """

    kind = "ucb1"

    def indices(self, impressions: Sequence[int], clicks: Sequence[int]) -> List[float]:
        n = sum(impressions)
        log_n = math.log(n) if n > 0 else 0.0
        return [
            math.inf if ni == 0 else xi / ni + math.sqrt(2.0 * log_n / ni)
            for ni, xi in zip(impressions, clicks)
        ]

    def act(self, obs: Observation) -> AgentStep:
        stats = _cluster_stats(obs)
        index = self.indices(stats["impressions"], stats["clicks"])
        by_topic: Dict[int, list] = {}
        for d in obs.doc_observables:
            by_topic.setdefault(doc_topic(d), []).append(d)
        if sum(len(v) for v in by_topic.values()) < self.slate_size:
            raise CorpusTooSmall(f"not enough candidates for a slate of {self.slate_size}")
        # present topics, best index first; ties keep the lower topic id
        order = sorted(by_topic, key=lambda t: (-index[t], t))
        slate: List[int] = []
        for t in order:
            docs = sorted(by_topic[t], key=lambda d: (-(d.get("quality") or 0.0), d["id"]))
            slate.extend(d["id"] for d in docs[: self.slate_size - len(slate)])
            if len(slate) == self.slate_size:
                break
        return AgentStep(tuple(slate), {"topic": order[0], "ucb": index})


AGENTS = {
    RandomAgent.kind: RandomAgent,
    GreedyAgent.kind: GreedyAgent,
    TabularQAgent.kind: TabularQAgent,
    FullSlateQAgent.kind: FullSlateQAgent,
    UCB1Agent.kind: UCB1Agent,
}
