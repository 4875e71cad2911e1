"""Stackable hierarchical agent layers.

A layer is itself an :class:`~slatesim.agents.Agent` wrapping a base
agent: it may rewrite the observation and reward on the way in and the
slate on the way out. Layers nest to any depth.
"""
from __future__ import annotations

from collections import Counter, deque
from typing import Callable, Dict, List, Optional, Sequence

from .agents import Agent, AgentStep, doc_topic
from .core import Observation, SimulationError, Slate
from .rng import make_rng, rng_from_state, rng_state


class NoChildren(SimulationError):
    pass


class Layer(Agent):
    kind = "layer"

    def __init__(self, base: Agent):
        self.base = base
        self.slate_size = base.slate_size
        self.training = base.training

    @property
    def omniscient(self):
        return self.base.omniscient

    def see_corpus(self, corpus) -> None:
        if self.base.omniscient:
            self.base.see_corpus(corpus)

    def preprocess(self, obs: Observation, reward: Optional[float]) -> Observation:
        return obs

    def begin_episode(self, obs: Observation) -> AgentStep:
        return self.base.begin_episode(self.preprocess(obs, None))

    def step(self, reward: float, obs: Observation) -> AgentStep:
        return self.base.step(reward, self.preprocess(obs, reward))

    def end_episode(self, reward: float, obs: Observation) -> None:
        self.base.end_episode(reward, self.preprocess(obs, reward))

    def set_training(self, training: bool) -> "Layer":
        self.training = training
        self.base.set_training(training)
        return self

    def reseed(self, seed: int, phase: str = "agent", index: int = 0) -> None:
        self.base.reseed(seed, phase, index)

    def state_dict(self) -> dict:
        return {"base": self.base.state_dict()}

    def load_state_dict(self, state: dict) -> None:
        self.base.load_state_dict(state["base"])


class ClusterClickStatsLayer(Layer):
    """Adds per-topic impression and click counts to the observation.

    Counts live in the agent, never in the user model. They restart with
    every episode unless ``persist`` is set.
    """

    kind = "cluster_click_stats"

    def __init__(self, base: Agent, num_topics: Optional[int] = None, persist: bool = False):
        super().__init__(base)
        self.num_topics = num_topics
        self.persist = persist
        self.impressions: List[int] = []
        self.clicks: List[int] = []
        self._shown_topics: Sequence[int] = ()

    def _ensure(self, obs: Observation) -> None:
        if self.num_topics is None:
            self.num_topics = len(obs.doc_observables[0]["topics"])
        if len(self.impressions) != self.num_topics:
            self.impressions = [0] * self.num_topics
            self.clicks = [0] * self.num_topics

    def preprocess(self, obs: Observation, reward: Optional[float]) -> Observation:
        self._ensure(obs)
        response = obs.last_response
        if reward is not None and self._shown_topics:
            for t in self._shown_topics:
                self.impressions[t] += 1
            if response is not None and response.clicked:
                self.clicks[self._shown_topics[response.chosen_index]] += 1
        return obs.augment(cluster_click_stats={"impressions": tuple(self.impressions), "clicks": tuple(self.clicks)})

    def _remember(self, obs: Observation, step: AgentStep) -> AgentStep:
        self._shown_topics = tuple(doc_topic(obs.doc(i)) for i in step.slate)
        return step

    def begin_episode(self, obs: Observation) -> AgentStep:
        if not self.persist:
            self.impressions, self.clicks = [], []
        self._shown_topics = ()
        return self._remember(obs, super().begin_episode(obs))

    def step(self, reward: float, obs: Observation) -> AgentStep:
        return self._remember(obs, super().step(reward, obs))

    def end_episode(self, reward: float, obs: Observation) -> None:
        super().end_episode(reward, obs)
        self._shown_topics = ()

    def state_dict(self) -> dict:
        return {**super().state_dict(), "impressions": list(self.impressions), "clicks": list(self.clicks),
                "num_topics": self.num_topics}

    def load_state_dict(self, state: dict) -> None:
        super().load_state_dict(state)
        self.impressions = list(state["impressions"])
        self.clicks = list(state["clicks"])
        self.num_topics = state["num_topics"]


class FixedLengthHistoryLayer(Layer):
    """Adds the last ``window`` (observation, slate, response) triples,
    most recent last, as ``obs.features["history"]``."""

    kind = "fixed_length_history"

    def __init__(self, base: Agent, window: int = 3):
        super().__init__(base)
        if window < 1:
            raise ValueError("history window must be >= 1")
        self.window = window
        self.history: deque = deque(maxlen=window)
        self._pending = None

    def preprocess(self, obs: Observation, reward: Optional[float]) -> Observation:
        if reward is not None and self._pending is not None:
            prev_obs, slate = self._pending
            self.history.append((prev_obs, slate, obs.last_response))
        return obs.augment(history=tuple(self.history))

    def _remember(self, obs: Observation, step: AgentStep) -> AgentStep:
        # store the raw observation so histories do not nest
        self._pending = (Observation(obs.user_observable, obs.doc_observables, obs.last_response), step.slate)
        return step

    def begin_episode(self, obs: Observation) -> AgentStep:
        self.history.clear()
        self._pending = None
        return self._remember(obs, super().begin_episode(obs))

    def step(self, reward: float, obs: Observation) -> AgentStep:
        return self._remember(obs, super().step(reward, obs))

    def end_episode(self, reward: float, obs: Observation) -> None:
        super().end_episode(reward, obs)
        self._pending = None


def topic_multiset(obs: Observation, slate: Slate) -> Counter:
    return Counter(doc_topic(obs.doc(i)) for i in slate)


def multiset_distance(a: Counter, b: Counter) -> int:
    """Cardinality of the symmetric difference of two multisets."""
    return sum(((a - b) + (b - a)).values())


class TemporalAggregationLayer(Layer):
    """Lets the base agent act only every ``period`` turns.

    In between, it re-emits the candidate slate closest to the cached slate
    features (topic multiset by default). With ``switching_cost`` > 0 every
    emitted slate whose features differ from the previous one costs that
    much reward in the base agent's view; logged rewards are untouched.
    Rewards earned between base decisions are summed and delivered at the
    next decision.
    """

    kind = "temporal_aggregation"

    def __init__(self, base: Agent, period: int = 1, switching_cost: float = 0.0,
                 features: Callable[[Observation, Slate], Counter] = topic_multiset):
        super().__init__(base)
        if period < 1:
            raise ValueError("period must be >= 1")
        self.period = period
        self.switching_cost = switching_cost
        self.slate_features = features
        self._reset()

    def _reset(self) -> None:
        self.turn = 0
        self.pending = 0.0
        self.cached: Optional[Counter] = None
        self.previous: Optional[Counter] = None
        self.switches = 0
        self.base_calls = 0

    def _emit(self, obs: Observation, step: AgentStep) -> AgentStep:
        feats = self.slate_features(obs, step.slate)
        if self.previous is not None and feats != self.previous:
            self.switches += 1
            self.pending -= self.switching_cost
        self.previous = feats
        self.turn += 1
        return step

    def reproduce(self, obs: Observation) -> Slate:
        """The candidate slate nearest the cached features.

        Topic-multiset distance is minimised by matching as many cached
        topics as possible; matches and fillers both take the lowest ids.
        """
        need = Counter(self.cached)
        chosen: List[int] = []
        ids = sorted(obs.candidate_ids)
        for doc_id in ids:
            t = doc_topic(obs.doc(doc_id))
            if need[t] > 0 and len(chosen) < self.slate_size:
                chosen.append(doc_id)
                need[t] -= 1
        for doc_id in ids:
            if len(chosen) == self.slate_size:
                break
            if doc_id not in chosen:
                chosen.append(doc_id)
        return tuple(sorted(chosen))

    def begin_episode(self, obs: Observation) -> AgentStep:
        self._reset()
        step = self.base.begin_episode(obs)
        self.base_calls += 1
        self.cached = self.slate_features(obs, step.slate)
        return self._emit(obs, step)

    def step(self, reward: float, obs: Observation) -> AgentStep:
        self.pending += reward
        if self.turn % self.period == 0:
            delivered, self.pending = self.pending, 0.0
            step = self.base.step(delivered, obs)
            self.base_calls += 1
            self.cached = self.slate_features(obs, step.slate)
        else:
            step = AgentStep(self.reproduce(obs), {"aggregated": True})
        return self._emit(obs, step)

    def end_episode(self, reward: float, obs: Observation) -> None:
        delivered = self.pending + reward
        self.pending = 0.0
        self.base.end_episode(delivered, obs)


class HierarchicalAgent(Agent):
    """Treats a list of child agents as abstract actions.

    Each turn an epsilon-greedy selector over the children's running mean
    reward picks one child (every child is first tried ``warmup`` times,
    in order); that child produces the slate and alone receives the reward.
    """

    kind = "hierarchical"

    def __init__(self, children: Sequence[Agent], seed: int = 0, epsilon: float = 0.1, warmup: int = 1):
        if not children:
            raise NoChildren("a hierarchical agent needs at least one child")
        super().__init__(children[0].slate_size, seed)
        self.children = list(children)
        self.epsilon = epsilon
        self.warmup = warmup
        self.totals = [0.0] * len(children)
        self.counts = [0] * len(children)
        self._active: List[bool] = [False] * len(children)
        self._pending: List[float] = [0.0] * len(children)
        self._selected: Optional[int] = None

    @property
    def omniscient(self):
        return any(c.omniscient for c in self.children)

    def see_corpus(self, corpus) -> None:
        for c in self.children:
            if c.omniscient:
                c.see_corpus(corpus)

    def select(self) -> int:
        for i, n in enumerate(self.counts):
            if n < self.warmup:
                return i
        if self.training and self.rng.random() < self.epsilon:
            return int(self.rng.integers(len(self.children)))
        means = [t / n for t, n in zip(self.totals, self.counts)]
        return max(range(len(means)), key=means.__getitem__)

    def _credit(self, reward: float) -> None:
        i = self._selected
        if i is None:
            return
        self._pending[i] += reward
        if self.training:
            self.totals[i] += reward
            self.counts[i] += 1

    def _act(self, obs: Observation) -> AgentStep:
        i = self.select()
        child = self.children[i]
        if self._active[i]:
            delivered, self._pending[i] = self._pending[i], 0.0
            step = child.step(delivered, obs)
        else:
            self._active[i] = True
            step = child.begin_episode(obs)
        self._selected = i
        return AgentStep(step.slate, {**step.diagnostics, "child": i})

    def begin_episode(self, obs: Observation) -> AgentStep:
        self._active = [False] * len(self.children)
        self._pending = [0.0] * len(self.children)
        self._selected = None
        return self._act(obs)

    def step(self, reward: float, obs: Observation) -> AgentStep:
        self._credit(reward)
        return self._act(obs)

    def end_episode(self, reward: float, obs: Observation) -> None:
        self._credit(reward)
        for i, child in enumerate(self.children):
            if self._active[i]:
                child.end_episode(self._pending[i], obs)
        self._selected = None

    def set_training(self, training: bool) -> "HierarchicalAgent":
        self.training = training
        for c in self.children:
            c.set_training(training)
        return self

    def reseed(self, seed: int, phase: str = "agent", index: int = 0) -> None:
        self.rng = make_rng(seed, phase, index)
        for i, c in enumerate(self.children):
            c.reseed(seed, phase, index * 1000 + i + 1)

    def state_dict(self) -> dict:
        return {
            "rng": rng_state(self.rng),
            "totals": list(self.totals),
            "counts": list(self.counts),
            "children": [c.state_dict() for c in self.children],
        }

    def load_state_dict(self, state: dict) -> None:
        self.rng = rng_from_state(state["rng"])
        self.totals = [float(x) for x in state["totals"]]
        self.counts = [int(x) for x in state["counts"]]
        for c, s in zip(self.children, state["children"]):
            c.load_state_dict(s)


LAYERS: Dict[str, type] = {
    ClusterClickStatsLayer.kind: ClusterClickStatsLayer,
    FixedLengthHistoryLayer.kind: FixedLengthHistoryLayer,
    TemporalAggregationLayer.kind: TemporalAggregationLayer,
}
