"""The simulator: episodes, iterations, evaluation, logs and checkpoints.

One turn runs the six steps in order: fetch the full user state and
candidates, project the observation for the agent, get a slate, hand full
state and slate to the choice model, sample the response, then apply the
user transition and let the agent learn from the outcome.
"""
from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .agents import Agent
from .core import SimulationError, validate_slate
from .envs import Environment
from .rng import derive_seed, make_rng

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "slatesim-checkpoint"
CHECKPOINT_VERSION = 1
METRICS_FIELDS = ("iteration", "avg_reward", "avg_length", "ctr", "diversity", "episodes")


class EpisodeError(SimulationError):
    """An error raised inside an episode, annotated with where it happened."""


class CorruptCheckpoint(SimulationError):
    pass


class VersionMismatch(SimulationError):
    pass


@dataclass
class EpisodeLog:
    episode: int
    seed: Optional[int]
    config_digest: str = ""
    turns: List[dict] = field(default_factory=list)
    terminal: bool = False
    length: int = 0
    total_reward: float = 0.0
    clicks: int = 0
    distinct_topics: int = 0

    def lines(self) -> List[str]:
        """The episode as JSON Lines: header, one line per turn, footer."""
        out = [json.dumps({"episode": self.episode, "seed": self.seed, "config_digest": self.config_digest})]
        out.extend(json.dumps(t) for t in self.turns)
        out.append(json.dumps({"terminal": self.terminal, "turns": self.length}))
        return out


@dataclass(frozen=True)
class MetricsRow:
    iteration: int
    avg_reward: float
    avg_length: float
    ctr: float
    diversity: float
    episodes: int


def run_episode(
    env: Environment,
    agent: Agent,
    rng: np.random.Generator,
    *,
    episode: int = 0,
    seed: Optional[int] = None,
    config_digest: str = "",
    record: bool = True,
) -> EpisodeLog:
    """Run one user session until the environment says it is over."""
    ep = EpisodeLog(episode, seed, config_digest)
    state = env.sample_user(rng)
    corpus = env.candidates(rng)
    if agent.omniscient:
        agent.see_corpus(corpus)
    obs = env.observe(state, corpus)
    step = agent.begin_episode(obs)
    topics = set()
    t = 0
    while True:
        slate = tuple(step.slate)
        try:
            validate_slate(slate, corpus)
        except SimulationError as exc:
            raise EpisodeError(f"episode {episode}, turn {t}: {exc}") from exc
        response = env.respond(state, slate, corpus, rng)
        reward = float(env.reward(response))
        if record:
            ep.turns.append({
                "t": t,
                "obs": obs.to_dict(),
                "slate": list(slate),
                "response": response.to_dict(),
                "reward": reward,
            })
        ep.total_reward += reward
        ep.clicks += response.clicked
        topics.update(corpus[i].topic for i in slate)
        state = env.transition(state, slate, corpus, response, rng)
        t += 1
        obs = env.observe(state, corpus, response)
        if env.is_terminal(state, t):
            agent.end_episode(reward, obs)
            break
        step = agent.step(reward, obs)
    ep.terminal = True
    ep.length = t
    ep.distinct_topics = len(topics)
    return ep


def aggregate(logs: Sequence[EpisodeLog], iteration: int = 0) -> MetricsRow:
    """Per-episode averages plus pooled click-through rate."""
    n = len(logs)
    if n == 0:
        return MetricsRow(iteration, 0.0, 0.0, 0.0, 0.0, 0)
    turns = sum(e.length for e in logs)
    return MetricsRow(
        iteration,
        sum(e.total_reward for e in logs) / n,
        turns / n,
        sum(e.clicks for e in logs) / turns,
        sum(e.distinct_topics for e in logs) / n,
        n,
    )


def write_metrics(path: Path, rows: Iterable[MetricsRow], append: bool = True) -> None:
    path = Path(path)
    fresh = not append or not path.exists()
    with path.open("w" if fresh else "a", newline="") as fh:
        writer = csv.writer(fh)
        if fresh:
            writer.writerow(METRICS_FIELDS)
        for row in rows:
            writer.writerow([getattr(row, f) for f in METRICS_FIELDS])


def read_metrics(path) -> List[MetricsRow]:
    with Path(path).open(newline="") as fh:
        return [
            MetricsRow(int(r["iteration"]), float(r["avg_reward"]), float(r["avg_length"]),
                       float(r["ctr"]), float(r["diversity"]), int(r["episodes"]))
            for r in csv.DictReader(fh)
        ]


def append_episodes(path: Path, logs: Iterable[EpisodeLog]) -> None:
    with Path(path).open("a") as fh:
        for ep in logs:
            fh.write("\n".join(ep.lines()))
            fh.write("\n")


class Simulation:
    """Training loop: iterations of at least ``turns_per_iteration`` turns.

    An iteration always finishes the episode in progress. Episode ``i`` of
    training draws from the stream ``(seed, "train", i)``, so a run resumed
    from a checkpoint replays exactly what the uninterrupted run would have.
    """

    def __init__(
        self,
        env: Environment,
        agent: Agent,
        *,
        seed: int = 0,
        turns_per_iteration: int = 1000,
        out_dir=None,
        config_digest: str = "",
        log_episodes: bool = True,
    ):
        if turns_per_iteration < 1:
            raise ValueError("turns_per_iteration must be >= 1")
        self.env = env
        self.agent = agent
        self.seed = seed
        self.turns_per_iteration = turns_per_iteration
        self.out_dir = None if out_dir is None else Path(out_dir)
        self.config_digest = config_digest
        self.log_episodes = log_episodes
        self.iteration = 0
        self.episode_index = 0
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)

    @property
    def metrics_path(self) -> Optional[Path]:
        return None if self.out_dir is None else self.out_dir / "metrics.csv"

    @property
    def episodes_path(self) -> Optional[Path]:
        return None if self.out_dir is None else self.out_dir / "train_episodes.jsonl"

    def run_iteration(self) -> MetricsRow:
        self.agent.set_training(True)
        logs: List[EpisodeLog] = []
        turns = 0
        record = self.log_episodes and self.out_dir is not None
        while turns < self.turns_per_iteration:
            i = self.episode_index
            ep = run_episode(
                self.env, self.agent, make_rng(self.seed, "train", i),
                episode=i, seed=derive_seed(self.seed, "train", i),
                config_digest=self.config_digest, record=record,
            )
            self.episode_index += 1
            turns += ep.length
            logs.append(ep)
        row = aggregate(logs, self.iteration)
        self.iteration += 1
        if self.out_dir is not None:
            write_metrics(self.metrics_path, [row])
            if record:
                append_episodes(self.episodes_path, logs)
        log.info("iteration %d: %s", row.iteration, row)
        return row

    def train(self, num_iterations: int) -> List[MetricsRow]:
        return [self.run_iteration() for _ in range(num_iterations)]

    def checkpoint(self, path) -> None:
        save_checkpoint(self.agent, path, progress={"iteration": self.iteration, "episode_index": self.episode_index})

    def restore(self, path) -> None:
        progress = load_checkpoint(self.agent, path)
        self.iteration = int(progress.get("iteration", 0))
        self.episode_index = int(progress.get("episode_index", 0))


# ---------------------------------------------------------------------------
# evaluation


def _eval_chunk(env, agent, seed, indices, digest, record):
    out = []
    for i in indices:
        clone = copy.deepcopy(agent)
        clone.reseed(seed, "eval-agent", i)
        out.append(run_episode(env, clone, make_rng(seed, "eval", i), episode=i,
                               seed=derive_seed(seed, "eval", i), config_digest=digest, record=record))
    return out


def evaluate(
    env: Environment,
    agent: Agent,
    num_episodes: int,
    *,
    seed: int = 0,
    workers: int = 1,
    config_digest: str = "",
    record: bool = False,
    iteration: int = 0,
):
    """Run ``num_episodes`` episodes with a frozen copy of ``agent``.

    Each episode uses its own agent copy and the stream ``(seed, "eval", i)``;
    results are reduced in episode order, so the worker count never changes
    the outcome. ``agent`` itself is left untouched.

    Returns ``(MetricsRow, [EpisodeLog, ...])``.
    """
    frozen = copy.deepcopy(agent).set_training(False)
    indices = list(range(num_episodes))
    if workers <= 1 or num_episodes <= 1:
        logs = _eval_chunk(env, frozen, seed, indices, config_digest, record)
    else:
        chunks = [indices[w::workers] for w in range(workers)]
        logs = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_eval_chunk, env, frozen, seed, c, config_digest, record) for c in chunks if c]
            for f in futures:
                logs.extend(f.result())
        logs.sort(key=lambda e: e.episode)
    return aggregate(logs, iteration), logs


# ---------------------------------------------------------------------------
# checkpoints


def agent_signature(agent: Agent) -> str:
    """Stack description such as ``cluster_click_stats>ucb1``."""
    if hasattr(agent, "base"):
        return f"{agent.kind}>{agent_signature(agent.base)}"
    if hasattr(agent, "children"):
        return f"{agent.kind}[{','.join(agent_signature(c) for c in agent.children)}]"
    return agent.kind


def state_digest(agent: Agent) -> str:
    blob = json.dumps(agent.state_dict(), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def save_checkpoint(agent: Agent, path, progress: Optional[dict] = None) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "agent": agent_signature(agent),
        "progress": progress or {},
        "state": agent.state_dict(),
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload))
    tmp.replace(path)


def load_checkpoint(agent: Agent, path) -> dict:
    """Load a checkpoint into ``agent`` (built from the same config).

    Returns the stored progress mapping.
    """
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpoint(f"cannot read checkpoint {path}: {exc}") from None
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT or "state" not in payload:
        raise CorruptCheckpoint(f"{path} is not a checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise VersionMismatch(f"checkpoint version {payload.get('version')}, expected {CHECKPOINT_VERSION}")
    expected = agent_signature(agent)
    if payload.get("agent") != expected:
        raise VersionMismatch(f"checkpoint holds a {payload.get('agent')!r} agent, expected {expected!r}")
    try:
        agent.load_state_dict(payload["state"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptCheckpoint(f"checkpoint state does not fit the agent: {exc}") from None
    return payload.get("progress", {})


def restore(agent: Agent, path) -> Agent:
    load_checkpoint(agent, path)
    return agent
