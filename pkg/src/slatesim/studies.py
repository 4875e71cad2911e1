"""Case-study drivers and the strategy-by-environment CTR table.

The latent-bandit study runs every strategy of the packaged configs for a
list of seeds. Agents learn online while they are being scored, so the CTR
of a run is the pooled click-through rate of its training iterations.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

from .config import build_agent, build_env, digest, load_config, packaged_config_dir, sim_settings
from .rng import make_rng
from .sim import MetricsRow, Simulation, run_episode

STRATEGY_ORDER = ("Random", "Greedy", "TabularQ", "FullSlateQ", "UCB1")
BASELINE = "Random"
REGIMES = ("low", "high")
CASE_STUDY_STRATEGIES = ("random", "greedy", "tabular_q", "full_slate_q", "ucb1")


class MissingBaseline(ValueError):
    """A summary table needs a Random row for every environment."""


def pooled_ctr(rows: Sequence[MetricsRow]) -> float:
    turns = sum(r.avg_length * r.episodes for r in rows)
    if turns == 0:
        return 0.0
    return sum(r.ctr * r.avg_length * r.episodes for r in rows) / turns


def train_run(config: Mapping, out_dir=None) -> List[MetricsRow]:
    settings = sim_settings(config)
    env = build_env(config)
    agent = build_agent(config, env)
    sim = Simulation(env, agent, seed=settings["seed"], turns_per_iteration=settings["turns_per_iteration"],
                     out_dir=out_dir, config_digest=digest(config), log_episodes=settings["log_episodes"])
    return sim.train(settings["num_train_iterations"])


def latent_bandit_config(regime: str, strategy: str, seed: int = 0) -> dict:
    return load_config(packaged_config_dir() / f"latent_bandit_{regime}_{strategy}.json", seed=seed)


def latent_bandit_study(
    seeds: Iterable[int] = range(20),
    regimes: Sequence[str] = REGIMES,
    strategies: Sequence[str] = CASE_STUDY_STRATEGIES,
) -> Dict[str, Dict[str, List[float]]]:
    """Per-seed CTRs as ``{regime: {strategy: [ctr, ...]}}``."""
    seeds = list(seeds)
    out: Dict[str, Dict[str, List[float]]] = {}
    for regime in regimes:
        for strategy in strategies:
            ctrs = []
            for seed in seeds:
                cfg = latent_bandit_config(regime, strategy, seed)
                cfg["sim"]["log_episodes"] = False
                ctrs.append(pooled_ctr(train_run(cfg)))
            out.setdefault(regime, {})[strategy] = ctrs
    return out


class _SatisfactionProbe:
    """Delegates to an environment and remembers the last user satisfaction."""

    def __init__(self, env):
        self.env = env
        self.last = None

    def __getattr__(self, name):
        return getattr(self.env, name)

    def sample_user(self, rng):
        state = self.env.sample_user(rng)
        self.last = state.satisfaction
        return state

    def transition(self, *args):
        state = self.env.transition(*args)
        self.last = state.satisfaction
        return state


def final_satisfaction(config: Mapping, episodes: int = 200) -> List[float]:
    """User satisfaction at the end of each of ``episodes`` sessions.

    The agent is the one built from ``config``; it keeps learning, if it
    learns at all, across the sessions.
    """
    seed = sim_settings(config)["seed"]
    probe = _SatisfactionProbe(build_env(config))
    agent = build_agent(config, probe.env)
    out = []
    for i in range(episodes):
        run_episode(probe, agent, make_rng(seed, "train", i), episode=i, record=False)
        out.append(probe.last)
    return out


@dataclass(frozen=True)
class TableRow:
    strategy: str
    environment: str
    ctr: float
    lift: Optional[float]
    runs: int


def strategy_rank(name: str):
    return (STRATEGY_ORDER.index(name) if name in STRATEGY_ORDER else len(STRATEGY_ORDER), name)


def ctr_table(results: Iterable[Mapping]) -> List[TableRow]:
    """Average CTR per (strategy, environment) with lift over Random.

    ``results`` holds mappings with ``strategy``, ``environment`` and ``ctr``
    keys, one per run; runs of the same pair are averaged.
    """
    groups: Dict[tuple, List[float]] = {}
    for r in results:
        groups.setdefault((r["environment"], r["strategy"]), []).append(float(r["ctr"]))
    environments = sorted({env for env, _ in groups})
    rows = []
    for env in environments:
        base = groups.get((env, BASELINE))
        if not base:
            raise MissingBaseline(f"no {BASELINE} run for environment {env!r}")
        base_ctr = sum(base) / len(base)
        names = sorted((s for e, s in groups if e == env), key=strategy_rank)
        for s in names:
            vals = groups[(env, s)]
            ctr = sum(vals) / len(vals)
            lift = None if s == BASELINE else (100.0 * (ctr / base_ctr - 1.0) if base_ctr > 0 else float("inf"))
            rows.append(TableRow(s, env, ctr, lift, len(vals)))
    return rows


def format_table(rows: Sequence[TableRow]) -> str:
    """Strategies down, environments across; CTR in percent with lift."""
    environments = list(dict.fromkeys(r.environment for r in rows))
    strategies = sorted({r.strategy for r in rows}, key=strategy_rank)
    cell = {(r.strategy, r.environment): r for r in rows}

    def fmt(r: Optional[TableRow]) -> str:
        if r is None:
            return "-"
        text = f"{100 * r.ctr:.2f}"
        return text if r.lift is None else f"{text} ({r.lift:.2f}%)"

    header = ["Strategy"] + [f"{e} Avg. CTR (%)" for e in environments]
    body = [[s] + [fmt(cell.get((s, e))) for e in environments] for s in strategies]
    widths = [max(len(line[i]) for line in [header] + body) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(line, widths)).rstrip() for line in [header] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def write_table_csv(path, rows: Sequence[TableRow]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["strategy", "environment", "ctr_percent", "lift_percent", "runs"])
        for r in rows:
            w.writerow([r.strategy, r.environment, f"{100 * r.ctr:.4f}",
                        "" if r.lift is None else f"{r.lift:.4f}", r.runs])
