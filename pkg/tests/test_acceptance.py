"""Acceptance criteria. Each test prints one PASS/FAIL line."""
import json
import math
import time
from collections import Counter

import numpy as np
import pytest

from scripted import BernoulliTopicsEnv, ScriptedEnv, chain_q_oracle, train_chain
from slatesim.agents import FullSlateQAgent, RandomAgent, TabularQAgent, UCB1Agent
from slatesim.choice import ChoiceConfig, choice_distribution
from slatesim.cli import main
from slatesim.config import build_agent, build_env, load_config, packaged_config_dir
from slatesim.core import Corpus, Document, Response, UserState
from slatesim.envs import InterestEvolutionEnv
from slatesim.layers import ClusterClickStatsLayer, TemporalAggregationLayer
from slatesim.rng import make_rng
from slatesim.sim import Simulation, evaluate, run_episode
from slatesim.studies import final_satisfaction, latent_bandit_study


@pytest.fixture
def verdict(capsys):
    def report(number, name, ok, detail=""):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'} {name}: {detail}")
        return ok
    return report


def packaged(name, seed=None):
    return load_config(packaged_config_dir() / f"{name}.json", seed=seed)


# 1 ---------------------------------------------------------------------------------

def test_latent_bandit_ordering(verdict):
    start = time.perf_counter()
    results = latent_bandit_study(range(20))
    elapsed = time.perf_counter() - start
    mean = {r: {s: float(np.mean(v)) for s, v in by.items()} for r, by in results.items()}
    lift = {r: mean[r]["ucb1"] / mean[r]["random"] - 1.0 for r in mean}
    failures = []
    for regime, m in mean.items():
        checks = {
            "UCB1 > FullSlateQ": m["ucb1"] > m["full_slate_q"],
            "FullSlateQ >= TabularQ": m["full_slate_q"] >= m["tabular_q"],
            "TabularQ > Random": m["tabular_q"] > m["random"],
            "Greedy > Random": m["greedy"] > m["random"],
        }
        failures += [f"{regime}: {c}" for c, ok in checks.items() if not ok]
    if not lift["high"] > lift["low"]:
        failures.append("UCB1 lift high > low")
    if not elapsed < 300:
        failures.append("runtime")
    table = "; ".join(
        f"{r} " + " ".join(f"{s}={100 * v:.2f}" for s, v in m.items()) + f" lift={100 * lift[r]:.1f}%"
        for r, m in mean.items()
    )
    ok = not failures
    verdict(1, "latent-bandit ordering", ok,
            f"{table}; {elapsed:.0f}s" + ("" if ok else f"; violated: {', '.join(failures)}"))
    assert ok, failures


# 2 ---------------------------------------------------------------------------------

def random_choice_case(rng):
    n_topics = int(rng.integers(1, 6))
    k = int(rng.integers(1, 6))
    kind = ("conditional", "logit", "cascade")[int(rng.integers(3))]
    fn = ("exp", "identity", "affine")[int(rng.integers(3))] if kind == "conditional" else "exp"
    null = None if rng.random() < 0.3 else float(rng.normal(0, 3))
    low = 0.0 if fn == "identity" else -1.0
    scale = float(rng.choice([1e-6, 1.0, 30.0]))
    user = UserState(tuple((rng.uniform(low, 1.0, n_topics) * scale).tolist()), 1.0)
    if kind == "conditional":
        slope = float(rng.uniform(0.1, 3))
        # topic weights sum to one, so |score| <= max |interest|; keep every weight non-negative
        offset = slope * max(abs(x) for x in user.interests) + float(rng.uniform(0, 2))
        cfg = ChoiceConfig(kind, fn, slope=slope, offset=offset, null_score=None if null is None else abs(null))
    else:
        cfg = ChoiceConfig(kind, null_score=null, cascade_attention=float(rng.uniform(0.01, 1.0)),
                           cascade_squash=("sigmoid", "clip")[int(rng.integers(2))])
    docs = tuple(Document(i, tuple(rng.dirichlet(np.ones(n_topics)).tolist())) for i in range(k + int(rng.integers(0, 4))))
    slate = tuple(rng.permutation(len(docs))[:k].tolist())
    if fn == "identity" and not cfg.null_score and max(user.interests) == 0:
        # every weight would be zero
        cfg = ChoiceConfig(kind, "exp")
    return user, slate, Corpus(docs), cfg


def test_choice_normalization(verdict):
    rng = np.random.default_rng(2024)
    worst, negative, kinds = 0.0, 0, Counter()
    for _ in range(100_000):
        user, slate, corpus, cfg = random_choice_case(rng)
        dist = choice_distribution(user, slate, corpus, cfg)
        kinds[cfg.kind] += 1
        worst = max(worst, abs(dist.sum() - 1.0))
        negative += int((dist < 0).any()) + int(len(dist) != len(slate) + 1)
    ok = worst <= 1e-9 and negative == 0 and len(kinds) == 3
    verdict(2, "choice normalization", ok, f"max |sum-1| = {worst:.2e}, bad entries {negative}, kinds {dict(kinds)}")
    assert ok


# 3 ---------------------------------------------------------------------------------

def test_interest_and_budget_invariants(verdict):
    rng = np.random.default_rng(7)
    steps = episodes = violations = 0
    worst_len = 0
    while steps < 1_000_000:
        env = InterestEvolutionEnv({
            "num_topics": int(rng.integers(1, 8)),
            "doc_length": float(rng.uniform(0.5, 6)),
            "initial_budget": float(rng.uniform(1, 300)),
            "bonus_coefficient": float(rng.uniform(0, 0.95)),
            "nudge_fraction": float(rng.uniform(0, 1)),
            "positive_nudge_prob": float(rng.uniform(0, 1)),
            "no_click_cost": float(rng.uniform(0.1, 2)),
            "satisfaction_weight": float(rng.uniform(0, 1)),
            "episode_length": int(rng.integers(50, 2000)),
            "slate_size": 2, "candidate_count": 5,
        })
        cfg = env.config
        state, corpus = env.sample_user(rng), env.candidates(rng)
        t = 0
        while not env.is_terminal(state, t):
            slate = tuple(rng.permutation(5)[:2].tolist())
            # half model responses, half arbitrary ones
            if rng.random() < 0.5:
                response = env.respond(state, slate, corpus, rng)
            else:
                response = Response(None if rng.random() < 0.3 else int(rng.integers(2)), 1.0)
            new = env.transition(state, slate, corpus, response, rng)
            if not all(-1.0 <= x <= 1.0 for x in new.interests) or new.budget > state.budget:
                violations += 1
            state = new
            t += 1
        steps += t
        episodes += 1
        bound = math.ceil(cfg.initial_budget / (cfg.doc_length * (1 - cfg.bonus_coefficient))) + cfg.episode_length
        # tighter: every turn spends at least min(click cost, no-click cost)
        tight = math.ceil(cfg.initial_budget / min(cfg.doc_length * (1 - cfg.bonus_coefficient), cfg.no_click_cost))
        if t > min(bound, max(tight, 1)):
            violations += 1
        worst_len = max(worst_len, t)
    ok = violations == 0
    verdict(3, "interest/budget invariants", ok,
            f"{steps} transitions over {episodes} episodes, {violations} violations, longest episode {worst_len}")
    assert ok


# 4 ---------------------------------------------------------------------------------

@pytest.mark.parametrize("cls", [TabularQAgent, FullSlateQAgent], ids=["TabularQ", "FullSlateQ"])
def test_chain_oracle(verdict, cls):
    oracle = chain_q_oracle(0.9)
    start = time.perf_counter()
    got = train_chain(cls(1, features="user", gamma=0.9, learning_rate=0.1), 100_000)
    elapsed = time.perf_counter() - start
    err = float(np.abs(got - oracle).max())
    ok = err < 1e-2 and elapsed < 10
    verdict(4, f"chain oracle ({cls.__name__})", ok, f"max |Q - Q*| = {err:.2e}, {elapsed:.1f}s")
    assert ok


# 5 ---------------------------------------------------------------------------------

def test_ucb1_two_arm(verdict):
    fractions = []
    for seed in range(20):
        agent = ClusterClickStatsLayer(UCB1Agent(1, seed=seed))
        env = BernoulliTopicsEnv({"episode_length": 10_000, "click_probs": (0.9, 0.1)})
        run_episode(env, agent, make_rng(seed, "train"), record=False)
        fractions.append(agent.impressions[0] / sum(agent.impressions))
    ok = min(fractions) > 0.9
    verdict(5, "UCB1 two-arm", ok, f"best-arm fraction min {min(fractions):.4f}, mean {np.mean(fractions):.4f}")
    assert ok


# 6 ---------------------------------------------------------------------------------

class CountingAgent(RandomAgent):
    kind = "counting"

    def __init__(self, slate_size, seed=0):
        super().__init__(slate_size, seed)
        self.decisions = 0
        self.received = 0.0

    def begin_episode(self, obs):
        self.decisions += 1
        return super().begin_episode(obs)

    def step(self, reward, obs):
        self.decisions += 1
        self.received += reward
        return super().step(reward, obs)

    def end_episode(self, reward, obs):
        self.received += reward


def logged_switches(ep):
    prev, n = None, 0
    for turn in ep.turns:
        topics = {d["id"]: d["topics"].index(max(d["topics"])) for d in turn["obs"]["docs"]}
        feats = Counter(topics[i] for i in turn["slate"])
        n += prev is not None and feats != prev
        prev = feats
    return n


def test_temporal_aggregation_contract(verdict):
    env = ScriptedEnv({"episode_length": 1000, "candidate_count": 6})
    base = CountingAgent(2, seed=1)
    run_episode(env, TemporalAggregationLayer(base, period=10), make_rng(0, "train"), record=False)
    calls_ok = base.decisions == 100

    cost = 0.25
    base = CountingAgent(2, seed=1)
    layer = TemporalAggregationLayer(base, period=10, switching_cost=cost)
    ep = run_episode(env, layer, make_rng(0, "train"))
    env_reward = sum(t["reward"] for t in ep.turns)
    switches = logged_switches(ep)
    reward_ok = switches == layer.switches > 0 and math.isclose(base.received, env_reward - cost * switches)
    ok = calls_ok and reward_ok
    verdict(6, "temporal aggregation", ok,
            f"base decisions {base.decisions} (begin_episode + step), switches {switches}, "
            f"base reward {base.received:.2f} vs {env_reward:.2f} - {cost} x {switches}")
    assert ok


# 7 ---------------------------------------------------------------------------------

def small_config(tmp_path):
    cfg = packaged("latent_bandit_high_full_slate_q")
    cfg["sim"].update(num_train_iterations=4, turns_per_iteration=500, num_eval_episodes=8)
    cfg["env"]["episode_length"] = 100
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(cfg))
    return cfg, path


def test_determinism_and_checkpoint(verdict, tmp_path):
    cfg, path = small_config(tmp_path)
    for tag in ("a", "b"):
        assert main(["run", "--config", str(path), "--out", str(tmp_path / tag)]) == 0
    names = ("train_episodes.jsonl", "eval_episodes.jsonl", "metrics.csv", "eval_metrics.csv")
    same_logs = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names)

    def sim_in(out):
        env = build_env(cfg)
        return Simulation(env, build_agent(cfg, env), seed=0, turns_per_iteration=500, out_dir=out)

    full = sim_in(tmp_path / "full")
    full.train(4)
    half = sim_in(tmp_path / "resumed")
    half.train(2)
    half.checkpoint(tmp_path / "mid.json")
    resumed = sim_in(tmp_path / "resumed")
    resumed.restore(tmp_path / "mid.json")
    resumed.train(2)
    same_resume = all((tmp_path / "full" / n).read_bytes() == (tmp_path / "resumed" / n).read_bytes()
                      for n in ("train_episodes.jsonl", "metrics.csv"))

    one, _ = evaluate(full.env, full.agent, 16, seed=3, workers=1)
    eight, _ = evaluate(full.env, full.agent, 16, seed=3, workers=8)
    ok = same_logs and same_resume and one == eight
    verdict(7, "determinism and checkpoint", ok,
            f"repeat run identical {same_logs}, resumed run identical {same_resume}, 1 vs 8 workers identical {one == eight}")
    assert ok


# 8 ---------------------------------------------------------------------------------

def test_choc_kale_direction(verdict):
    myopic_cfg = packaged("choc_kale_myopic")
    initial = build_env(myopic_cfg).config.initial_satisfaction
    myopic = float(np.mean(final_satisfaction(myopic_cfg, 200)))
    kale = float(np.mean(final_satisfaction(packaged("choc_kale_kale_only"), 200)))
    ok = myopic < initial < kale
    verdict(8, "choc-kale direction", ok, f"initial {initial:.2f}, myopic {myopic:.3f}, kale-only {kale:.3f}")
    assert ok
