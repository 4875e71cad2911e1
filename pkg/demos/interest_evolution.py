"""
Interest evolution under two choice models
==========================================

Users drift toward topics they consume and stop when their time budget runs
out. We train a full-slate Q agent and an omniscient greedy agent, then
evaluate both under the training choice model and under a cascade model.
"""
import numpy as np

from slatesim.config import build_agent, build_env, load_config, packaged_config_dir, sim_settings
from slatesim.sim import Simulation, evaluate

for name in ("interest_evolution_greedy", "interest_evolution_full_slate_q"):
    cfg = load_config(packaged_config_dir() / f"{name}.json")
    settings = sim_settings(cfg)
    env = build_env(cfg)
    agent = build_agent(cfg, env)
    sim = Simulation(env, agent, seed=settings["seed"], turns_per_iteration=settings["turns_per_iteration"])
    rows = sim.train(settings["num_train_iterations"])
    if rows:
        print(f"{name}: training reward by iteration", np.round([r.avg_reward for r in rows], 1))
    for label, override in (("conditional", {}), ("cascade", {"choice": {"kind": "cascade"}})):
        row, _ = evaluate(build_env(cfg, override), agent, 20, seed=1)
        print(f"  eval under {label:<11} reward {row.avg_reward:7.1f}  length {row.avg_length:6.1f}  "
              f"CTR {100 * row.ctr:5.2f}%  topics {row.diversity:4.1f}")

# The Q agent keys its table on two bins per topic interest, 1024 cells in
# all. A few thousand training turns leave most of them unvisited, and an
# unvisited cell falls back to the first enumerated slate, so the myopic
# ranker that reads the user's interests directly wins here.
