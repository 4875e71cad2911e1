"""
Chocolate versus kale
=====================

Chocolate documents (kaleness near 0) earn more engagement per click; kale
documents raise the user's satisfaction, and satisfied users click more.
A recommender that maximises immediate engagement wins each turn and loses
the session.
"""
import numpy as np

from slatesim.config import load_config, packaged_config_dir
from slatesim.studies import final_satisfaction, train_run

EPISODES = 200

for name in ("choc_kale_myopic", "choc_kale_kale_only", "choc_kale_hierarchical"):
    cfg = load_config(packaged_config_dir() / f"{name}.json")
    sat = np.array(final_satisfaction(cfg, EPISODES))
    rows = train_run(cfg)
    reward = np.mean([r.avg_reward for r in rows])
    ctr = np.mean([r.ctr for r in rows])
    print(f"{name:<24} final satisfaction {sat.mean():.3f} (sd {sat.std():.3f})  "
          f"engagement/session {reward:8.1f}  CTR {100 * ctr:5.2f}%")

# The hierarchical agent picks between the two greedy policies with an
# epsilon-greedy selector on per-turn reward, so it settles on the child
# that earns more engagement per turn, and that child is the chocolate one.
