"""
Agent layers
============

Layers wrap an agent and change what it sees or how often it acts, without
touching the environment. Here a random agent on the latent bandit is put
under temporal aggregation with growing periods: it decides once every k
turns and in between the layer re-serves slates with the same topics.
"""
from slatesim.agents import RandomAgent
from slatesim.envs import LatentBanditEnv
from slatesim.layers import ClusterClickStatsLayer, TemporalAggregationLayer
from slatesim.rng import make_rng
from slatesim.sim import run_episode

env = LatentBanditEnv({"affinity_scale": 5.0})
print(" k   base decisions  switches  CTR")
for period in (1, 2, 5, 10, 50):
    base = RandomAgent(env.slate_size, seed=0)
    layer = TemporalAggregationLayer(base, period=period, switching_cost=0.1)
    clicks = turns = decisions = switches = 0
    for i in range(20):
        ep = run_episode(env, layer, make_rng(0, "train", i), record=False)
        clicks, turns = clicks + ep.clicks, turns + ep.length
        decisions, switches = decisions + layer.base_calls, switches + layer.switches
    print(f"{period:>2}   {decisions:>14}  {switches:>8}  {100 * clicks / turns:.2f}%")

# Cluster click statistics are what UCB1 reads: per-topic impression and
# click counts gathered from the responses the agent has already seen.
stats = ClusterClickStatsLayer(RandomAgent(env.slate_size, seed=1), num_topics=env.num_topics)
run_episode(env, stats, make_rng(0, "train"), record=False)
print("\nimpressions", stats.impressions)
print("clicks     ", stats.clicks)
