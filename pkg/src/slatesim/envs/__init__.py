from .base import (
    Environment,
    budget_after,
    build_config,
    config_digest,
    config_to_dict,
    is_terminal,
    nudge_interest,
    nudge_magnitude,
    prior_mean,
    satisfaction,
)
from .choc_kale import ChocKaleConfig, ChocKaleEnv
from .interest_evolution import InterestEvolutionConfig, InterestEvolutionEnv
from .latent_bandit import HIGH_AFFINITY, LOW_AFFINITY, LatentBanditConfig, LatentBanditEnv

ENVIRONMENTS = {
    InterestEvolutionEnv.kind: InterestEvolutionEnv,
    LatentBanditEnv.kind: LatentBanditEnv,
    ChocKaleEnv.kind: ChocKaleEnv,
}


def make_env(entry, seed: int = 0) -> Environment:
    """Build an environment from a ``{"kind": ..., **params}`` mapping."""
    params = dict(entry)
    kind = params.pop("kind")
    try:
        cls = ENVIRONMENTS[kind]
    except KeyError:
        raise ValueError(f"unknown environment kind {kind!r}; expected one of {sorted(ENVIRONMENTS)}") from None
    return cls(params, seed=seed)
