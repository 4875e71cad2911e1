"""Configurable simulation of sequential recommendation with slates."""
from .agents import (
    ActionSpaceOverflow,
    Agent,
    AgentStep,
    CorpusTooSmall,
    FullSlateQAgent,
    GreedyAgent,
    RandomAgent,
    TabularQAgent,
    UCB1Agent,
)
from .choice import ChoiceConfig, InvalidScore, choice_distribution, distribution_from_scores, sample_choice
from .core import (
    Corpus,
    DimensionMismatch,
    Document,
    DuplicateItem,
    ObservabilityConfig,
    Observation,
    Response,
    UnknownDocument,
    UserState,
    project_observation,
    validate_slate,
)
from .envs import ChocKaleEnv, InterestEvolutionEnv, LatentBanditEnv, make_env
from .layers import (
    ClusterClickStatsLayer,
    FixedLengthHistoryLayer,
    HierarchicalAgent,
    NoChildren,
    TemporalAggregationLayer,
)
from .sim import (
    CorruptCheckpoint,
    EpisodeLog,
    MetricsRow,
    Simulation,
    VersionMismatch,
    evaluate,
    load_checkpoint,
    run_episode,
    save_checkpoint,
)

__version__ = "0.1.0"
