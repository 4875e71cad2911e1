import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slatesim.core import Corpus, Document, Response, UserState
from slatesim.envs import (
    ChocKaleEnv,
    InterestEvolutionEnv,
    LatentBanditEnv,
    budget_after,
    make_env,
    nudge_interest,
    nudge_magnitude,
    satisfaction,
)
from slatesim.rng import make_rng


def test_make_env_by_kind():
    env = make_env({"kind": "latent_bandit", "affinity_scale": 0.5}, seed=3)
    assert isinstance(env, LatentBanditEnv)
    assert env.config.affinity_scale == 0.5
    with pytest.raises(ValueError):
        make_env({"kind": "latent_bandit", "bogus": 1})
    with pytest.raises(ValueError):
        make_env({"kind": "nope"})


def test_degenerate_quality_noise_gives_topic_means():
    env = InterestEvolutionEnv({"quality_stddev": 1e-300, "num_topics": 3, "quality_means": [0.1, 0.2, 0.3]})
    corpus = env.sample_corpus(np.random.default_rng(0))
    for d in corpus.documents:
        assert d.quality == [0.1, 0.2, 0.3][d.topic]


def test_latent_bandit_quality_positive_with_unit_mean():
    env = LatentBanditEnv({"candidate_count": 2000})
    q = np.array([d.quality for d in env.sample_corpus(np.random.default_rng(1)).documents])
    assert (q > 0).all()
    # E[L] = 1; sd of the mean is about 0.53 / sqrt(2000)
    assert abs(q.mean() - 1.0) < 0.05


def test_topic_fraction_clt_bound():
    env = InterestEvolutionEnv({"num_topics": 2, "candidate_count": 10})
    rng = np.random.default_rng(7)
    topics = [d.topic for _ in range(1000) for d in env.sample_corpus(rng).documents]
    assert abs(np.mean(np.array(topics) == 0) - 0.5) < 0.05


def test_one_hot_documents():
    corpus = InterestEvolutionEnv().sample_corpus(np.random.default_rng(0))
    for d in corpus.documents:
        assert sorted(d.topics)[-1] == 1.0 and sum(d.topics) == 1.0


def test_satisfaction_convex_combination():
    u = UserState((0.5, 0.0), 1.0)
    d = Document(0, (1.0, 0.0), quality=-0.4)
    assert satisfaction(u, d, 0.25) == pytest.approx(0.75 * 0.5 + 0.25 * -0.4)
    assert satisfaction(u, d, 0.0) == pytest.approx(0.5)
    assert satisfaction(u, d, 1.0) == pytest.approx(-0.4)


@pytest.mark.parametrize("level, y, expected", [(0.5, 0.3, 0.075), (1.0, 0.3, 0.0), (0.0, 0.3, 0.0), (-0.5, 1.0, 0.25)])
def test_nudge_magnitude(level, y, expected):
    assert nudge_magnitude(level, y) == pytest.approx(expected)


def test_nudge_direction():
    assert nudge_interest(0.5, 0.3, True) == pytest.approx(0.575)
    assert nudge_interest(0.5, 0.3, False) == pytest.approx(0.425)
    assert nudge_interest(-0.5, 0.3, True) == pytest.approx(-0.575)


@settings(max_examples=500)
@given(st.floats(-1, 1), st.floats(0, 1), st.booleans())
def test_nudge_stays_in_range_without_clamp(level, y, toward):
    a = abs(level)
    raw = level + (1 if toward else -1) * math.copysign(1.0, level) * y * (1 - a) * a
    assert -1.0 <= raw <= 1.0
    assert -1.0 <= nudge_interest(level, y, toward) <= 1.0


def test_budget_update_examples():
    # l = 4, beta_b = 0.5, appeal 1: bonus 2
    assert budget_after(10.0, 4.0, 0.5, 1.0) == pytest.approx(8.0)
    assert budget_after(10.0, 4.0, 0.5, -3.0) == pytest.approx(6.0)
    assert budget_after(1.0, 4.0, 0.5, 0.0) == 0.0


@settings(max_examples=300)
@given(st.floats(0, 500), st.floats(0.1, 10), st.floats(0, 0.99), st.floats(-5, 5))
def test_budget_never_increases(budget, length, beta, appeal):
    after = budget_after(budget, length, beta, appeal)
    assert after <= budget
    if budget > 0:
        assert after <= max(0.0, budget - length * (1 - beta)) + 1e-9


def test_interest_evolution_transition_only_touches_clicked_topic():
    env = InterestEvolutionEnv({"num_topics": 3, "candidate_count": 3, "slate_size": 1})
    corpus = Corpus(tuple(Document(i, tuple(1.0 if j == i else 0.0 for j in range(3)), 4.0, 0.0) for i in range(3)))
    state = UserState((0.5, -0.2, 0.1), 50.0)
    new = env.transition(state, (1,), corpus, Response(0, 4.0), np.random.default_rng(0))
    assert new.interests[0] == 0.5 and new.interests[2] == 0.1
    assert abs(abs(new.interests[1]) - 0.2) == pytest.approx(0.3 * 0.8 * 0.2)
    assert new.budget < 50.0
    skipped = env.transition(state, (1,), corpus, Response(None), np.random.default_rng(0))
    assert skipped.interests == state.interests
    assert skipped.budget == pytest.approx(49.5)


def test_interest_evolution_episode_ends_on_budget():
    env = InterestEvolutionEnv({"initial_budget": 3.0})
    state = UserState((0.0,) * 10, 0.0)
    assert env.is_terminal(state, 1)
    assert not env.is_terminal(UserState((0.0,) * 10, 3.0), 1)


def test_latent_bandit_interests_static_and_reward_is_click():
    env = LatentBanditEnv()
    rng = make_rng(0, "train")
    state = env.sample_user(rng)
    corpus = env.candidates(rng)
    for _ in range(50):
        r = env.respond(state, (0,), corpus, rng)
        assert env.reward(r) == (1.0 if r.clicked else 0.0)
        state = env.transition(state, (0,), corpus, r, rng)
    assert state.interests == env.sample_user(make_rng(0, "train")).interests
    assert state.budget == env.config.episode_length


def test_latent_bandit_score_uses_affinity_scale():
    u = UserState((1.0, 0.0), 1.0)
    d = Document(0, (1.0, 0.0), quality=0.8)
    assert LatentBanditEnv({"num_topics": 2, "affinity_scale": 5.0}).score(u, d) == pytest.approx(5.8)
    assert LatentBanditEnv({"num_topics": 2, "affinity_scale": 0.5}).score(u, d) == pytest.approx(1.3)


def test_choc_kale_engagement_parameters():
    cfg = ChocKaleEnv().config
    assert cfg.engagement_params(0.0) == (cfg.mu_choc, cfg.sigma_choc)
    assert cfg.engagement_params(1.0) == pytest.approx((cfg.mu_kale, cfg.sigma_kale))
    assert cfg.expected_engagement(0.0) > cfg.expected_engagement(1.0)


def test_choc_kale_engagement_lognormal_mean():
    env = ChocKaleEnv()
    rng = np.random.default_rng(0)
    doc = Document(0, (1.0,) + (0.0,) * 4, quality=1.0, observable_quality=1.0)
    draws = [env.engagement(doc, None, rng) for _ in range(20000)]
    assert np.mean(draws) == pytest.approx(env.config.expected_engagement(1.0), rel=0.02)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_choc_kale_satisfaction_stays_in_unit_interval(seed):
    env = ChocKaleEnv({"satisfaction_step": 0.3, "satisfaction_noise": 0.3})
    rng = np.random.default_rng(seed)
    state = env.sample_user(rng)
    corpus = env.candidates(rng)
    for _ in range(100):
        slate = (int(rng.integers(10)),)
        state = env.transition(state, slate, corpus, env.respond(state, slate, corpus, rng), rng)
        assert 0.0 <= state.satisfaction <= 1.0


def test_sampling_reproducible():
    for env in (InterestEvolutionEnv(), LatentBanditEnv(), ChocKaleEnv()):
        a, b = make_rng(5, "train", 2), make_rng(5, "train", 2)
        assert env.sample_user(a) == env.sample_user(b)
        assert env.candidates(a) == env.candidates(b)


def test_fixed_corpus_shared_across_episodes():
    env = LatentBanditEnv({"fixed_corpus": True}, seed=4)
    assert env.candidates(make_rng(0, "train", 0)) is env.candidates(make_rng(0, "train", 1))
    other = env.with_overrides({"choice": {"kind": "logit"}})
    assert other.candidates(make_rng(0, "eval")).documents == env.candidates(None).documents


def test_overrides_replace_choice_model():
    env = InterestEvolutionEnv()
    other = env.with_overrides({"choice": {"kind": "logit"}})
    assert other.choice.kind == "logit" and env.choice.kind == "conditional"
    assert other.digest != env.digest


def test_config_validation():
    with pytest.raises(ValueError):
        LatentBanditEnv({"quality_log_stddev": 0.0})
    with pytest.raises(ValueError):
        ChocKaleEnv({"satisfaction_step": 1.0})
    with pytest.raises(ValueError):
        InterestEvolutionEnv({"bonus_coefficient": 1.0})
