import pytest

from slatesim.core import (
    Corpus,
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

LATENT_USER_FIELDS = {"interests", "satisfaction", "budget"}


def one_hot(t, n=3):
    return tuple(1.0 if i == t else 0.0 for i in range(n))


@pytest.fixture
def corpus():
    return Corpus(tuple(Document(i, one_hot(i % 3), 2.0, quality=0.1 * i) for i in range(1, 11)))


@pytest.fixture
def user():
    return UserState((0.5, -0.2, 0.9), budget=10.0, satisfaction=0.4, observable_features={"age": 3.0})


def test_default_observation_hides_latent_state(user, corpus):
    obs = project_observation(user, corpus, ObservabilityConfig())
    assert "interests" not in obs.user_observable
    assert not LATENT_USER_FIELDS & set(obs.user_observable)
    assert obs.user_observable == {"age": 3.0}


def test_observable_interests_copied_verbatim(user, corpus):
    obs = project_observation(user, corpus, ObservabilityConfig(user_fields=("interests",)))
    assert obs.user_observable["interests"] == (0.5, -0.2, 0.9)


def test_doc_observables_follow_whitelist():
    docs = Corpus(tuple(Document(i, one_hot(i), 1.5, quality=7.0) for i in range(3)))
    user = UserState((0.0, 0.0, 0.0), 1.0)
    obs = project_observation(user, docs, ObservabilityConfig())
    for d in obs.doc_observables:
        assert set(d) == {"id", "topics", "length"}
    assert obs.doc_observables[2] == {"id": 2, "topics": (0.0, 0.0, 1.0), "length": 1.5}


def test_quality_field_exposes_only_observable_quality():
    docs = Corpus((Document(0, (1.0,), quality=5.0, observable_quality=0.3),))
    obs = project_observation(UserState((0.0,), 1.0), docs, ObservabilityConfig(doc_fields=("quality",)))
    assert obs.doc_observables[0]["quality"] == 0.3


def test_user_feature_names_filter(corpus):
    user = UserState((0.0,) * 3, 1.0, observable_features={"age": 1.0, "region": 2.0})
    obs = project_observation(user, corpus, ObservabilityConfig(user_feature_names=("region",)))
    assert obs.user_observable == {"region": 2.0}


def test_projection_is_pure(user, corpus):
    cfg = ObservabilityConfig(user_fields=("budget",))
    r = Response(1, 2.0)
    assert project_observation(user, corpus, cfg, r) == project_observation(user, corpus, cfg, r)


def test_unknown_observable_field_rejected():
    with pytest.raises(ValueError):
        ObservabilityConfig(user_fields=("mood",))


@pytest.mark.parametrize(
    "slate, error",
    [((1, 2, 3), None), ((1, 1), DuplicateItem), ((99,), UnknownDocument), ((), None)],
)
def test_validate_slate(corpus, slate, error):
    if error is None:
        validate_slate(slate, corpus)
    else:
        with pytest.raises(error):
            validate_slate(slate, corpus)


def test_corpus_invariants():
    with pytest.raises(ValueError):
        Corpus(())
    with pytest.raises(ValueError):
        Corpus((Document(1, (1.0,)), Document(1, (1.0,))))
    with pytest.raises(ValueError):
        Document(0, (1.0,), length=0.0)


def test_user_state_invariants():
    with pytest.raises(ValueError):
        UserState((0.0,), budget=-1.0)
    with pytest.raises(ValueError):
        UserState((0.0,), budget=1.0, satisfaction=1.5)


def test_dominant_topic():
    assert Document(0, (0.2, 0.9, 0.1)).topic == 1


def test_observation_augment_keeps_original():
    obs = Observation({}, ({"id": 0},))
    aug = obs.augment(extra=1)
    assert aug.features == {"extra": 1}
    assert obs.features == {}
    assert aug.doc_observables is obs.doc_observables


def test_observation_serialises_to_json_types(user, corpus):
    obs = project_observation(user, corpus, ObservabilityConfig(user_fields=("interests",)), Response(0, 1.0))
    d = obs.to_dict()
    assert d["user"]["interests"] == [0.5, -0.2, 0.9]
    assert d["last_response"] == {"chosen_index": 0, "engagement": 1.0, "revealed_quality": None}
