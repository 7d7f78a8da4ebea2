import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matchtech import playerank as PR
from matchtech.errors import NotFoundError, ParameterError, TrainingError, UndefinedValueError
from matchtech.ingest import EventType, Player, build_store, Match

from conftest import ev, store_of

P, S, D = EventType.PASS, EventType.SHOT, EventType.DUEL


def test_feature_order_documented():
    assert PR.FEATURE_ORDER[:4] == ("pass_accurate", "pass_inaccurate", "shot_accurate", "shot_inaccurate")
    assert len(PR.FEATURE_ORDER) == 14


def test_raw_counts():
    x = PR.raw_counts([ev(P, 1, t, accurate=True) for t in range(5)])
    assert x[0] == 5 and np.count_nonzero(x) == 1
    assert not PR.raw_counts([]).any()


def test_known_tallies():
    evs = [ev(P, 1, 1, 11, accurate=True), ev(P, 1, 2, 11, accurate=False), ev(P, 1, 3, 11, accurate=True),
           ev(S, 1, 4, 11, tags=(1801,)), ev(D, 1, 5, 11), ev(P, 1, 6, 12, accurate=True)]
    store = store_of(evs)
    v = PR.extract_performance_vector(11, 1, store)
    tally = dict(zip(PR.FEATURE_ORDER, v.raw))
    assert tally["pass_accurate"] == 2 and tally["pass_inaccurate"] == 1
    assert tally["shot_accurate"] == 1 and tally["duel_inaccurate"] == 1
    assert v.raw.sum() == 5


def test_absent_player():
    store = store_of([ev(P, 1, 1, 11)])
    with pytest.raises(NotFoundError):
        PR.extract_performance_vector(999, 1, store)


def test_rostered_player_without_events_is_zero():
    evs = [ev(P, 1, 1, 11)]
    matches = {1: Match(1, (1, 2))}
    store = build_store(matches, {11: Player(11, 1), 13: Player(13, 1)}, evs)
    assert not PR.extract_performance_vector(13, 1, store).raw.any()


def test_normalizer_range():
    raw = np.array([[0, 5], [2, 5], [4, 5]], dtype=float)
    norm = PR.Normalizer.fit(raw)
    out = norm.transform(raw)
    assert out[:, 0].tolist() == [0.0, 0.5, 1.0] and not out[:, 1].any()
    assert norm.transform([10, 7]).tolist() == [1.0, 0.0]


def test_weights_dominant_feature():
    rng = np.random.default_rng(0)
    x = rng.random((60, 4))
    y = x[:, 2] > 0.5
    w = PR.learn_weights(x, y)
    assert int(np.argmax(np.abs(w.weights))) == 2
    flipped = PR.learn_weights(x, ~y)
    assert flipped.weights == pytest.approx(-w.weights, abs=1e-12)
    assert w.R == pytest.approx(np.abs(w.weights).sum())


def test_weights_closed_form():
    rng = np.random.default_rng(4)
    x = rng.random((40, 2))
    y = x[:, 0] + 0.3 * x[:, 1] + 0.1 * rng.standard_normal(40) > 0.65
    t = np.where(y, 1.0, -1.0)
    design = np.column_stack([x, np.ones(40)])
    beta = np.linalg.solve(design.T @ design, design.T @ t)  # normal equations
    w = PR.learn_weights(x, y)
    assert w.weights == pytest.approx(beta[:2], abs=1e-6)
    assert w.intercept == pytest.approx(beta[2], abs=1e-6)


def test_weights_single_class():
    with pytest.raises(TrainingError):
        PR.learn_weights(np.eye(3), [True, True, True])


def test_rate_examples():
    w = PR.FeatureWeights(np.array([1.0, 1.0]), ("a", "b"))
    assert PR.rate(np.ones(2), w) == 1.0
    assert PR.rate(np.zeros(2), w) == 0.0
    with pytest.raises(TypeError):
        PR.rate(np.ones(3), w)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.01, 100))
def test_rate_oracle_bounds_and_scale(seed, c):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(14)
    x = rng.random(14)
    fw = PR.FeatureWeights(w)
    r = PR.rate(x, fw)
    assert r == pytest.approx(sum(a * b for a, b in zip(w, x)) / sum(abs(a) for a in w), abs=1e-12)
    assert -1 <= r <= 1
    assert PR.rate(x, PR.FeatureWeights(c * w)) == pytest.approx(r, abs=1e-12)


def test_combine_goals():
    assert PR.combine_goals(0.4, 0) == pytest.approx(0.9 * 0.4)
    assert PR.combine_goals(0.0, 4) == pytest.approx(0.10)
    assert PR.combine_goals(0.0, 9) == pytest.approx(0.10)
    assert PR.combine_goals(0.0, 2, goal_cap=2) == pytest.approx(0.10)
    for bad in (-0.1, 1.5):
        with pytest.raises(ParameterError):
            PR.combine_goals(0.1, 1, bad)
    with pytest.raises(ParameterError):
        PR.combine_goals(0.1, -1)


@settings(max_examples=100, deadline=None)
@given(st.floats(-1, 1), st.integers(0, 10), st.floats(0, 1))
def test_combine_monotone_in_goals(r, g, a):
    assert PR.combine_goals(r, g + 1, a) >= PR.combine_goals(r, g, a)


def test_two_blobs():
    rng = np.random.default_rng(2)
    pts = np.vstack([rng.normal((20, 20), 1, (15, 2)), rng.normal((80, 70), 1, (15, 2))])
    rm = PR.detect_roles(pts, 2, seed=5)
    assert len(set(rm.labels[:15])) == 1 and len(set(rm.labels[15:])) == 1
    assert rm.labels[0] != rm.labels[15]


def test_support_threshold_and_tie():
    rm = PR.RoleModel(centroids=np.array([[0.0, 0.0], [10.0, 10.0], [20.0, 20.0]]))
    assert rm.assign_role(np.array([[0, 0], [10, 10]])) == 0  # 50/50 tie, lower index
    assert rm.assign_role(np.array([[10, 10], [10, 10], [0, 0]])) == 1
    assert rm.assign_role(np.array([[0, 0], [10, 10], [20, 20]])) is None  # 33% each
    assert rm.assign_role(np.empty((0, 2))) is None


def lloyd_oracle(pts, k, seed):
    """Plain Lloyd iterations from the same seeded k-means++ start, to convergence."""
    rng = np.random.default_rng(seed)
    centers = PR.kmeans_pp_init(pts, k, rng).copy()
    while True:
        labels = np.array([int(np.argmin([np.sum((p - c) ** 2) for c in centers])) for p in pts])
        new = np.array([pts[labels == j].mean(axis=0) if np.any(labels == j) else centers[j] for j in range(k)])
        if np.allclose(new, centers, atol=0):
            return new, labels
        centers = new


def test_kmeans_matches_lloyd_oracle():
    rng = np.random.default_rng(8)
    pts = rng.uniform(0, 100, (30, 2))
    rm = PR.detect_roles(pts, 3, seed=3)
    centers, labels = lloyd_oracle(pts, 3, 3)
    assert rm.centroids == pytest.approx(centers, abs=1e-12)
    assert rm.labels.tolist() == labels.tolist()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 6))
def test_kmeans_objective_non_increasing(seed, k):
    pts = np.random.default_rng(seed).uniform(0, 100, (25, 2))
    rm = PR.detect_roles(pts, k, seed=seed)
    h = rm.inertia_history
    assert all(b <= a + 1e-9 for a, b in zip(h, h[1:]))
    again = PR.detect_roles(pts, k, seed=seed)
    assert again.labels.tolist() == rm.labels.tolist()


def test_too_few_players():
    with pytest.raises(ParameterError):
        PR.detect_roles(np.zeros((2, 2)), 3)


def test_pr_team_stats():
    assert PR.pr_team_stats([0.5]) == (0.5, 0.0)
    avg, sd = PR.pr_team_stats([0.2, 0.4])
    assert avg == pytest.approx(0.3, abs=1e-15) and sd == pytest.approx(0.1, abs=1e-15)
    with pytest.raises(UndefinedValueError):
        PR.pr_team_stats([])


def test_pipeline_on_corpus(small_corpus):
    res = PR.run_playerank(small_corpus, seed=1)
    assert res.weights.R == pytest.approx(np.abs(res.weights.weights).sum())
    for r in res.ratings:
        assert -1 <= r.r <= 1
        assert r.combined == pytest.approx(PR.combine_goals(r.r, r.goals))
    stats = res.team_stats()
    assert set(stats) == {(m, t) for m in small_corpus.match_ids() for t in small_corpus.matches[m].team_ids}
    assert all(sd >= 0 for _, sd in stats.values())
    # every assigned role meets the support threshold
    pos = PR.average_positions(small_corpus)
    for pid, role in res.player_roles.items():
        if role is None:
            continue
        hist = np.array([p for (q, _), p in pos.items() if q == pid])
        assert np.mean(res.roles.predict(hist) == role) >= PR.ROLE_SUPPORT
    buf = io.StringIO()
    PR.write_weights(res.weights, buf)
    back = PR.read_weights(io.StringIO("# header\n" + buf.getvalue()))
    assert back.weights.tolist() == res.weights.weights.tolist() and back.names == res.weights.names
    again = PR.run_playerank(small_corpus, seed=1)
    assert [r.combined for r in again.ratings] == [r.combined for r in res.ratings]
