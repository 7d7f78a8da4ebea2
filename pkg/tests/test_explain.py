import io
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matchtech import explain as E
from matchtech import learn as L
from matchtech.errors import CapacityError, ParameterError


def brute_shapley(f, x, bg):
    """Shapley values from the subset formula with every v(S) evaluated from scratch."""
    p = len(x)
    cache = {}

    def v(S):
        if S not in cache:
            z = np.array(bg, dtype=float, copy=True)
            for j in S:
                z[:, j] = x[j]
            cache[S] = float(np.mean(f(z)))
        return cache[S]

    phi = np.zeros(p)
    for j in range(p):
        others = [k for k in range(p) if k != j]
        for size in range(p):
            w = math.factorial(size) * math.factorial(p - size - 1) / math.factorial(p)
            for S in itertools.combinations(others, size):
                phi[j] += w * (v(tuple(sorted(S + (j,)))) - v(S))
    return phi


def permutation_shapley(f, x, bg):
    """Shapley values averaged over all p! orderings (tiny p only)."""
    p = len(x)
    phi = np.zeros(p)
    perms = list(itertools.permutations(range(p)))
    for order in perms:
        z = np.array(bg, dtype=float, copy=True)
        prev = float(np.mean(f(z)))
        for j in order:
            z[:, j] = x[j]
            cur = float(np.mean(f(z)))
            phi[j] += cur - prev
            prev = cur
    return phi / len(perms)


def data(seed, n=80, p=6):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = (X[:, 0] + 0.5 * X[:, 1] - 0.3 * X[:, 2] + 0.5 * rng.standard_normal(n) > 0).astype(int)
    return X, y


@pytest.mark.parametrize("kind,params,p", [
    ("adaboost", {"n_estimators": 30}, 12),
    ("random_forest", {"n_estimators": 10, "max_depth": 4}, 10),
    ("decision_tree", {"max_depth": 4}, 8),
    ("logistic", {"l2": 0.1}, 12),
])
def test_exact_matches_brute_force(kind, params, p):
    X, y = data(1, p=p)
    m = L.train_model(kind, X, y, params, seed=2)
    bg = X[:8]
    for x in X[40:42]:
        a = E.shapley_exact(m, x, bg)
        assert a.phi == pytest.approx(brute_shapley(m.predict_proba, x, bg), abs=1e-10)
        assert abs(a.efficiency_gap()) <= 1e-9


def test_brute_force_oracles_agree():
    X, y = data(2, p=5)
    m = L.train_model("logistic", X, y)
    x, bg = X[50], X[:6]
    assert brute_shapley(m.predict_proba, x, bg) == pytest.approx(permutation_shapley(m.predict_proba, x, bg),
                                                                   abs=1e-12)


def test_additive_closed_form():
    a = np.array([2.0, -1.0, 0.5, 0.0])
    f = lambda Z: Z @ a
    rng = np.random.default_rng(0)
    bg, x = rng.standard_normal((15, 4)), rng.standard_normal(4)
    phi = E.shapley_exact(f, x, bg).phi
    assert phi == pytest.approx(a * (x - bg.mean(0)), abs=1e-12)
    assert phi[3] == 0.0
    at_mean = E.shapley_exact(f, bg.mean(0), bg).phi
    assert at_mean == pytest.approx(np.zeros(4), abs=1e-12)


def test_and_stump_pair():
    f = lambda Z: ((Z[:, 0] > 0.5) & (Z[:, 1] > 0.5)).astype(float)
    # hand enumeration: v({})=0, v({0})=v({1})=0, v({0,1})=1, so each gets 1/2
    a = E.shapley_exact(f, [1.0, 1.0], [[0.0, 0.0]])
    assert a.phi.tolist() == [0.5, 0.5]
    # a background row that already satisfies x0 > 0.5: v({})=0, v({0})=0, v({1})=1/2, v({0,1})=1
    b = E.shapley_exact(f, [1.0, 1.0], [[0.0, 0.0], [1.0, 0.0]])
    assert b.phi == pytest.approx([0.25, 0.75], abs=1e-15)


def test_dummy_on_trained_model():
    X, y = data(3, p=6)
    m = L.train_model("adaboost", X, y, {"n_estimators": 3})
    unused = sorted(set(range(6)) - m.tree_ensemble().features_used())
    assert unused
    a = E.shapley_exact(m, X[5], X[:20])
    for j in unused:
        assert a.phi[j] == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(-2, 2))
def test_symmetry(seed, shared):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(3)
    f = lambda Z: 1 / (1 + np.exp(-(Z[:, 0] + Z[:, 1] + w[0] * Z[:, 2] + w[1] * Z[:, 0] * Z[:, 1])))
    bg = rng.standard_normal((10, 3))
    bg[:, 1] = bg[:, 0]  # identical background columns
    bg = np.vstack([bg, bg[:, [1, 0, 2]]])
    x = np.array([shared, shared, rng.standard_normal()])
    a = E.shapley_exact(f, x, bg)
    assert abs(a.phi[0] - a.phi[1]) <= 1e-12
    assert abs(a.efficiency_gap()) <= 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 7))
def test_efficiency_property(seed, p):
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((p, 3))
    f = lambda Z: np.tanh(Z @ W).sum(1)
    a = E.shapley_exact(f, rng.standard_normal(p), rng.standard_normal((5, p)))
    assert abs(a.efficiency_gap()) <= 1e-9


def test_permutation_close_to_exact():
    X, y = data(4, n=120, p=10)
    m = L.train_model("logistic", X, y, {"l2": 0.05})
    bg = E.BackgroundSet.sample(X, 20, seed=1)
    x = X[77]
    exact = E.shapley_exact(m, x, bg)
    approx = E.shapley_permutation(m, x, bg, n_permutations=2000, seed=3)
    spread = exact.phi.max() - exact.phi.min()
    assert np.max(np.abs(approx.phi - exact.phi)) <= 0.01 * spread
    assert abs(approx.efficiency_gap()) <= 1e-12
    again = E.shapley_permutation(m, x, bg, n_permutations=2000, seed=3)
    assert again.phi.tobytes() == approx.phi.tobytes()


def test_permutation_dummy_within_three_se():
    f = lambda Z: Z[:, 0] * Z[:, 1]
    rng = np.random.default_rng(0)
    bg = rng.standard_normal((10, 3))
    a = E.shapley_permutation(f, [1.0, 2.0, 5.0], bg, n_permutations=200, seed=1)
    assert abs(a.phi[2]) <= 3 * a.stderr[2] + 1e-12


def test_single_feature_model_ranks_first():
    X, y = data(5, p=5)
    f = lambda Z: 1 / (1 + np.exp(-3 * Z[:, 3]))
    gi = E.global_importance(f, X[:15], X[20:30], feature_names=tuple("abcde"))
    assert gi.ranking[0] == "d"
    assert np.all(np.delete(gi.values, 3) == 0.0) and (gi.values >= 0).all()
    shuffled = E.global_importance(f, X[:15][::-1], X[20:30], feature_names=tuple("abcde"))
    assert shuffled.ranking == gi.ranking
    assert shuffled.values == pytest.approx(gi.values, abs=1e-12)


def test_capacity_and_parameters():
    with pytest.raises(CapacityError):
        E.shapley_exact(lambda Z: Z.sum(1), np.zeros(23), np.zeros((1, 23)))
    with pytest.raises(ParameterError):
        E.shapley_exact(lambda Z: Z.sum(1), np.zeros(3), np.zeros((1, 4)))
    with pytest.raises(ParameterError):
        E.shapley_permutation(lambda Z: Z.sum(1), np.zeros(3), np.zeros((1, 3)), n_permutations=0)
    with pytest.raises(ParameterError):
        E.BackgroundSet(np.empty((0, 3)))
    with pytest.raises(ParameterError):
        E.explain_rows(lambda Z: Z.sum(1), np.zeros((1, 2)), np.zeros((1, 2)), method="bogus")


def test_background_sample_seeded():
    X = np.arange(100.0).reshape(50, 2)
    a, b = E.BackgroundSet.sample(X, 20, seed=4), E.BackgroundSet.sample(X, 20, seed=4)
    assert len(a) == 20 and a.rows.tolist() == b.rows.tolist()
    assert len(E.BackgroundSet.sample(X[:5], 20)) == 5


def test_missing_values_imputed_before_explaining():
    X, y = data(6, p=4)
    m = L.train_model("adaboost", X, y, {"n_estimators": 10})
    x = X[3].copy()
    x[0] = np.nan
    a = E.shapley_exact(m, x, X[:10])
    assert np.isfinite(a.phi).all() and abs(a.efficiency_gap()) <= 1e-9


def test_reports():
    f = lambda Z: 1 / (1 + np.exp(-(Z[:, 0] - Z[:, 1])))
    bg = np.array([[0.0, 0.0], [1.0, 1.0]])
    attrs = E.explain_rows(f, [[2.0, 0.0], [0.0, 2.0]], bg, ids=["m1:t1", "m1:t2"], feature_names=("acc_p", "rec_t"))
    rec = E.local_explanation(attrs[0])
    assert rec["predicted"] == "male" and rec["features"][0]["direction"] == "male"
    assert [f["feature"] for f in E.local_explanation(attrs[1])["features"]][0] == "rec_t"
    assert "pushes toward" in E.local_text(rec)
    pts = E.summary_points(attrs)
    assert [p[:2] for p in pts] == [("acc_p", "m1:t1"), ("acc_p", "m1:t2"), ("rec_t", "m1:t1"), ("rec_t", "m1:t2")]
    buf = io.StringIO()
    E.write_attributions(attrs, buf)
    assert buf.getvalue().splitlines()[0] == "instance_id,method,base_value,score,phi_acc_p,phi_rec_t,value_acc_p,value_rec_t"
    buf = io.StringIO()
    E.write_global(E.global_importance(f, [[2.0, 0.0]], bg, attributions=attrs), buf)
    assert buf.getvalue().splitlines()[0] == "rank,feature,mean_abs_phi"
