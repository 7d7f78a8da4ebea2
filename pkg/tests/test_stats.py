import io
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special
from scipy import stats as sps

from matchtech import stats as S
from matchtech.errors import UndefinedValueError


def permutation_p(a, b, n_perm, seed):
    """Two-sided label-permutation p for the Welch statistic."""
    rng = np.random.default_rng(seed)
    pooled = np.concatenate([a, b])
    na = len(a)

    def tstat(x, y):
        return (x.mean(-1) - y.mean(-1)) / np.sqrt(x.var(-1, ddof=1) / x.shape[-1] + y.var(-1, ddof=1) / y.shape[-1])

    observed = abs(tstat(a, b))
    hits = 0
    for start in range(0, n_perm, 10000):
        idx = np.argsort(rng.random((min(10000, n_perm - start), len(pooled))), axis=1)
        perm = pooled[idx]
        hits += int(np.sum(np.abs(tstat(perm[:, :na], perm[:, na:])) >= observed - 1e-12))
    return (hits + 1) / (n_perm + 1)


@pytest.mark.parametrize("shift", [0.0, 0.4, 0.8])
def test_welch_matches_permutation_oracle(shift):
    rng = np.random.default_rng(int(shift * 10))
    a = rng.normal(shift, 1.0, 20)
    b = rng.normal(0.0, 1.3, 20)
    res = S.welch_t_test(a, b)
    assert abs(res.p_value - permutation_p(a, b, 100_000, 1)) < 0.02


def test_welch_hand_values():
    a, b = [1.0, 2.0, 3.0, 4.0], [2.0, 4.0, 6.0, 8.0, 10.0]
    # means 2.5, 6; var/n 5/12 and 10/5
    se2 = 5 / 12 + 2.0
    res = S.welch_t_test(a, b)
    assert res.statistic == pytest.approx(-3.5 / math.sqrt(se2), abs=1e-12)
    assert res.df == pytest.approx(se2 ** 2 / ((5 / 12) ** 2 / 3 + 4.0 / 4), abs=1e-12)
    ref = sps.ttest_ind(a, b, equal_var=False)
    assert res.p_value == pytest.approx(ref.pvalue, abs=1e-10)


def test_welch_undefined():
    with pytest.raises(UndefinedValueError):
        S.welch_t_test([1.0], [1.0, 2.0])
    with pytest.raises(UndefinedValueError):
        S.welch_t_test([1.0, 1.0], [2.0, 2.0])


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 50), st.floats(0.05, 50), st.floats(0, 1))
def test_betainc_against_scipy(a, b, x):
    assert S.betainc(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 15), st.integers(2, 15))
def test_welch_antisymmetric(seed, na, nb):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(0, 1, na), rng.normal(0.3, 2, nb)
    ab, ba = S.welch_t_test(a, b), S.welch_t_test(b, a)
    assert ab.statistic == pytest.approx(-ba.statistic, abs=1e-12)
    assert ab.p_value == pytest.approx(ba.p_value, abs=1e-12)
    assert 0 <= ab.p_value <= 1
    assert ab.p_value == pytest.approx(sps.ttest_ind(a, b, equal_var=False).pvalue, abs=1e-9)


def pair_count_u(a, b):
    return sum(1.0 if x > y else 0.5 if x == y else 0.0 for x, y in itertools.product(a, b))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=1, max_size=15), st.lists(st.integers(0, 6), min_size=1, max_size=15))
def test_mwu_equals_pair_counting(a, b):
    res = S.mann_whitney_u(a, b)
    assert res.statistic == pair_count_u(a, b)
    assert S.mann_whitney_u(b, a).statistic == len(a) * len(b) - res.statistic
    assert 0 <= res.p_value <= 1


def test_mwu_against_scipy():
    rng = np.random.default_rng(3)
    a, b = rng.integers(0, 8, 25), rng.integers(1, 9, 30)
    ref = sps.mannwhitneyu(a, b, alternative="two-sided", method="asymptotic", use_continuity=True)
    res = S.mann_whitney_u(a, b)
    assert res.statistic == ref.statistic
    assert res.p_value == pytest.approx(ref.pvalue, abs=1e-10)


def test_two_prop_formula():
    k1, n1, k2, n2 = 45, 120, 30, 130
    p = (k1 + k2) / (n1 + n2)
    z = (k1 / n1 - k2 / n2) / math.sqrt(p * (1 - p) * (1 / n1 + 1 / n2))
    res = S.two_prop_z_test(k1, n1, k2, n2)
    assert res.statistic == pytest.approx(z, abs=1e-10)
    assert res.p_value == pytest.approx(math.erfc(abs(z) / math.sqrt(2)), abs=1e-10)


def test_two_prop_undefined():
    for args in ((0, 10, 0, 10), (10, 10, 5, 5), (1, 0, 1, 2), (3, 2, 1, 2)):
        with pytest.raises(UndefinedValueError):
            S.two_prop_z_test(*args)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 200), st.integers(1, 200), st.data())
def test_two_prop_antisymmetric(n1, n2, data):
    k1, k2 = data.draw(st.integers(0, n1)), data.draw(st.integers(0, n2))
    if k1 + k2 in (0, n1 + n2):
        return
    ab, ba = S.two_prop_z_test(k1, n1, k2, n2), S.two_prop_z_test(k2, n2, k1, n1)
    assert ab.statistic == pytest.approx(-ba.statistic, abs=1e-12)
    assert ab.p_value == pytest.approx(ba.p_value, abs=1e-12)


def test_comparison_table_and_csv():
    rng = np.random.default_rng(0)
    men = [{"x": v, "c": 1.0, "n": None} for v in rng.normal(5, 1, 30)]
    women = [{"x": v, "c": 1.0, "n": 2.0} for v in rng.normal(3, 1, 30)]
    men[0]["n"] = 1.0
    rep = S.comparison_table({"men": men, "women": women}, ["x", "c"])
    assert rep.flagged() == ["x"]
    assert rep.row("x").statistic > 0 and rep.row("x").mean_a > rep.row("x").mean_b
    assert rep.row("c").p_value is None and not rep.row("c").significant
    with pytest.raises(UndefinedValueError):
        S.comparison_table({"men": men, "women": women}, ["n"])  # only one non-missing value for men
    with pytest.raises(ValueError):
        S.comparison_table({"a": men}, ["x"])
    buf = io.StringIO()
    S.write_comparison_csv(rep, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].startswith("variable,mean_men,std_men,mean_women")
    assert lines[2].startswith("c,1.0,0.0,1.0,0.0,,,0")
