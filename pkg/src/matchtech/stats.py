"""Two-sample hypothesis tests and the men-vs-women comparison report."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import UndefinedValueError

_SQRT2 = math.sqrt(2.0)


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def normal_sf(x: float) -> float:
    return 0.5 * math.erfc(x / _SQRT2)


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 20000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    lbeta = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
    front = math.exp(lbeta + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf(t: float, df: float) -> float:
    """Upper tail P(T > t) of Student's t with ``df`` degrees of freedom."""
    if math.isinf(df):
        return normal_sf(t)
    x = df / (df + t * t)
    tail = 0.5 * betainc(0.5 * df, 0.5, x)
    return tail if t >= 0 else 1.0 - tail


def t_two_sided_p(t: float, df: float) -> float:
    if math.isinf(df):
        return min(1.0, 2.0 * normal_sf(abs(t)))
    return min(1.0, betainc(0.5 * df, 0.5, df / (df + t * t)))


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n_a: int
    n_b: int
    test: str
    df: float | None = None

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")


def _clean(sample) -> np.ndarray:
    arr = np.asarray([v for v in sample if v is not None], dtype=float)
    return arr[~np.isnan(arr)]


def welch_t_test(sample_a, sample_b) -> TestResult:
    """Unequal-variance t test; statistic is mean(a) - mean(b) scaled."""
    a, b = _clean(sample_a), _clean(sample_b)
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise UndefinedValueError(f"Welch t test needs >= 2 values per sample, got {na} and {nb}")
    va, vb = a.var(ddof=1) / na, b.var(ddof=1) / nb
    se2 = va + vb
    if se2 == 0.0:
        raise UndefinedValueError("Welch t test undefined: both samples have zero variance")
    t = (a.mean() - b.mean()) / math.sqrt(se2)
    df = se2 * se2 / (va * va / (na - 1) + vb * vb / (nb - 1))
    return TestResult(float(t), t_two_sided_p(float(t), float(df)), na, nb, "welch_t", float(df))


def _midranks(values: np.ndarray) -> tuple:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sorted_v = values[order]
    tie_term = 0.0
    i = 0
    n = len(values)
    while i < n:
        j = i
        while j + 1 < n and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        t = j - i + 1
        tie_term += t**3 - t
        i = j + 1
    return ranks, tie_term


def mann_whitney_u(sample_a, sample_b) -> TestResult:
    """Mann-Whitney U of sample a (pairs a > b plus half the ties).

    Two-sided p from the normal approximation with tie and continuity corrections.
    """
    a, b = _clean(sample_a), _clean(sample_b)
    na, nb = len(a), len(b)
    if na == 0 or nb == 0:
        raise UndefinedValueError("Mann-Whitney U needs two non-empty samples")
    ranks, tie_term = _midranks(np.concatenate([a, b]))
    u = float(ranks[:na].sum() - na * (na + 1) / 2.0)
    n = na + nb
    mu = na * nb / 2.0
    var = na * nb / 12.0 * ((n + 1) - (tie_term / (n * (n - 1)) if n > 1 else 0.0))
    if var <= 0.0:
        return TestResult(u, 1.0, na, nb, "mann_whitney_u")
    z = max(abs(u - mu) - 0.5, 0.0) / math.sqrt(var)
    return TestResult(u, min(1.0, 2.0 * normal_sf(z)), na, nb, "mann_whitney_u")


def two_prop_z_test(k_a: int, n_a: int, k_b: int, n_b: int) -> TestResult:
    """Pooled two-proportion z test; statistic is for p_a - p_b."""
    for k, n in ((k_a, n_a), (k_b, n_b)):
        if n <= 0 or not 0 <= k <= n:
            raise UndefinedValueError(f"invalid proportion {k}/{n}")
    pooled = (k_a + k_b) / (n_a + n_b)
    if pooled in (0.0, 1.0):
        raise UndefinedValueError("two-proportion z test undefined for pooled proportion 0 or 1")
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n_a + 1.0 / n_b))
    z = (k_a / n_a - k_b / n_b) / se
    return TestResult(z, min(1.0, 2.0 * normal_sf(abs(z))), n_a, n_b, "two_prop_z")


# ---------------------------------------------------------------- report


@dataclass
class ComparisonRow:
    variable: str
    mean_a: float
    std_a: float
    mean_b: float
    std_b: float
    statistic: float | None
    p_value: float | None
    significant: bool
    mwu_p: float | None = None
    note: str = ""


@dataclass
class ComparisonReport:
    group_a: str
    group_b: str
    rows: list = field(default_factory=list)
    alpha: float = 0.05
    test: str = "welch_t"

    def row(self, variable) -> ComparisonRow:
        for r in self.rows:
            if r.variable == variable:
                return r
        raise KeyError(variable)

    def flagged(self) -> list:
        return [r.variable for r in self.rows if r.significant]


def _column(rows, name) -> list:
    out = []
    for r in rows:
        v = r[name] if isinstance(r, Mapping) else getattr(r, name)
        out.append(v)
    return out


def comparison_table(groups: Mapping, variables: Sequence[str], alpha: float = 0.05) -> ComparisonReport:
    """Per variable: group means and sample stds, Welch t (a - b), p and a significance flag.

    ``groups`` maps exactly two labels to row collections; insertion order
    fixes which is ``a`` (statistic sign is a minus b). Variables that are
    constant in both groups are reported with empty statistic and p.
    """
    if len(groups) != 2:
        raise ValueError("comparison_table compares exactly two groups")
    (la, rows_a), (lb, rows_b) = list(groups.items())
    report = ComparisonReport(str(la), str(lb), alpha=alpha)
    for var in variables:
        a, b = _clean(_column(rows_a, var)), _clean(_column(rows_b, var))
        if len(a) < 2 or len(b) < 2:
            raise UndefinedValueError(f"variable {var}: need >= 2 rows per group")
        stat = p = mwu_p = None
        note = ""
        try:
            res = welch_t_test(a, b)
            stat, p = res.statistic, res.p_value
        except UndefinedValueError as exc:
            note = str(exc)
        try:
            mwu_p = mann_whitney_u(a, b).p_value
        except UndefinedValueError:
            pass
        report.rows.append(
            ComparisonRow(
                variable=var,
                mean_a=float(a.mean()),
                std_a=float(a.std(ddof=1)),
                mean_b=float(b.mean()),
                std_b=float(b.std(ddof=1)),
                statistic=stat,
                p_value=p,
                significant=p is not None and p < alpha,
                mwu_p=mwu_p,
                note=note,
            )
        )
    return report


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    return repr(float(v))


def write_comparison_csv(report: ComparisonReport, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(
        [
            "variable",
            f"mean_{report.group_a}",
            f"std_{report.group_a}",
            f"mean_{report.group_b}",
            f"std_{report.group_b}",
            "t_score",
            "p_value",
            "significant",
            "mwu_p_value",
        ]
    )
    for r in report.rows:
        w.writerow(
            [r.variable, _fmt(r.mean_a), _fmt(r.std_a), _fmt(r.mean_b), _fmt(r.std_b),
             _fmt(r.statistic), _fmt(r.p_value), _fmt(r.significant), _fmt(r.mwu_p)]
        )
