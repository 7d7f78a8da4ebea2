"""Classifiers written against numpy: CART, random forest, AdaBoost.M1, logistic regression, baseline.

Every model scores P(male) in [0, 1] and imputes missing inputs (NaN) with
the training-set column means it stored at fit time.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import ParameterError, TrainingError

log = logging.getLogger(__name__)

KIND_ALIASES = {
    "adaboost": "adaboost",
    "adaboostm1": "adaboost",
    "adaboost.m1": "adaboost",
    "decision_tree": "decision_tree",
    "decisiontree": "decision_tree",
    "tree": "decision_tree",
    "random_forest": "random_forest",
    "randomforest": "random_forest",
    "forest": "random_forest",
    "logistic": "logistic",
    "logisticregression": "logistic",
    "logistic_regression": "logistic",
    "baseline": "baseline",
}


def canonical_kind(kind: str) -> str:
    try:
        return KIND_ALIASES[kind.strip().lower()]
    except KeyError:
        raise ParameterError(f"unknown model kind {kind!r}") from None


def _check_two_classes(y):
    if len(np.unique(y)) < 2:
        raise TrainingError("training data contains a single class")


def column_means(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        means = np.nanmean(X, axis=0) if len(X) else np.zeros(X.shape[1])
    return np.where(np.isnan(means), 0.0, means)


def fill_missing(X, means) -> np.ndarray:
    X = np.array(X, dtype=float, copy=True)
    mask = np.isnan(X)
    if mask.any():
        X[mask] = np.take(means, np.nonzero(mask)[1])
    return X


# ---------------------------------------------------------------- trees


@dataclass
class Tree:
    """Binary tree in flat arrays; rows go left when ``x[feature] <= threshold``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        def rec(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(rec(self.left[i]), rec(self.right[i]))

        return rec(0)

    def apply(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            f = self.feature[node]
            rows = np.nonzero(f >= 0)[0]
            if rows.size == 0:
                return node
            nd = node[rows]
            go_left = X[rows, f[rows]] <= self.threshold[nd]
            node[rows] = np.where(go_left, self.left[nd], self.right[nd])

    def predict_value(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def features_used(self) -> set:
        return {int(f) for f in self.feature if f >= 0}

    def to_record(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": [float(t) for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": [float(v) for v in self.value],
        }

    @classmethod
    def from_record(cls, rec) -> "Tree":
        return cls(
            np.array(rec["feature"], dtype=np.int64),
            np.array(rec["threshold"], dtype=float),
            np.array(rec["left"], dtype=np.int64),
            np.array(rec["right"], dtype=np.int64),
            np.array(rec["value"], dtype=float),
        )

    @classmethod
    def leaf(cls, value: float) -> "Tree":
        return cls(
            np.array([-1], dtype=np.int64),
            np.array([0.0]),
            np.array([-1], dtype=np.int64),
            np.array([-1], dtype=np.int64),
            np.array([float(value)]),
        )


class _TreeBuilder:
    def __init__(self):
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []

    def add(self, value, feature=-1, threshold=0.0):
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.feature) - 1

    def build(self) -> Tree:
        return Tree(
            np.array(self.feature, dtype=np.int64),
            np.array(self.threshold, dtype=float),
            np.array(self.left, dtype=np.int64),
            np.array(self.right, dtype=np.int64),
            np.array(self.value, dtype=float),
        )


TIE_TOL = 1e-12


def _best_gini_split(X, y, w, idx, features, min_leaf):
    """Lowest weighted child Gini over features (ascending) and midpoint thresholds.

    Returns ``(score, feature, threshold)``; ties keep the earlier feature and
    the lower threshold.
    """
    best = (math.inf, -1, 0.0)
    n = len(idx)
    wi, yi = w[idx], y[idx]
    for j in features:
        xs = X[idx, j]
        order = np.argsort(xs, kind="mergesort")
        xs_s = xs[order]
        ws = wi[order]
        w1 = np.cumsum(ws * yi[order])[:-1]
        wl = np.cumsum(ws)[:-1]
        tot_w, tot_1 = ws.sum(), (ws * yi[order]).sum()
        wr = tot_w - wl
        r1 = tot_1 - w1
        pos = np.arange(1, n)
        valid = (xs_s[:-1] < xs_s[1:]) & (pos >= min_leaf) & (n - pos >= min_leaf) & (wl > 0) & (wr > 0)
        if not valid.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            gl = wl - (w1 * w1 + (wl - w1) ** 2) / wl
            gr = wr - (r1 * r1 + (wr - r1) ** 2) / wr
        score = np.where(valid, gl + gr, math.inf)
        i = int(np.argmax(score <= score.min() + TIE_TOL * max(1.0, tot_w)))
        if score[i] < best[0] - TIE_TOL * max(1.0, tot_w):
            best = (float(score[i]), int(j), 0.5 * (xs_s[i] + xs_s[i + 1]))
    return best


def tie_order(feature_names, p) -> np.ndarray:
    """Column visiting order for split ties: by feature name when every column is named, else by index.

    Ordering by name keeps the fitted model unchanged when columns are permuted
    together with their names.
    """
    names = tuple(feature_names or ())
    if len(names) == p and len(set(names)) == p:
        return np.array(sorted(range(p), key=lambda j: names[j]), dtype=np.int64)
    return np.arange(p, dtype=np.int64)


def grow_cart(X, y, sample_weight=None, max_depth=None, min_samples_leaf=1, max_features=None, rng=None,
              order=None) -> Tree:
    """CART with Gini impurity; leaf value is the weighted share of class 1.

    ``order`` is the column order in which split ties are resolved (default: index).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    p = X.shape[1]
    order = np.arange(p) if order is None else np.asarray(order)
    rank = np.argsort(order)
    b = _TreeBuilder()

    def leaf_value(idx):
        tw = w[idx].sum()
        return float((w[idx] * y[idx]).sum() / tw) if tw > 0 else 0.5

    def grow(idx, depth):
        value = leaf_value(idx)
        node = b.add(value)
        if (max_depth is not None and depth >= max_depth) or value in (0.0, 1.0) or len(idx) < 2 * min_samples_leaf:
            return node
        if max_features is not None and max_features < p:
            feats = np.sort(rng.choice(p, size=max_features, replace=False))
            feats = feats[np.argsort(rank[feats])]
        else:
            feats = order
        tw, t1 = w[idx].sum(), (w[idx] * y[idx]).sum()
        parent = tw - (t1 * t1 + (tw - t1) ** 2) / tw
        score, f, thr = _best_gini_split(X, y, w, idx, feats, min_samples_leaf)
        if f < 0 or score >= parent - 1e-12:
            return node
        go_left = X[idx, f] <= thr
        b.feature[node], b.threshold[node] = f, thr
        b.left[node] = grow(idx[go_left], depth + 1)
        b.right[node] = grow(idx[~go_left], depth + 1)
        return node

    grow(np.arange(len(y)), 0)
    return b.build()


class StumpSearch:
    """Weighted-error decision stumps with outputs in {-1, +1}.

    Sorting is done once; each call only re-accumulates the weights.
    """

    def __init__(self, X, y_pm, order=None):
        self.X = np.asarray(X, dtype=float)
        # columns are searched in tie order so the first minimum wins
        self.cols = np.arange(self.X.shape[1]) if order is None else np.asarray(order)
        self.X = self.X[:, self.cols]
        self.y = np.asarray(y_pm, dtype=float)
        self.order = np.argsort(self.X, axis=0, kind="mergesort").T  # (p, n)
        xs = np.take_along_axis(self.X.T, self.order, axis=1)
        self.valid = xs[:, :-1] < xs[:, 1:]
        self.thresholds = 0.5 * (xs[:, :-1] + xs[:, 1:])

    def fit(self, w) -> tuple:
        """Return ``(tree, weighted_error)`` for the best stump under weights ``w``."""
        ypos = self.y > 0
        if not self.valid.any():
            s = 1.0 if w[ypos].sum() >= w[~ypos].sum() else -1.0
            return Tree.leaf(s), float(w[(self.y * s) < 0].sum())
        wpos = np.where(ypos, w, 0.0)[self.order]
        wneg = np.where(ypos, 0.0, w)[self.order]
        cpos = np.cumsum(wpos, axis=1)[:, :-1]
        cneg = np.cumsum(wneg, axis=1)[:, :-1]
        tpos, tneg = w[ypos].sum(), w[~ypos].sum()
        err_left_pos = cneg + (tpos - cpos)  # left predicts +1, right -1
        err_left_neg = cpos + (tneg - cneg)
        err = np.stack([err_left_pos, err_left_neg], axis=2)
        err[~self.valid] = math.inf
        # ties within rounding go to the lowest feature, then threshold, then polarity
        best = float(err.min())
        flat = int(np.argmax(err.ravel() <= best + TIE_TOL * max(1.0, float(w.sum()))))
        j, i, pol = np.unravel_index(flat, err.shape)
        lv, rv = (1.0, -1.0) if pol == 0 else (-1.0, 1.0)
        tree = Tree(
            np.array([self.cols[j], -1, -1], dtype=np.int64),
            np.array([self.thresholds[j, i], 0.0, 0.0]),
            np.array([1, -1, -1], dtype=np.int64),
            np.array([2, -1, -1], dtype=np.int64),
            np.array([0.0, lv, rv]),
        )
        return tree, float(err[j, i, pol])


@dataclass
class TreeEnsemble:
    """``score(x) = bias + sum_t weight_t * tree_t(x)`` with all trees in flat arrays."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    roots: np.ndarray
    weights: np.ndarray
    bias: float = 0.0

    @classmethod
    def from_trees(cls, trees, weights, bias=0.0) -> "TreeEnsemble":
        offs, acc = [], 0
        for t in trees:
            offs.append(acc)
            acc += t.n_nodes

        def shifted(arr, off):
            return np.where(arr >= 0, arr + off, -1)

        return cls(
            np.concatenate([t.feature for t in trees]).astype(np.int64),
            np.concatenate([t.threshold for t in trees]).astype(float),
            np.concatenate([shifted(t.left, o) for t, o in zip(trees, offs)]).astype(np.int64),
            np.concatenate([shifted(t.right, o) for t, o in zip(trees, offs)]).astype(np.int64),
            np.concatenate([t.value for t in trees]).astype(float),
            np.array(offs, dtype=np.int64),
            np.asarray(weights, dtype=float),
            float(bias),
        )

    def features_used(self) -> set:
        return {int(f) for f in self.feature if f >= 0}


# ---------------------------------------------------------------- models


@dataclass
class TrainedModel:
    kind: str
    params: dict
    seed: int
    feature_names: tuple
    impute_means: np.ndarray

    def impute(self, X) -> np.ndarray:
        return fill_missing(X, self.impute_means)

    def predict_proba(self, X) -> np.ndarray:
        return np.clip(self._score(self.impute(np.atleast_2d(X))), 0.0, 1.0)

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(int)

    def tree_ensemble(self) -> TreeEnsemble | None:
        return None

    def _score(self, X) -> np.ndarray:
        raise NotImplementedError

    def features_used(self) -> set | None:
        return None


@dataclass
class DecisionTreeModel(TrainedModel):
    tree: Tree = None

    def _score(self, X):
        return self.tree.predict_value(X)

    def tree_ensemble(self):
        return TreeEnsemble.from_trees([self.tree], [1.0])


@dataclass
class RandomForestModel(TrainedModel):
    trees: list = field(default_factory=list)

    def _score(self, X):
        return np.mean([t.predict_value(X) for t in self.trees], axis=0)

    def tree_ensemble(self):
        return TreeEnsemble.from_trees(self.trees, np.full(len(self.trees), 1.0 / len(self.trees)))


@dataclass
class AdaBoostM1Model(TrainedModel):
    stumps: list = field(default_factory=list)
    alphas: np.ndarray = None
    errors: list = field(default_factory=list)

    def margin(self, X) -> np.ndarray:
        X = self.impute(np.atleast_2d(X))
        return sum(a * s.predict_value(X) for a, s in zip(self.alphas, self.stumps))

    def _score(self, X):
        total = float(np.sum(self.alphas))
        m = sum(a * s.predict_value(X) for a, s in zip(self.alphas, self.stumps))
        return 0.5 + 0.5 * m / total

    def predict(self, X):
        return (self.margin(X) >= 0).astype(int)

    def tree_ensemble(self):
        total = float(np.sum(self.alphas))
        return TreeEnsemble.from_trees(self.stumps, 0.5 * np.asarray(self.alphas) / total, 0.5)

    def error_bound(self) -> float:
        """Upper bound on the unweighted training error: prod_t 2 sqrt(e_t (1 - e_t))."""
        return float(np.prod([2.0 * math.sqrt(e * (1.0 - e)) for e in self.errors]))


@dataclass
class LogisticModel(TrainedModel):
    beta: np.ndarray = None  # on standardized inputs
    intercept: float = 0.0
    mean: np.ndarray = None
    scale: np.ndarray = None
    n_iter: int = 0
    grad_norm: float = 0.0

    def _score(self, X):
        z = ((X - self.mean) / self.scale) @ self.beta + self.intercept
        return 1.0 / (1.0 + np.exp(-z))

    @property
    def coef_(self) -> np.ndarray:
        return self.beta / self.scale

    @property
    def intercept_(self) -> float:
        return float(self.intercept - np.sum(self.beta * self.mean / self.scale))


@dataclass
class BaselineModel(TrainedModel):
    prior: float = 0.5

    def _score(self, X):
        return np.full(len(X), self.prior)

    def predict(self, X, rng=None):
        rng = np.random.default_rng(self.seed) if rng is None else rng
        return (rng.random(len(np.atleast_2d(X))) < self.prior).astype(int)

    def features_used(self):
        return set()


# ---------------------------------------------------------------- training


def train_decision_tree(X, y, params=None, seed=0, feature_names=None) -> DecisionTreeModel:
    params = {"max_depth": None, "min_samples_leaf": 1, **(params or {})}
    _check_two_classes(y)
    means = column_means(X)
    Xf = fill_missing(X, means)
    tree = grow_cart(Xf, y, max_depth=params["max_depth"], min_samples_leaf=params["min_samples_leaf"],
                     order=tie_order(feature_names, Xf.shape[1]))
    return DecisionTreeModel("decision_tree", params, seed, tuple(feature_names or ()), means, tree)


def train_random_forest(X, y, params=None, seed=0, feature_names=None) -> RandomForestModel:
    p = np.asarray(X).shape[1]
    params = {"n_estimators": 100, "max_depth": None, "min_samples_leaf": 1,
              "max_features": max(1, int(math.sqrt(p))), **(params or {})}
    _check_two_classes(y)
    means = column_means(X)
    Xf = fill_missing(X, means)
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    order = tie_order(feature_names, p)
    trees = []
    for _ in range(params["n_estimators"]):
        boot = rng.integers(0, len(y), size=len(y))
        trees.append(
            grow_cart(Xf[boot], y[boot], max_depth=params["max_depth"],
                      min_samples_leaf=params["min_samples_leaf"],
                      max_features=params["max_features"], rng=rng, order=order)
        )
    return RandomForestModel("random_forest", params, seed, tuple(feature_names or ()), means, trees)


EPS_FLOOR = 1e-10


def train_adaboost_m1(X, y, n_estimators=50, seed=0, feature_names=None) -> AdaBoostM1Model:
    """Discrete AdaBoost with depth-1 weak learners.

    alpha_t = 0.5 ln((1 - e_t) / e_t); misclassified weights grow by exp(alpha_t),
    correct ones shrink by exp(-alpha_t), then renormalize.
    """
    if n_estimators < 1:
        raise ParameterError("n_estimators must be >= 1")
    _check_two_classes(y)
    means = column_means(X)
    Xf = fill_missing(X, means)
    y_pm = np.where(np.asarray(y) == 1, 1.0, -1.0)
    search = StumpSearch(Xf, y_pm, tie_order(feature_names, Xf.shape[1]))
    w = np.full(len(y_pm), 1.0 / len(y_pm))
    stumps, alphas, errors = [], [], []
    for t in range(n_estimators):
        stump, _ = search.fit(w)
        pred = stump.predict_value(Xf)
        eps = float(w[pred != y_pm].sum())
        if eps >= 0.5:
            if t == 0:
                warnings.warn("first stump is no better than chance; keeping a single stump")
                stumps.append(stump)
                alphas.append(1.0)
                errors.append(min(eps, 0.5))
            break
        e = max(eps, EPS_FLOOR)
        alpha = 0.5 * math.log((1.0 - e) / e)
        stumps.append(stump)
        alphas.append(alpha)
        errors.append(eps)
        if eps == 0.0:
            break
        w = w * np.exp(-alpha * y_pm * pred)
        w /= w.sum()
    params = {"n_estimators": n_estimators}
    return AdaBoostM1Model("adaboost", params, seed, tuple(feature_names or ()), means,
                           stumps, np.array(alphas), errors)


def logistic_objective(beta, b, Z, y, l2):
    z = Z @ beta + b
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * beta @ beta
    r = 1.0 / (1.0 + np.exp(-z)) - y
    g_beta = Z.T @ r / len(y) + l2 * beta
    g_b = float(np.mean(r))
    return float(loss), g_beta, g_b


def standardize_stats(X) -> tuple:
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    return mean, np.where(scale > 0, scale, 1.0)


def train_logistic(X, y, params=None, seed=0, feature_names=None, tol=1e-8, max_iter=50000) -> LogisticModel:
    """L2-penalized logistic regression on standardized inputs.

    Minimizes mean log-loss + l2/2 |beta|^2 (intercept unpenalized) with
    Barzilai-Borwein gradient steps under an Armijo backtracking safeguard,
    until the gradient norm drops below ``tol``.
    """
    params = {"l2": 1.0, **(params or {})}
    l2 = float(params["l2"])
    _check_two_classes(y)
    means = column_means(X)
    Xf = fill_missing(X, means)
    y = np.asarray(y, dtype=float)
    mu, sc = standardize_stats(Xf)
    Z = (Xf - mu) / sc
    theta = np.zeros(Z.shape[1] + 1)

    def fg(th):
        f, gb, g0 = logistic_objective(th[:-1], th[-1], Z, y, l2)
        return f, np.append(gb, g0)

    f, g = fg(theta)
    step = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        gn = float(np.linalg.norm(g))
        if gn <= tol:
            break
        t = step
        while True:
            cand = theta - t * g
            fc, gc = fg(cand)
            if fc <= f - 1e-4 * t * gn * gn or t < 1e-12:
                break
            t *= 0.5
        s, yv = cand - theta, gc - g
        theta, f, g = cand, fc, gc
        sy = float(s @ yv)
        step = float(s @ s) / sy if sy > 0 else 1.0
    gn = float(np.linalg.norm(g))
    if gn > tol:
        log.warning("logistic regression stopped at gradient norm %.3g", gn)
    return LogisticModel("logistic", params, seed, tuple(feature_names or ()), means,
                         theta[:-1].copy(), float(theta[-1]), mu, sc, it, gn)


def train_baseline(y, seed=0, feature_names=None, n_features=None) -> BaselineModel:
    y = np.asarray(y)
    if y.size == 0:
        raise TrainingError("baseline needs at least one training label")
    p = len(feature_names) if feature_names else (n_features or 0)
    return BaselineModel("baseline", {}, seed, tuple(feature_names or ()), np.zeros(p), float(y.mean()))


def train_model(kind, X, y, params=None, seed=0, feature_names=None) -> TrainedModel:
    kind = canonical_kind(kind)
    params = dict(params or {})
    if kind == "adaboost":
        return train_adaboost_m1(X, y, params.get("n_estimators", 50), seed, feature_names)
    if kind == "decision_tree":
        return train_decision_tree(X, y, params, seed, feature_names)
    if kind == "random_forest":
        return train_random_forest(X, y, params, seed, feature_names)
    if kind == "logistic":
        return train_logistic(X, y, params, seed, feature_names)
    return train_baseline(y, seed, feature_names, np.asarray(X).shape[1])
