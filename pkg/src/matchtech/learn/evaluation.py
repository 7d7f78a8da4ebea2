"""Evaluation protocol: tuning split, grouped grid search, leave-one-team-out CV, metrics."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from ..errors import ParameterError, UndefinedValueError
from .dataset import LabeledDataset
from .models import canonical_kind, train_baseline, train_model

log = logging.getLogger(__name__)

DEFAULT_GRIDS = {
    "adaboost": [{"n_estimators": n} for n in (25, 50, 100, 200)],
    "decision_tree": [
        {"max_depth": d, "min_samples_leaf": m} for d, m in product((1, 2, 3, 5, None), (1, 3, 5))
    ],
    "random_forest": [{"n_estimators": n} for n in (100, 300)],
    "logistic": [{"l2": c} for c in (0.01, 0.1, 1.0, 10.0)],
}


def complexity(kind: str, params: dict) -> tuple:
    """Sort key: smaller means simpler. Used to break F1 ties in grid search."""
    kind = canonical_kind(kind)
    if kind == "adaboost":
        return (params.get("n_estimators", 50),)
    if kind == "decision_tree":
        d = params.get("max_depth")
        return (math.inf if d is None else d, -params.get("min_samples_leaf", 1))
    if kind == "random_forest":
        d = params.get("max_depth")
        return (params.get("n_estimators", 100), math.inf if d is None else d)
    if kind == "logistic":
        return (-params.get("l2", 1.0),)
    return ()


# ---------------------------------------------------------------- metrics


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int


def metrics(predictions, labels) -> Metrics:
    """Accuracy, precision, recall and F1 with male (1) as the positive class."""
    p = np.asarray(predictions).astype(int)
    y = np.asarray(labels).astype(int)
    if p.size == 0 or p.shape != y.shape:
        raise UndefinedValueError("metrics need equally long, non-empty predictions and labels")
    tp = int(np.sum((p == 1) & (y == 1)))
    fp = int(np.sum((p == 1) & (y == 0)))
    tn = int(np.sum((p == 0) & (y == 0)))
    fn = int(np.sum((p == 0) & (y == 1)))
    acc = (tp + tn) / len(y)
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return Metrics(acc, prec, rec, f1, tp, fp, tn, fn)


def roc_curve(scores, labels) -> tuple:
    """ROC points by descending-threshold sweep and trapezoidal AUC.

    Returns ``(fpr, tpr, thresholds, auc)``; the first point is (0, 0) at an
    infinite threshold.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(int)
    n_pos, n_neg = int((y == 1).sum()), int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedValueError("ROC undefined with a single class")
    order = np.argsort(-s, kind="mergesort")
    s_sorted, y_sorted = s[order], y[order]
    distinct = np.nonzero(np.diff(s_sorted))[0]
    cut = np.append(distinct, len(s) - 1)
    tps = np.cumsum(y_sorted)[cut]
    fps = (cut + 1) - tps
    tpr = np.concatenate([[0.0], tps / n_pos])
    fpr = np.concatenate([[0.0], fps / n_neg])
    thresholds = np.concatenate([[np.inf], s_sorted[cut]])
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return fpr, tpr, thresholds, auc


# ---------------------------------------------------------------- splits


def _team_table(ds: LabeledDataset) -> dict:
    """``label -> [(team, row indices)]`` in sorted team order."""
    table = {}
    for g in sorted(set(ds.groups.tolist())):
        idx = np.nonzero(ds.groups == g)[0]
        labels = set(ds.y[idx].tolist())
        if len(labels) != 1:
            raise ParameterError(f"team {g} has rows of both classes")
        table.setdefault(labels.pop(), []).append((g, idx))
    return table


def split_tune_eval(ds: LabeledDataset, seed: int = 0, tune_fraction: float = 0.2) -> tuple:
    """Team-grouped, label-stratified split into (tune indices, eval indices)."""
    if len(ds) < 10:
        raise ParameterError("split needs at least 10 rows")
    table = _team_table(ds)
    if set(table) != {0, 1}:
        raise ParameterError("split needs both classes")
    rng = np.random.default_rng(seed)
    tune = []
    for label in (0, 1):
        teams = table[label]
        perm = rng.permutation(len(teams))
        target = tune_fraction * sum(len(idx) for _, idx in teams)
        taken = 0
        for k in perm:
            size = len(teams[k][1])
            # add the team if that lands closer to the target than stopping
            if abs(taken + size - target) < abs(taken - target):
                tune.extend(teams[k][1].tolist())
                taken += size
            if taken >= target:
                break
    tune = np.array(sorted(tune), dtype=int)
    rest = np.setdiff1d(np.arange(len(ds)), tune)
    return tune, rest


def group_folds(ds: LabeledDataset, n_folds: int = 5, seed: int = 0) -> list:
    """Team-grouped folds with each class's teams dealt round-robin; list of test-index arrays."""
    table = _team_table(ds)
    n_teams = sum(len(v) for v in table.values())
    if n_teams < n_folds:
        raise ParameterError(f"cannot build {n_folds} team-grouped folds from {n_teams} teams")
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(n_folds)]
    offset = 0
    for label in sorted(table):
        teams = table[label]
        for pos, k in enumerate(rng.permutation(len(teams))):
            folds[(pos + offset) % n_folds].extend(teams[k][1].tolist())
        offset += len(teams)
    return [np.array(sorted(f), dtype=int) for f in folds]


@dataclass
class GridResult:
    best_params: dict
    scores: list  # (params, mean F1)


def grid_search_5fold(tune: LabeledDataset, kind: str, grid=None, seed: int = 0, n_folds: int = 5) -> GridResult:
    kind = canonical_kind(kind)
    grid = list(grid if grid is not None else DEFAULT_GRIDS[kind])
    if not grid:
        raise ParameterError("empty grid")
    folds = group_folds(tune, n_folds, seed)
    for f in folds:
        train_idx = np.setdiff1d(np.arange(len(tune)), f)
        if len(np.unique(tune.y[train_idx])) < 2:
            raise ParameterError("a fold leaves a single class in training; folding infeasible")
    scores = []
    for params in grid:
        f1s = []
        for k, test_idx in enumerate(folds):
            train_idx = np.setdiff1d(np.arange(len(tune)), test_idx)
            model = train_model(kind, tune.X[train_idx], tune.y[train_idx], params, seed + k, tune.feature_names)
            f1s.append(metrics(model.predict(tune.X[test_idx]), tune.y[test_idx]).f1)
        scores.append((params, float(np.mean(f1s))))
    best_f1 = max(s for _, s in scores)
    tied = [(i, p) for i, (p, s) in enumerate(scores) if s >= best_f1 - 1e-12]
    tied.sort(key=lambda ip: (complexity(kind, ip[1]), ip[0]))
    return GridResult(dict(tied[0][1]), scores)


# ---------------------------------------------------------------- LOTO


@dataclass
class FoldResult:
    team: str
    test_index: np.ndarray
    predictions: np.ndarray
    scores: np.ndarray


@dataclass
class EvalReport:
    kind: str
    params: dict
    metrics: Metrics
    auc: float | None
    roc: tuple | None
    folds: list = field(default_factory=list)
    predictions: np.ndarray | None = None
    scores: np.ndarray | None = None
    labels: np.ndarray | None = None
    index: np.ndarray | None = None
    bound_checks: list = field(default_factory=list)

    def summary(self) -> dict:
        m = self.metrics
        return {
            "kind": self.kind,
            "params": self.params,
            "accuracy": m.accuracy,
            "precision": m.precision,
            "recall": m.recall,
            "f1": m.f1,
            "auc": self.auc,
            "confusion": {"tp": m.tp, "fp": m.fp, "tn": m.tn, "fn": m.fn},
            "n_folds": len(self.folds),
        }


def leave_one_team_out_cv(ds: LabeledDataset, kind: str, params=None, seed: int = 0) -> EvalReport:
    """One fold per team; predictions pooled before metrics are computed."""
    kind = canonical_kind(kind)
    params = dict(params or {})
    table = _team_table(ds)
    if any(len(table.get(c, [])) < 2 for c in (0, 1)):
        raise ParameterError("leave-one-team-out needs at least two teams per class")
    teams = sorted(set(ds.groups.tolist()))
    preds = np.zeros(len(ds), dtype=int)
    scores = np.zeros(len(ds))
    folds, checks = [], []
    for k, team in enumerate(teams):
        test_idx = np.nonzero(ds.groups == team)[0]
        train_idx = np.nonzero(ds.groups != team)[0]
        assert team not in set(ds.groups[train_idx].tolist())
        if kind == "baseline":
            model = train_baseline(ds.y[train_idx], seed + k, ds.feature_names)
        else:
            model = train_model(kind, ds.X[train_idx], ds.y[train_idx], params, seed + k, ds.feature_names)
        p = model.predict(ds.X[test_idx])
        s = model.predict_proba(ds.X[test_idx])
        if kind == "adaboost":
            train_err = float(np.mean(model.predict(ds.X[train_idx]) != ds.y[train_idx]))
            checks.append((train_err, model.error_bound()))
        preds[test_idx], scores[test_idx] = p, s
        folds.append(FoldResult(team, test_idx, p, s))
    m = metrics(preds, ds.y)
    try:
        fpr, tpr, thr, auc = roc_curve(scores, ds.y)
        roc = (fpr, tpr, thr)
    except UndefinedValueError:
        auc, roc = None, None
    return EvalReport(kind, params, m, auc, roc, folds, preds, scores, ds.y.copy(), np.arange(len(ds)), checks)


# ---------------------------------------------------------------- full matches


def random_split(ds: LabeledDataset, test_fraction: float, seed: int) -> tuple:
    """Row-level split stratified by label; returns (train indices, test indices)."""
    rng = np.random.default_rng(seed)
    test = []
    for label in (0, 1):
        idx = np.nonzero(ds.y == label)[0]
        n_test = int(round(test_fraction * len(idx)))
        test.extend(rng.permutation(idx)[:n_test].tolist())
    test = np.array(sorted(test), dtype=int)
    return np.setdiff1d(np.arange(len(ds)), test), test


@dataclass
class PairedMatchReport:
    repeats: list  # per repeat: number of fully contained matches
    both_correct: int
    one_correct: int
    none_correct: int
    matches: list  # (repeat, match_id, correct count)

    @property
    def n_matches(self) -> int:
        return self.both_correct + self.one_correct + self.none_correct


def paired_match_eval(ds: LabeledDataset, kind: str = "adaboost", params=None, n_repeats: int = 50,
                      seed: int = 0, test_fraction: float = 0.2) -> PairedMatchReport:
    """Repeat random splits; score only matches whose two teams are both in the test set."""
    counts = [0, 0, 0]
    repeats, records = [], []
    for r in range(n_repeats):
        train_idx, test_idx = random_split(ds, test_fraction, seed + r)
        test_set = set(test_idx.tolist())
        full = []
        for mid in sorted(set(ds.match_ids[test_idx].tolist())):
            rows = np.nonzero(ds.match_ids == mid)[0]
            if len(rows) == 2 and all(i in test_set for i in rows):
                full.append((mid, rows))
        repeats.append(len(full))
        if not full:
            log.info("repeat %d: no match with both teams in the test split", r)
            continue
        if len(np.unique(ds.y[train_idx])) < 2:
            log.info("repeat %d: training split holds a single class; skipped", r)
            repeats[-1] = 0
            continue
        model = train_model(kind, ds.X[train_idx], ds.y[train_idx], params, seed + r, ds.feature_names)
        for mid, rows in full:
            correct = int(np.sum(model.predict(ds.X[rows]) == ds.y[rows]))
            counts[2 - correct] += 1
            records.append((r, mid, correct))
    return PairedMatchReport(repeats, counts[0], counts[1], counts[2], records)
