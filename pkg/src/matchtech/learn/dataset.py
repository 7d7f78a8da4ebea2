"""Labeled team-match dataset used by the classifiers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..features import FEATURE_NAMES
from ..ingest import Gender

MALE, FEMALE = 1, 0


@dataclass
class LabeledDataset:
    """Rows of the 19-variable vector with a binary label (male = 1).

    ``X`` keeps missing values as NaN; models impute with training-set means.
    ``groups`` holds the team identity used for leave-one-team-out folds.
    """

    X: np.ndarray
    y: np.ndarray
    groups: np.ndarray
    match_ids: np.ndarray
    feature_names: tuple = FEATURE_NAMES
    team_names: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=int)
        self.groups = np.asarray(self.groups)
        self.match_ids = np.asarray(self.match_ids)
        n = len(self.y)
        if self.X.shape[0] != n or len(self.groups) != n or len(self.match_ids) != n:
            raise ValueError("X, y, groups and match_ids must have the same length")
        if self.X.shape[1] != len(self.feature_names):
            raise ValueError("feature_names does not match X columns")
        if not set(np.unique(self.y)) <= {0, 1}:
            raise ValueError("labels must be binary 0/1")

    def __len__(self):
        return len(self.y)

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx)
        return LabeledDataset(
            self.X[idx],
            self.y[idx],
            self.groups[idx],
            self.match_ids[idx],
            self.feature_names,
            None if self.team_names is None else self.team_names[idx],
        )

    def permute_columns(self, order) -> "LabeledDataset":
        order = list(order)
        return LabeledDataset(
            self.X[:, order],
            self.y,
            self.groups,
            self.match_ids,
            tuple(self.feature_names[i] for i in order),
            self.team_names,
        )

    def column(self, name) -> np.ndarray:
        return self.X[:, self.feature_names.index(name)]

    @classmethod
    def from_features(cls, rows, feature_names=FEATURE_NAMES) -> "LabeledDataset":
        X = np.array(
            [[np.nan if getattr(r, n) is None else float(getattr(r, n)) for n in feature_names] for r in rows],
            dtype=float,
        ).reshape(len(rows), len(feature_names))
        y = np.array([MALE if r.gender is Gender.MALE else FEMALE for r in rows], dtype=int)
        groups = np.array([f"{r.gender.value}:{r.team_id}" for r in rows])
        mids = np.array([f"{r.gender.value}:{r.match_id}" for r in rows])
        names = np.array([getattr(r, "team_name", "") or str(r.team_id) for r in rows])
        return cls(X, y, groups, mids, tuple(feature_names), names)
