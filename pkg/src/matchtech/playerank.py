"""Player performance ratings, goal combination, role detection and team aggregates.

A player's match is described by counts of (event type, outcome) pairs,
min-max normalized over the corpus. Feature weights come from a linear
least-squares separator of win vs non-win fitted on team-summed vectors;
the rating is the weighted sum divided by the absolute weight mass.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import NotFoundError, ParameterError, TrainingError, UndefinedValueError
from .ingest import Event, EventStore, EventType

DEFAULT_ALPHA = 0.10
GOAL_CAP = 4
ROLE_SUPPORT = 0.40
DEFAULT_ROLES = 8

FEATURE_ORDER = tuple(
    f"{t.value.lower()}_{outcome}"
    for t in EventType
    for outcome in ("accurate", "inaccurate")
)


def raw_counts(player_events: Sequence[Event]) -> np.ndarray:
    """Counts per (type, accurate/inaccurate) pair in :data:`FEATURE_ORDER`."""
    x = np.zeros(len(FEATURE_ORDER))
    types = list(EventType)
    for e in player_events:
        k = 2 * types.index(e.event_type) + (0 if e.accurate else 1)
        x[k] += 1
    return x


@dataclass
class Normalizer:
    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def fit(cls, raw: np.ndarray) -> "Normalizer":
        raw = np.atleast_2d(raw)
        return cls(raw.min(axis=0), raw.max(axis=0))

    def transform(self, raw) -> np.ndarray:
        raw = np.asarray(raw, dtype=float)
        span = self.hi - self.lo
        out = np.where(span > 0, (raw - self.lo) / np.where(span > 0, span, 1.0), 0.0)
        return np.clip(out, 0.0, 1.0)


@dataclass(frozen=True)
class PerformanceVector:
    player_id: int
    match_id: int
    values: np.ndarray
    raw: np.ndarray


def corpus_raw_vectors(store: EventStore) -> dict:
    """``(player_id, match_id) -> raw count vector`` for every player who acted."""
    out = {}
    for mid in store.match_ids():
        per_player = {}
        for e in store.events_for(mid):
            if e.player_id:
                per_player.setdefault(e.player_id, []).append(e)
        for pid in sorted(per_player):
            out[(pid, mid)] = raw_counts(per_player[pid])
    return out


def extract_performance_vector(player_id, match_id, store: EventStore, normalizer: Normalizer | None = None) -> PerformanceVector:
    evs = [e for e in store.events_for(match_id) if e.player_id == player_id]
    if not evs:
        roster = store.players.get(player_id)
        match = store.matches[match_id]
        if roster is None or roster.team_id not in match.team_ids:
            raise NotFoundError(f"player {player_id} did not appear in match {match_id}")
    raw = raw_counts(evs)
    values = normalizer.transform(raw) if normalizer is not None else raw
    return PerformanceVector(player_id, match_id, values, raw)


@dataclass
class FeatureWeights:
    weights: np.ndarray
    names: tuple = FEATURE_ORDER
    intercept: float = 0.0
    alpha: float = DEFAULT_ALPHA

    @property
    def R(self) -> float:
        return float(np.abs(self.weights).sum())

    def to_record(self) -> dict:
        return {
            "features": dict(zip(self.names, map(float, self.weights))),
            "R": self.R,
            "alpha": self.alpha,
            "intercept": self.intercept,
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "FeatureWeights":
        names = tuple(rec["features"])
        return cls(np.array([rec["features"][n] for n in names]), names, rec.get("intercept", 0.0), rec.get("alpha", DEFAULT_ALPHA))


def learn_weights(team_vectors, outcomes) -> FeatureWeights:
    """Least-squares linear separator of outcome (+1 win, -1 otherwise) with intercept."""
    x = np.asarray(team_vectors, dtype=float)
    y = np.where(np.asarray(outcomes).astype(bool), 1.0, -1.0)
    if x.ndim != 2 or len(x) != len(y):
        raise ParameterError("team_vectors must be (n, p) with one outcome per row")
    if len(np.unique(y)) < 2:
        raise TrainingError("weight learning needs both win and non-win outcomes")
    design = np.hstack([x, np.ones((len(x), 1))])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    w = coef[:-1]
    if not np.any(w):
        raise TrainingError("learned weights are all zero")
    return FeatureWeights(weights=w, intercept=float(coef[-1]))


def rate(vector, weights: FeatureWeights) -> float:
    x = np.asarray(getattr(vector, "values", vector), dtype=float)
    if x.shape != weights.weights.shape:
        raise TypeError(f"vector has {x.shape} features, weights have {weights.weights.shape}")
    r_norm = weights.R
    if r_norm <= 0:
        raise ParameterError("normalization constant R must be positive")
    return float(np.dot(weights.weights, x) / r_norm)


def combine_goals(r: float, goals: int, alpha: float = DEFAULT_ALPHA, goal_cap: int = GOAL_CAP) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"goal weight alpha={alpha} outside [0, 1]")
    if goals < 0:
        raise ParameterError("goals must be non-negative")
    if goal_cap < 1:
        raise ParameterError("goal_cap must be >= 1")
    return (1.0 - alpha) * r + alpha * min(goals / goal_cap, 1.0)


# ---------------------------------------------------------------- roles


@dataclass
class RoleModel:
    centroids: np.ndarray
    inertia_history: list = field(default_factory=list)
    labels: np.ndarray | None = None
    support: float = ROLE_SUPPORT

    @property
    def k(self) -> int:
        return len(self.centroids)

    def predict(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = ((pts[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
        return d.argmin(axis=1)

    def assign_role(self, history) -> int | None:
        """Role of a player from their per-match average positions, or ``None``.

        A role is assigned when at least ``support`` of the matches fall in it;
        ties go to the larger count, then the lower cluster index.
        """
        if len(history) == 0:
            return None
        labels = self.predict(history)
        counts = np.bincount(labels, minlength=self.k)
        best = int(np.argmax(counts))  # argmax returns the lowest index on ties
        if counts[best] / len(labels) >= self.support:
            return best
        return None


def kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centers = [points[rng.integers(n)]]
    for _ in range(1, k):
        d2 = np.min(((points[:, None, :] - np.array(centers)[None]) ** 2).sum(axis=2), axis=1)
        total = d2.sum()
        if total == 0:
            centers.append(points[rng.integers(n)])
            continue
        centers.append(points[rng.choice(n, p=d2 / total)])
    return np.array(centers, dtype=float)


def detect_roles(positions, k: int = DEFAULT_ROLES, seed: int = 0, max_iter: int = 300) -> RoleModel:
    """Seeded k-means (k-means++ start, Lloyd iterations) on average positions."""
    pts = np.asarray(positions, dtype=float)
    if k < 1 or len(pts) < k:
        raise ParameterError(f"need at least k={k} points, got {len(pts)}")
    rng = np.random.default_rng(seed)
    centers = kmeans_pp_init(pts, k, rng)
    history = []
    labels = None
    for _ in range(max_iter):
        d = ((pts[:, None, :] - centers[None]) ** 2).sum(axis=2)
        new_labels = d.argmin(axis=1)
        history.append(float(d[np.arange(len(pts)), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = pts[labels == j]
            if len(members):
                centers[j] = members.mean(axis=0)
    return RoleModel(centroids=centers, inertia_history=history, labels=labels)


def average_positions(store: EventStore) -> dict:
    """``(player_id, match_id) -> mean event origin``."""
    acc = {}
    for e in store.all_events():
        if e.player_id:
            s = acc.setdefault((e.player_id, e.match_id), [0.0, 0.0, 0])
            s[0] += e.origin[0]
            s[1] += e.origin[1]
            s[2] += 1
    return {k: np.array([v[0] / v[2], v[1] / v[2]]) for k, v in sorted(acc.items())}


# ---------------------------------------------------------------- pipeline


@dataclass(frozen=True)
class Rating:
    player_id: int
    match_id: int
    team_id: int
    r: float
    goals: int
    combined: float
    alpha: float


def pr_team_stats(ratings: Sequence) -> tuple:
    vals = np.array([getattr(r, "combined", r) for r in ratings], dtype=float)
    if vals.size == 0:
        raise UndefinedValueError("no rated players")
    return float(vals.mean()), float(vals.std())


@dataclass
class PlayeRankResult:
    weights: FeatureWeights
    normalizer: Normalizer
    ratings: list
    roles: RoleModel | None
    player_roles: dict

    def team_stats(self) -> dict:
        by_team = {}
        for r in self.ratings:
            by_team.setdefault((r.match_id, r.team_id), []).append(r)
        return {k: pr_team_stats(v) for k, v in sorted(by_team.items())}


def run_playerank(store: EventStore, alpha: float = DEFAULT_ALPHA, k_roles: int = DEFAULT_ROLES, seed: int = 0,
                  goal_cap: int = GOAL_CAP) -> PlayeRankResult:
    raw = corpus_raw_vectors(store)
    keys = list(raw)
    if not keys:
        raise UndefinedValueError("no player events to rate")
    norm = Normalizer.fit(np.array([raw[k] for k in keys]))
    player_team, goals = {}, {}
    for e in store.all_events():
        if e.player_id:
            player_team.setdefault((e.player_id, e.match_id), e.team_id)
            if e.is_goal and e.is_shot_attempt:
                goals[(e.player_id, e.match_id)] = goals.get((e.player_id, e.match_id), 0) + 1
    # team-summed normalized vectors against win / non-win
    team_vec, outcome = {}, {}
    for k in keys:
        tk = (k[1], player_team[k])
        team_vec[tk] = team_vec.get(tk, 0.0) + norm.transform(raw[k])
    for (mid, tid) in team_vec:
        m = store.matches[mid]
        opp = m.opponent(tid)
        outcome[(mid, tid)] = m.goals.get(tid, 0) > m.goals.get(opp, 0)
    tkeys = sorted(team_vec)
    weights = learn_weights([team_vec[t] for t in tkeys], [outcome[t] for t in tkeys])
    weights.alpha = alpha
    ratings = []
    for k in keys:
        r = rate(norm.transform(raw[k]), weights)
        g = goals.get(k, 0)
        ratings.append(Rating(k[0], k[1], player_team[k], r, g, combine_goals(r, g, alpha, goal_cap), alpha))
    roles, player_roles = None, {}
    positions = average_positions(store)
    if len(positions) >= k_roles:
        roles = detect_roles(np.array(list(positions.values())), k_roles, seed)
        hist = {}
        for (pid, _), pos in positions.items():
            hist.setdefault(pid, []).append(pos)
        player_roles = {pid: roles.assign_role(np.array(h)) for pid, h in sorted(hist.items())}
    return PlayeRankResult(weights, norm, ratings, roles, player_roles)


def write_weights(weights: FeatureWeights, fh) -> None:
    """Weight file: one ``name<TAB>value`` line per feature, then ``R`` and ``alpha``."""
    for n, w in zip(weights.names, weights.weights):
        fh.write(f"{n}\t{float(w)!r}\n")
    fh.write(f"R\t{weights.R!r}\nalpha\t{weights.alpha!r}\nintercept\t{weights.intercept!r}\n")


def read_weights(fh) -> FeatureWeights:
    vals = {}
    for line in fh:
        if not line.strip() or line.startswith("#"):
            continue
        k, v = line.rstrip("\n").split("\t")
        vals[k] = float(v)
    names = tuple(n for n in vals if n not in ("R", "alpha", "intercept"))
    return FeatureWeights(np.array([vals[n] for n in names]), names, vals.get("intercept", 0.0), vals.get("alpha", DEFAULT_ALPHA))
