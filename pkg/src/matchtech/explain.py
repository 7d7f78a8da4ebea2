"""Shapley attributions of model scores.

The explained quantity is the model score P(male). Coalition values use
interventional expectations: ``v(S)`` averages the score over background rows
with the features in ``S`` replaced by the instance's values.

For tree models the coalition values come from the compiled kernel and are
enumerated over the features the ensemble actually splits on; the other
features are dummies, so restricting the game to the used features is exact.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import CapacityError, ParameterError

MAX_EXACT_FEATURES = 22
DEFAULT_BACKGROUND = 20
_CHUNK_ROWS = 1 << 17


@dataclass(frozen=True)
class BackgroundSet:
    rows: np.ndarray
    feature_names: tuple = ()

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        if rows.shape[0] == 0:
            raise ParameterError("background set is empty")
        if self.feature_names and len(self.feature_names) != rows.shape[1]:
            raise ParameterError("background feature names do not match its columns")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def sample(cls, X, size: int = DEFAULT_BACKGROUND, seed: int = 0, feature_names=()) -> "BackgroundSet":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if len(X) == 0:
            raise ParameterError("cannot sample a background from no rows")
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(len(X), size=min(size, len(X)), replace=False))
        return cls(X[idx], tuple(feature_names))

    def __len__(self):
        return len(self.rows)


@dataclass
class Attribution:
    instance_id: str
    base_value: float
    phi: np.ndarray
    score: float
    values: np.ndarray
    feature_names: tuple = ()
    method: str = "exact"
    stderr: np.ndarray | None = None
    n_permutations: int = 0

    def efficiency_gap(self) -> float:
        return float(self.base_value + np.sum(self.phi) - self.score)

    def as_dict(self) -> dict:
        names = self.feature_names or tuple(f"x{j}" for j in range(len(self.phi)))
        return dict(zip(names, map(float, self.phi)))


# ---------------------------------------------------------------- scoring


def _scorer(model) -> Callable:
    if hasattr(model, "predict_proba"):
        return model.predict_proba
    if callable(model):
        return lambda X: np.asarray(model(X), dtype=float)
    raise TypeError("model must expose predict_proba or be callable")


def _prepare(model, instance, background):
    x = np.asarray(instance, dtype=float).ravel()
    bg = background.rows if isinstance(background, BackgroundSet) else np.atleast_2d(np.asarray(background, dtype=float))
    if bg.shape[1] != x.size:
        raise ParameterError(f"instance has {x.size} features, background has {bg.shape[1]}")
    if hasattr(model, "impute"):
        x = model.impute(x[None, :])[0]
        bg = model.impute(bg)
    return x, bg


def _mask_bits(masks: np.ndarray, cols: Sequence[int]) -> np.ndarray:
    """Boolean (len(masks), len(cols)): bit ``i`` of each mask."""
    return ((masks[:, None] >> np.arange(len(cols))[None, :]) & 1).astype(bool)


def generic_coalition_values(score: Callable, x, bg, cols: Sequence[int]) -> np.ndarray:
    """Coalition values over the features ``cols`` by direct model evaluation."""
    cols = list(cols)
    k = len(cols)
    n_masks = 1 << k
    nb = len(bg)
    per_chunk = max(1, _CHUNK_ROWS // nb)
    v = np.empty(n_masks)
    for start in range(0, n_masks, per_chunk):
        masks = np.arange(start, min(n_masks, start + per_chunk), dtype=np.int64)
        z = np.repeat(bg[None, :, :], len(masks), axis=0)
        if k:
            bits = _mask_bits(masks, cols)
            sub = z[:, :, cols]
            z[:, :, cols] = np.where(bits[:, None, :], x[cols][None, None, :], sub)
        s = score(z.reshape(-1, x.size)).reshape(len(masks), nb)
        v[start:start + len(masks)] = s.mean(axis=1)
    return v


def coalition_values(model, x, bg) -> tuple:
    """``(v, cols)``: values over all masks of ``cols``, the features the game depends on."""
    ens = model.tree_ensemble() if hasattr(model, "tree_ensemble") else None
    p = x.size
    if ens is not None:
        cols = sorted(ens.features_used())
        bitpos = np.full(p, -1, dtype=np.int64)
        bitpos[cols] = np.arange(len(cols))
        v = kernels.tree_coalition_values(
            ens.feature, ens.threshold, ens.left, ens.right, ens.value, ens.roots,
            ens.weights, float(ens.bias), np.ascontiguousarray(x), np.ascontiguousarray(bg),
            bitpos, len(cols),
        )
        # scores are clipped to [0, 1]; ensemble sums stay inside that range
        return np.clip(np.asarray(v), 0.0, 1.0), cols
    return generic_coalition_values(_scorer(model), x, bg, range(p)), list(range(p))


def shapley_exact(model, instance, background, instance_id: str = "", feature_names=()) -> Attribution:
    """Exact Shapley values by enumerating every coalition of the model's features."""
    x, bg = _prepare(model, instance, background)
    p = x.size
    if p > MAX_EXACT_FEATURES:
        raise CapacityError(
            f"{p} features exceeds the exact enumeration bound of {MAX_EXACT_FEATURES}; use shapley_permutation"
        )
    v, cols = coalition_values(model, x, bg)
    phi = np.zeros(p)
    if cols:
        phi[cols] = kernels.shapley_from_coalitions(np.ascontiguousarray(v), len(cols))
    names = tuple(feature_names or getattr(model, "feature_names", ()) or ())
    return Attribution(instance_id, float(v[0]), phi, float(v[-1]), np.asarray(instance, dtype=float).ravel(),
                       names, "exact")


def shapley_permutation(model, instance, background, n_permutations: int = 1000, seed: int = 0,
                        instance_id: str = "", feature_names=(), antithetic: bool = True) -> Attribution:
    """Monte-Carlo Shapley values over seeded uniform feature orderings.

    With ``antithetic`` each drawn ordering is paired with its reverse and the
    standard errors are computed over pair means. Any floating residual from
    efficiency is spread over features in proportion to their absolute
    estimates.
    """
    if n_permutations < 1:
        raise ParameterError("n_permutations must be >= 1")
    x, bg = _prepare(model, instance, background)
    score = _scorer(model)
    p, nb = x.size, len(bg)
    rng = np.random.default_rng(seed)
    n_draws = (n_permutations + 1) // 2 if antithetic else n_permutations
    units = []
    for _ in range(n_draws):
        perm = rng.permutation(p)
        orders = [perm, perm[::-1]] if antithetic else [perm]
        contrib = np.zeros((len(orders), p))
        for o, order in enumerate(orders):
            z = np.repeat(bg[None, :, :], p + 1, axis=0)
            for step in range(1, p + 1):
                cols = order[:step]
                z[step:, :, cols[-1]] = x[cols[-1]]
            vals = score(z.reshape(-1, p)).reshape(p + 1, nb).mean(axis=1)
            contrib[o, order] = np.diff(vals)
        units.append(contrib.mean(axis=0))
    units = np.array(units)
    phi = units.mean(axis=0)
    stderr = units.std(axis=0, ddof=1) / np.sqrt(len(units)) if len(units) > 1 else np.full(p, np.inf)
    base = float(score(bg).mean())
    fx = float(score(x[None, :])[0])
    residual = (fx - base) - float(np.sum(phi))
    mass = np.abs(phi)
    if residual != 0.0:
        phi = phi + residual * (mass / mass.sum() if mass.sum() > 0 else np.full(p, 1.0 / p))
    names = tuple(feature_names or getattr(model, "feature_names", ()) or ())
    return Attribution(instance_id, base, phi, fx, np.asarray(instance, dtype=float).ravel(), names,
                       "permutation", stderr, len(units) * (2 if antithetic else 1))


# ---------------------------------------------------------------- reports


@dataclass
class GlobalImportance:
    feature_names: tuple
    values: np.ndarray
    attributions: list = field(default_factory=list)

    @property
    def ranking(self) -> list:
        order = sorted(range(len(self.values)), key=lambda j: (-self.values[j], j))
        return [self.feature_names[j] for j in order]

    def rank_of(self, name) -> int:
        return self.ranking.index(name) + 1


def explain_rows(model, X, background, method: str = "exact", ids=None, n_permutations: int = 1000,
                 seed: int = 0, feature_names=()) -> list:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    ids = list(ids) if ids is not None else [str(i) for i in range(len(X))]
    out = []
    for i, row in enumerate(X):
        if method == "exact":
            out.append(shapley_exact(model, row, background, ids[i], feature_names))
        elif method == "permutation":
            out.append(shapley_permutation(model, row, background, n_permutations, seed + i, ids[i], feature_names))
        else:
            raise ParameterError(f"unknown attribution method {method!r}")
    return out


def global_importance(model, X, background, method: str = "exact", ids=None, feature_names=(),
                      n_permutations: int = 1000, seed: int = 0, attributions=None) -> GlobalImportance:
    """Mean absolute attribution per feature over the rows of ``X``."""
    attrs = attributions if attributions is not None else explain_rows(
        model, X, background, method, ids, n_permutations, seed, feature_names)
    if not attrs:
        raise ParameterError("global importance needs at least one row")
    names = tuple(feature_names or attrs[0].feature_names or tuple(f"x{j}" for j in range(len(attrs[0].phi))))
    values = np.mean([np.abs(a.phi) for a in attrs], axis=0)
    return GlobalImportance(names, values, list(attrs))


def summary_points(attributions: Sequence[Attribution]) -> list:
    """Beeswarm rows ``(feature, instance_id, raw value, phi)``, feature-major."""
    rows = []
    if not attributions:
        return rows
    names = attributions[0].feature_names or tuple(f"x{j}" for j in range(len(attributions[0].phi)))
    for j, name in enumerate(names):
        for a in attributions:
            rows.append((name, a.instance_id, float(a.values[j]), float(a.phi[j])))
    return rows


def local_explanation(attribution: Attribution) -> dict:
    """Force-plot record: features by decreasing |phi| with their push direction."""
    a = attribution
    names = a.feature_names or tuple(f"x{j}" for j in range(len(a.phi)))
    order = sorted(range(len(a.phi)), key=lambda j: (-abs(a.phi[j]), j))
    feats = []
    for j in order:
        phi = float(a.phi[j])
        direction = "male" if phi > 0 else "female" if phi < 0 else "none"
        feats.append({"feature": names[j], "value": float(a.values[j]), "phi": phi, "direction": direction})
    return {
        "instance_id": a.instance_id,
        "base_value": a.base_value,
        "score": a.score,
        "predicted": "male" if a.score >= 0.5 else "female",
        "features": feats,
    }


def local_text(record: dict, top: int = 5) -> str:
    lines = [f"{record['instance_id']}: P(male)={record['score']:.3f} (base {record['base_value']:.3f}), "
             f"predicted {record['predicted']}"]
    for f in record["features"][:top]:
        lines.append(f"  {f['feature']}={f['value']:.4g} pushes toward {f['direction']} by {f['phi']:+.4f}")
    return "\n".join(lines)


def write_attributions(attributions: Sequence[Attribution], fh) -> None:
    if not attributions:
        return
    names = attributions[0].feature_names or tuple(f"x{j}" for j in range(len(attributions[0].phi)))
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["instance_id", "method", "base_value", "score"] + [f"phi_{n}" for n in names]
               + [f"value_{n}" for n in names])
    for a in attributions:
        w.writerow([a.instance_id, a.method, repr(a.base_value), repr(a.score)]
                   + [repr(float(v)) for v in a.phi] + [repr(float(v)) for v in a.values])


def write_global(gi: GlobalImportance, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["rank", "feature", "mean_abs_phi"])
    for r, name in enumerate(gi.ranking, start=1):
        w.writerow([r, name, repr(float(gi.values[gi.feature_names.index(name)]))])


def write_summary(points, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["feature", "instance_id", "value", "phi"])
    for name, iid, val, phi in points:
        w.writerow([name, iid, repr(val), repr(phi)])
