"""JSON model files.

A model file is one JSON object with ``format``, ``kind``, ``params``,
``seed``, ``feature_names``, ``impute_means`` and a kind-specific ``body``:
``tree`` for a decision tree, ``trees`` for a forest, ``stumps``/``alphas``/
``errors`` for AdaBoost, standardized coefficients for logistic regression and
``prior`` for the baseline. Floats are written with ``repr`` precision, so a
round trip reproduces predictions bit for bit.
"""
from __future__ import annotations

import json

import numpy as np

from ..errors import ParseError
from .models import (
    AdaBoostM1Model,
    BaselineModel,
    DecisionTreeModel,
    LogisticModel,
    RandomForestModel,
    TrainedModel,
    Tree,
)

FORMAT = "matchtech-model/1"


def model_to_record(model: TrainedModel) -> dict:
    rec = {
        "format": FORMAT,
        "kind": model.kind,
        "params": {k: (None if v is None else v) for k, v in model.params.items()},
        "seed": int(model.seed),
        "feature_names": list(model.feature_names),
        "impute_means": [float(v) for v in model.impute_means],
    }
    if isinstance(model, DecisionTreeModel):
        body = {"tree": model.tree.to_record()}
    elif isinstance(model, RandomForestModel):
        body = {"trees": [t.to_record() for t in model.trees]}
    elif isinstance(model, AdaBoostM1Model):
        body = {
            "stumps": [s.to_record() for s in model.stumps],
            "alphas": [float(a) for a in model.alphas],
            "errors": [float(e) for e in model.errors],
        }
    elif isinstance(model, LogisticModel):
        body = {
            "beta": [float(b) for b in model.beta],
            "intercept": float(model.intercept),
            "mean": [float(m) for m in model.mean],
            "scale": [float(s) for s in model.scale],
            "n_iter": int(model.n_iter),
            "grad_norm": float(model.grad_norm),
        }
    elif isinstance(model, BaselineModel):
        body = {"prior": float(model.prior)}
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    rec["body"] = body
    return rec


def model_from_record(rec: dict) -> TrainedModel:
    if rec.get("format") != FORMAT:
        raise ParseError(f"unsupported model format {rec.get('format')!r}")
    common = (rec["kind"], dict(rec["params"]), int(rec["seed"]), tuple(rec["feature_names"]),
              np.array(rec["impute_means"], dtype=float))
    body = rec["body"]
    kind = rec["kind"]
    if kind == "decision_tree":
        return DecisionTreeModel(*common, Tree.from_record(body["tree"]))
    if kind == "random_forest":
        return RandomForestModel(*common, [Tree.from_record(t) for t in body["trees"]])
    if kind == "adaboost":
        return AdaBoostM1Model(*common, [Tree.from_record(s) for s in body["stumps"]],
                               np.array(body["alphas"], dtype=float), list(body["errors"]))
    if kind == "logistic":
        return LogisticModel(*common, np.array(body["beta"]), body["intercept"], np.array(body["mean"]),
                             np.array(body["scale"]), body["n_iter"], body["grad_norm"])
    if kind == "baseline":
        return BaselineModel(*common, body["prior"])
    raise ParseError(f"unknown model kind {kind!r} in model file")


def save_model(model: TrainedModel, path, meta: dict | None = None) -> None:
    """Write the model record; ``meta`` is stored under ``_meta`` and ignored on load."""
    rec = model_to_record(model)
    if meta:
        rec["_meta"] = dict(meta)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rec, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_model(path) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        try:
            rec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from None
    return model_from_record(rec)
