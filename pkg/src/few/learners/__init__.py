"""Self-contained classifiers exposing predictions and per-feature importances.

>>> model = fit(LearnerSpec("dtree"), F, y, rng=0)
>>> predict(model, F_new)
>>> importances(model)        # None for knn and gnb
"""
from __future__ import annotations

import numpy as np

from ..data import stratified_folds
from .base import (DEFAULTS, KINDS, STANDARDIZED, DegenerateTarget, FittedModel,
                   LearnerError, LearnerSpec, ShapeError, standardization)
from .bayes import fit_gnb, predict_gnb
from .linear import fit_linear_svc, fit_logreg, linear_importances, predict_linear
from .neighbors import fit_knn, predict_knn
from .tree import fit_dtree, fit_rforest, predict_trees

__all__ = [
    "KINDS", "DEFAULTS", "LearnerSpec", "FittedModel", "LearnerError", "DegenerateTarget",
    "ShapeError", "fit", "predict", "importances", "accuracy", "cross_val_accuracy",
    "model_to_dict", "model_from_dict",
]


def fit(spec: LearnerSpec, F, y, rng=None) -> FittedModel:
    """Train ``spec`` on feature matrix ``F`` (N x P) and labels ``y``.

    Labels may be any sortable values; predictions are returned in the same
    label space. ``rng`` is a seed or ``numpy.random.Generator``.
    """
    rng = np.random.default_rng(rng)
    F = np.asarray(F, dtype=float)
    y = np.asarray(y)
    if F.ndim != 2 or F.shape[1] == 0:
        raise ShapeError("feature matrix must have at least one column")
    if F.shape[0] != y.shape[0]:
        raise ShapeError(f"{F.shape[0]} rows but {y.shape[0]} labels")
    if not np.all(np.isfinite(F)):
        raise LearnerError("feature matrix contains non-finite values")
    classes, yi = np.unique(y, return_inverse=True)
    if classes.size < 2:
        raise DegenerateTarget("need at least two classes to fit a classifier")
    k = classes.size
    hp = spec.params
    p = F.shape[1]
    if spec.kind in STANDARDIZED:
        mean, scale = standardization(F)
    else:
        mean, scale = np.zeros(p), np.ones(p)
    model = FittedModel(spec.kind, dict(spec.hyperparams), classes, mean, scale, {})
    Z = model.transform(F)
    kind = spec.kind
    if kind == "logreg":
        model.params = fit_logreg(Z, yi, k, hp, rng)
        model.importances = linear_importances(model.params)
    elif kind == "linear_svc":
        model.params = fit_linear_svc(Z, yi, k, hp, rng)
        model.importances = linear_importances(model.params)
    elif kind == "dtree":
        model.params, model.importances = fit_dtree(Z, yi, k, hp, rng)
    elif kind == "rforest":
        model.params, model.importances = fit_rforest(Z, yi, k, hp, rng)
    elif kind == "knn":
        model.params = fit_knn(Z, yi, k, hp, rng)
    else:
        model.params = fit_gnb(Z, yi, k, hp, rng)
    return model


def predict(model: FittedModel, F) -> np.ndarray:
    Z = model.transform(F)
    k = model.classes.size
    hp = {**DEFAULTS[model.kind], **model.hyperparams}
    if model.kind in ("logreg", "linear_svc"):
        idx = predict_linear(model.params, Z, k)
    elif model.kind in ("dtree", "rforest"):
        idx = predict_trees(model.params, Z, k)
    elif model.kind == "knn":
        idx = predict_knn(model.params, Z, k, hp["k"], hp["weights"])
    else:
        idx = predict_gnb(model.params, Z, k)
    return model.classes[idx]


def importances(model: FittedModel):
    return None if model.importances is None else model.importances.copy()


def accuracy(model: FittedModel, F, y) -> float:
    return float(np.mean(predict(model, F) == np.asarray(y)))


def cross_val_accuracy(spec: LearnerSpec, F, y, k_folds: int = 5, rng=None) -> float:
    """Mean accuracy over stratified folds."""
    rng = np.random.default_rng(rng)
    F = np.asarray(F, dtype=float)
    y = np.asarray(y)
    folds = stratified_folds(y, k_folds, rng)
    scores = []
    for test in folds:
        if test.size == 0:
            continue
        train = np.setdiff1d(np.arange(y.size), test)
        model = fit(spec, F[train], y[train], rng)
        scores.append(accuracy(model, F[test], y[test]))
    return float(np.mean(scores))


# ------------------------------------------------------------------- JSON

def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def model_to_dict(model: FittedModel) -> dict:
    """JSON-ready description of a fitted model.

    Linear models carry ``coef`` (classes x P) and ``intercept``; tree
    models carry ``trees``, each a dict of parallel node arrays
    ``feature``/``threshold``/``left``/``right``/``value`` (leaf class index).
    """
    return {
        "kind": model.kind,
        "hyperparams": _jsonable(model.hyperparams),
        "classes": _jsonable(model.classes),
        "mean": model.mean.tolist(),
        "scale": model.scale.tolist(),
        "importances": None if model.importances is None else model.importances.tolist(),
        "params": _jsonable(model.params),
    }


_INT_ARRAYS = {"feature", "left", "right", "value", "y"}


def _restore(obj, key=None):
    if isinstance(obj, dict):
        return {k: _restore(v, k) for k, v in obj.items()}
    if key == "trees":
        return [_restore(t) for t in obj]
    if key == "n_iter":
        return list(obj)
    if isinstance(obj, list):
        return np.array(obj, dtype=np.int64 if key in _INT_ARRAYS else float)
    return obj


def model_from_dict(d: dict) -> FittedModel:
    imp = d.get("importances")
    return FittedModel(
        kind=d["kind"],
        hyperparams=dict(d["hyperparams"]),
        classes=np.array(d["classes"]),
        mean=np.array(d["mean"], dtype=float),
        scale=np.array(d["scale"], dtype=float),
        params=_restore(d["params"]),
        importances=None if imp is None else np.array(imp, dtype=float),
    )
