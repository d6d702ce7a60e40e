"""Fitness of a single engineered feature against class labels.

All aggregates are oriented so that higher is better. Per-case errors (used
by epsilon-lexicase survival) are oriented so that lower is better.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

METRICS = ("r2", "silhouette", "fisher")
FISHER_MIN_SCALE = 1e-9


class DegenerateTargetError(ValueError):
    pass


class UnsupportedMetricError(ValueError):
    pass


@dataclass
class FitnessRecord:
    aggregate: float
    per_case_error: Optional[np.ndarray] = None


def _columns(phi, y):
    phi = np.asarray(phi, dtype=float).ravel()
    y = np.asarray(y).ravel()
    if phi.shape != y.shape:
        raise ValueError(f"phi has {phi.size} entries, y has {y.size}")
    return phi, y


def r2_fitness(phi, y) -> float:
    """Coefficient of determination of ``phi`` as a predictor of the labels."""
    phi, y = _columns(phi, y)
    y = y.astype(float)
    ss_tot = np.sum((y - y.mean()) ** 2)
    if y.size < 2 or ss_tot == 0:
        raise DegenerateTargetError("r2 needs at least two distinct label values")
    return float(1.0 - np.sum((y - phi) ** 2) / ss_tot)


def _class_stats(phi, y):
    classes = np.unique(y)
    if classes.size < 2:
        raise DegenerateTargetError("need at least two classes")
    groups = [phi[y == c] for c in classes]
    return classes, groups


def fisher_fitness(phi, y) -> float:
    """Sum over unordered class pairs of |mu_i - mu_j| / sqrt(var_i + var_j)."""
    phi, y = _columns(phi, y)
    _, groups = _class_stats(phi, y)
    mu = np.array([g.mean() for g in groups])
    var = np.array([g.var() for g in groups])
    total = 0.0
    for i in range(len(groups)):
        for j in range(i + 1, len(groups)):
            scale = max(np.sqrt(var[i] + var[j]), FISHER_MIN_SCALE)
            total += abs(mu[i] - mu[j]) / scale
    return float(total)


def _nearest(centroids, k):
    gaps = np.abs(centroids - centroids[k])
    gaps[k] = np.inf
    return int(np.argmin(gaps))  # first minimum = lowest class index


def nearest_other_class(phi, y, k):
    """Class whose centroid on ``phi`` is closest to the centroid of class ``k``."""
    phi, y = _columns(phi, y)
    classes, groups = _class_stats(phi, y)
    centroids = np.array([g.mean() for g in groups])
    pos = int(np.searchsorted(classes, k))
    if pos >= classes.size or classes[pos] != k:
        raise ValueError(f"class {k!r} not present")
    return classes[_nearest(centroids, pos)]


def silhouette_fitness(phi, y):
    """Mean and per-sample silhouette with squared distances on the feature.

    Within-class distance excludes the sample itself; a member of a
    singleton class scores 0, as does a sample with a = b = 0.
    """
    phi, y = _columns(phi, y)
    classes, groups = _class_stats(phi, y)
    centroids = np.array([g.mean() for g in groups])
    # mean squared distance from v to a group = (v - m)^2 + var
    vars_ = np.array([g.var() for g in groups])
    sizes = np.array([g.size for g in groups])
    idx = np.searchsorted(classes, y)
    neighbor = np.array([_nearest(centroids, k) for k in range(classes.size)])

    n_own = sizes[idx]
    own_sum = n_own * ((phi - centroids[idx]) ** 2 + vars_[idx])
    with np.errstate(invalid="ignore", divide="ignore"):
        a = np.where(n_own > 1, own_sum / np.maximum(n_own - 1, 1), 0.0)
    nb = neighbor[idx]
    b = (phi - centroids[nb]) ** 2 + vars_[nb]
    a = np.maximum(a, 0.0)
    b = np.maximum(b, 0.0)
    denom = np.maximum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    s = np.where(n_own > 1, np.clip(s, -1.0, 1.0), 0.0)
    return float(s.mean()), s


def per_case_errors(metric: str, phi, y) -> np.ndarray:
    if metric == "r2":
        phi, y = _columns(phi, y)
        return (y.astype(float) - phi) ** 2
    if metric == "silhouette":
        return 1.0 - silhouette_fitness(phi, y)[1]
    raise UnsupportedMetricError(f"{metric!r} has no per-case decomposition")


def evaluate(metric: str, phi, y, with_cases: bool = False) -> FitnessRecord:
    """Aggregate fitness, plus per-case errors when requested and available."""
    if metric == "r2":
        agg = r2_fitness(phi, y)
        cases = per_case_errors("r2", phi, y) if with_cases else None
    elif metric == "silhouette":
        agg, s = silhouette_fitness(phi, y)
        cases = 1.0 - s if with_cases else None
    elif metric == "fisher":
        if with_cases:
            raise UnsupportedMetricError("fisher has no per-case decomposition")
        agg, cases = fisher_fitness(phi, y), None
    else:
        raise ValueError(f"unknown fitness metric {metric!r}")
    return FitnessRecord(agg, cases)
