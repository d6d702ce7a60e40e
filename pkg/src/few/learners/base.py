from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

KINDS = ("logreg", "dtree", "rforest", "knn", "linear_svc", "gnb")
STANDARDIZED = ("logreg", "linear_svc", "knn")
MAX_FEATURES = (None, "sqrt", "log2")

DEFAULTS = {
    "logreg": {"C": 1.0, "penalty": "l1", "tol": 1e-6, "max_iter": 10_000},
    "linear_svc": {"C": 1.0, "penalty": "l2", "epochs": 1000},
    "dtree": {"criterion": "gini", "max_tree_depth": 10, "min_samples_split": 2,
              "min_weight_fraction_leaf": 0.0, "max_features": None},
    "rforest": {"n_estimators": 10, "criterion": "gini", "max_tree_depth": 10,
                "min_samples_split": 2, "min_weight_fraction_leaf": 0.0,
                "max_features": "sqrt", "bootstrap": True},
    "knn": {"k": 5, "weights": "uniform"},
    "gnb": {"var_smoothing": 1e-9},
}


class LearnerError(ValueError):
    pass


class DegenerateTarget(LearnerError):
    pass


class ShapeError(LearnerError):
    pass


def _check(cond, msg):
    if not cond:
        raise LearnerError(msg)


@dataclass(frozen=True)
class LearnerSpec:
    kind: str
    hyperparams: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise LearnerError(f"unknown learner kind {self.kind!r}; expected one of {KINDS}")
        unknown = set(self.hyperparams) - set(DEFAULTS[self.kind])
        if unknown:
            raise LearnerError(f"{self.kind} does not accept {sorted(unknown)}")
        hp = self.params
        if "C" in hp:
            _check(hp["C"] > 0, "C must be > 0")
        if "penalty" in hp:
            _check(hp["penalty"] in ("l1", "l2"), "penalty must be 'l1' or 'l2'")
        if self.kind == "knn":
            _check(int(hp["k"]) >= 1, "k must be >= 1")
            _check(hp["weights"] in ("uniform", "distance"), "weights must be uniform or distance")
        if "n_estimators" in hp:
            _check(int(hp["n_estimators"]) >= 1, "n_estimators must be >= 1")
        if "criterion" in hp:
            _check(hp["criterion"] in ("gini", "entropy"), "criterion must be gini or entropy")
        if "max_tree_depth" in hp:
            _check(int(hp["max_tree_depth"]) >= 1, "max_tree_depth must be >= 1")
        if "min_weight_fraction_leaf" in hp:
            _check(0.0 <= hp["min_weight_fraction_leaf"] <= 0.5,
                   "min_weight_fraction_leaf must be in [0, 0.5]")
        if "max_features" in hp:
            _check(hp["max_features"] in MAX_FEATURES, f"max_features must be one of {MAX_FEATURES}")

    @property
    def params(self) -> dict:
        return {**DEFAULTS[self.kind], **self.hyperparams}

    def to_dict(self):
        return {"kind": self.kind, "hyperparams": dict(self.hyperparams)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], dict(d.get("hyperparams", {})))


@dataclass
class FittedModel:
    kind: str
    hyperparams: dict
    classes: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    params: dict
    importances: Optional[np.ndarray] = None

    @property
    def n_features(self) -> int:
        return self.mean.shape[0]

    def transform(self, F) -> np.ndarray:
        """Standardize with the stored column statistics; constant columns map to 0."""
        F = np.asarray(F, dtype=float)
        if F.ndim != 2 or F.shape[1] != self.n_features:
            raise ShapeError(f"expected {self.n_features} feature columns, got "
                             f"{F.shape[1] if F.ndim == 2 else F.shape}")
        if self.kind not in STANDARDIZED:
            return F
        live = self.scale > 0
        out = np.zeros_like(F)
        out[:, live] = (F[:, live] - self.mean[live]) / self.scale[live]
        return out


def standardization(F):
    mean = F.mean(axis=0)
    scale = F.std(axis=0)
    # exact zero only for truly constant columns
    const = np.all(F == F[:1], axis=0) if F.shape[0] else np.ones(F.shape[1], bool)
    scale = np.where(const, 0.0, scale)
    return mean, scale


def resolve_max_features(rule, p):
    if rule is None:
        return p
    if rule == "sqrt":
        return max(1, int(math.sqrt(p)))
    return max(1, int(math.log2(p))) if p > 1 else 1
