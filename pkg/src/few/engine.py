"""The FEW generation loop.

Each generation the wrapped learner is fitted on the population's outputs,
scored on a fixed internal validation split, and used to prune the
population (zero importance => removed). The survivors breed ``P``
offspring and a survival method cuts parents + offspring back to ``P``.
The best representation seen on validation is archived and returned, so the
result never scores below the learner on the raw attributes.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import learners
from .data import split_indices
from .evolution import (SURVIVAL_METHODS, SurvivalContext, crowding_survival,
                        eps_lexicase_survival, make_offspring, random_survival,
                        tournament_survival)
from .expr import BOOL, FLOAT, eval_trees, parse_tree, projection, random_tree, tree_to_text
from .fitness import METRICS, DegenerateTargetError, evaluate
from .learners import LearnerSpec

SURVIVAL_FUNCS = {
    "tournament": tournament_survival,
    "eps_lexicase": eps_lexicase_survival,
    "random": random_survival,
}


class ConfigError(ValueError):
    pass


@dataclass
class EngineConfig:
    population_size: int = 50
    population_multiplier: Optional[float] = None
    generations: int = 100
    ml: LearnerSpec = field(default_factory=lambda: LearnerSpec("logreg"))
    fitness_metric: str = "r2"
    survival: str = "eps_lexicase"
    output_type: str = FLOAT
    max_depth: int = 3
    crossover_rate: float = 0.5
    mutation_rate: float = 0.1
    validation_fraction: float = 0.25
    seed: int = 0
    time_budget: Optional[float] = None

    def __post_init__(self):
        self.survival = self.survival.replace("-", "_")
        if self.fitness_metric not in METRICS:
            raise ConfigError(f"unknown fitness metric {self.fitness_metric!r}")
        if self.survival not in SURVIVAL_METHODS:
            raise ConfigError(f"unknown survival method {self.survival!r}")
        if self.fitness_metric == "fisher" and self.survival == "eps_lexicase":
            raise ConfigError("fisher fitness has no per-case errors; cannot use eps_lexicase")
        if self.output_type not in (FLOAT, BOOL):
            raise ConfigError(f"output_type must be {FLOAT!r} or {BOOL!r}")
        if not 0 < self.validation_fraction < 0.5:
            raise ConfigError("validation_fraction must be in (0, 0.5)")
        if self.max_depth < 1 or self.generations < 0:
            raise ConfigError("max_depth must be >= 1 and generations >= 0")
        if not (0 <= self.crossover_rate <= 1 and 0 <= self.mutation_rate <= 1):
            raise ConfigError("crossover_rate and mutation_rate must be probabilities")
        if self.population_multiplier is None and self.population_size < 1:
            raise ConfigError("population_size must be >= 1")

    def resolve_population(self, d: int) -> int:
        if self.population_multiplier is not None:
            return max(1, int(round(self.population_multiplier * d)))
        return int(self.population_size)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["ml"] = self.ml.to_dict()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "EngineConfig":
        d = dict(d)
        d["ml"] = LearnerSpec.from_dict(d["ml"])
        return cls(**d)


@dataclass
class Archive:
    best_features: list
    best_model: learners.FittedModel
    best_val_score: float
    initial_val_score: float
    generation: int = -1

    def offer(self, trees, model, score, generation) -> bool:
        if score > self.best_val_score:
            self.best_features = list(trees)
            self.best_model = model
            self.best_val_score = float(score)
            self.generation = generation
            return True
        return False


@dataclass
class GenerationStats:
    generation: int
    val_score: float
    best_val_score: float
    n_selected: int
    mean_fitness: float


@dataclass
class FittedPipeline:
    trees: list
    model: learners.FittedModel
    classes: np.ndarray
    config: EngineConfig
    n_features: int
    initial_val_score: float
    best_val_score: float
    best_generation: int = -1
    stats: list = field(default_factory=list)
    feature_names: Optional[list] = None
    target_name: Optional[str] = None
    validation_indices: Optional[np.ndarray] = None

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise learners.ShapeError(f"expected {self.n_features} attribute columns")
        return eval_trees(self.trees, X)

    def to_dict(self) -> dict:
        return {
            "features": [tree_to_text(t) for t in self.trees],
            "model": learners.model_to_dict(self.model),
            "classes": np.asarray(self.classes).tolist(),
            "config": self.config.to_dict(),
            "n_features": self.n_features,
            "initial_val_score": self.initial_val_score,
            "best_val_score": self.best_val_score,
            "best_generation": self.best_generation,
            "stats": [asdict(s) for s in self.stats],
            "feature_names": self.feature_names,
            "target_name": self.target_name,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FittedPipeline":
        n = d["n_features"]
        return cls(
            trees=[parse_tree(s, n) for s in d["features"]],
            model=learners.model_from_dict(d["model"]),
            classes=np.array(d["classes"]),
            config=EngineConfig.from_dict(d["config"]),
            n_features=n,
            initial_val_score=d["initial_val_score"],
            best_val_score=d["best_val_score"],
            best_generation=d.get("best_generation", -1),
            stats=[GenerationStats(**s) for s in d.get("stats", [])],
            feature_names=d.get("feature_names"),
            target_name=d.get("target_name"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "FittedPipeline":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _child_seed(rng) -> int:
    return int(rng.integers(2**63))


def seed_population(initial_model, d: int, P: int, config: EngineConfig, rng) -> list:
    """Projections of the attributes the initial model uses, then random trees."""
    imp = learners.importances(initial_model)
    if imp is None:
        used = list(range(d))
    else:
        used = [j for j in range(d) if imp[j] > 0]
    pop = [projection(j) for j in used[:P]]
    while len(pop) < P:
        pop.append(random_tree(config.max_depth, config.output_type, d, rng))
    return pop


def select_by_importance(population, model, fitness) -> np.ndarray:
    """Indices of members with non-zero importance in ``model``.

    Learners without importances keep everyone; if every importance is zero
    the single fittest member is kept so the parent set is never empty.
    """
    imp = learners.importances(model)
    if imp is None:
        return np.arange(len(population))
    keep = np.flatnonzero(imp > 0)
    if keep.size == 0:
        keep = np.array([int(np.argmax(fitness))])
    return keep


def _fitness(metric, F, y, with_cases):
    agg = np.empty(F.shape[1])
    cases = np.empty((F.shape[1], F.shape[0])) if with_cases else None
    for i in range(F.shape[1]):
        rec = evaluate(metric, F[:, i], y, with_cases)
        agg[i] = rec.aggregate
        if with_cases:
            cases[i] = rec.per_case_error
    return agg, cases


def few_fit(X, y, config: EngineConfig, feature_names=None, target_name=None,
            callback=None) -> FittedPipeline:
    """Run FEW on attributes ``X`` (N x d) and labels ``y``.

    ``callback(generation, archive, population)`` is invoked after each
    generation's archive update, if given.
    """
    X = np.asarray(X, dtype=float)
    classes, yi = np.unique(np.asarray(y), return_inverse=True)
    n, d = X.shape
    if classes.size < 2:
        raise DegenerateTargetError("need at least two classes")
    if n < 10 or d < 1:
        raise ValueError("need at least 10 samples and 1 attribute")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")

    rng = np.random.default_rng(config.seed)
    P = config.resolve_population(d)
    tr, va = split_indices(yi, config.validation_fraction, stratified=True, seed=rng)
    X_tr, X_va, y_tr, y_va = X[tr], X[va], yi[tr], yi[va]
    if np.unique(y_tr).size < 2:
        raise DegenerateTargetError("internal training split has a single class")

    init = learners.fit(config.ml, X_tr, y_tr, rng=_child_seed(rng))
    init_score = learners.accuracy(init, X_va, y_va)
    archive = Archive([projection(j) for j in range(d)], init, init_score, init_score)
    population = seed_population(init, d, P, config, rng)

    metric = config.fitness_metric
    lexicase = config.survival == "eps_lexicase"
    stats = []
    started = time.perf_counter()
    for g in range(config.generations):
        if config.time_budget is not None and time.perf_counter() - started > config.time_budget:
            break
        F_tr = eval_trees(population, X_tr)
        model = learners.fit(config.ml, F_tr, y_tr, rng=_child_seed(rng))
        score = learners.accuracy(model, eval_trees(population, X_va), y_va)
        archive.offer(population, model, score, g)

        fit_pop, err_pop = _fitness(metric, F_tr, y_tr, lexicase)
        keep = select_by_importance(population, model, fit_pop)
        parents = [population[i] for i in keep]
        offspring = make_offspring(parents, P, config.crossover_rate, config.mutation_rate,
                                   rng, config.max_depth, d)
        F_off = eval_trees([o.tree for o in offspring], X_tr)
        fit_off, err_off = _fitness(metric, F_off, y_tr, lexicase)
        pool = parents + [o.tree for o in offspring]
        pool_fit = np.concatenate([fit_pop[keep], fit_off])

        if config.survival == "crowding":
            chosen = crowding_survival(fit_pop[keep], offspring, fit_off, F_tr[:, keep].T,
                                       F_off.T, P, rng)
        else:
            errors = np.vstack([err_pop[keep], err_off]) if lexicase else None
            ctx = SurvivalContext(P, pool_fit, errors, rng)
            chosen = SURVIVAL_FUNCS[config.survival](ctx)
        population = [pool[i] for i in chosen]
        stats.append(GenerationStats(g, float(score), archive.best_val_score, int(keep.size),
                                     float(np.mean(pool_fit[chosen]))))
        if callback is not None:
            callback(g, archive, population)

    return FittedPipeline(
        trees=list(archive.best_features),
        model=archive.best_model,
        classes=classes,
        config=config,
        n_features=d,
        initial_val_score=archive.initial_val_score,
        best_val_score=archive.best_val_score,
        best_generation=archive.generation,
        stats=stats,
        feature_names=list(feature_names) if feature_names is not None else None,
        target_name=target_name,
        validation_indices=va,
    )


def pipeline_predict(pipeline: FittedPipeline, X) -> np.ndarray:
    F = pipeline.transform(X)
    return pipeline.classes[learners.predict(pipeline.model, F)]
