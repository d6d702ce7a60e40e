import json

import numpy as np
import pytest

from few import engine, learners
from few.data import gen_epistasis_xor, split_indices
from few.engine import (ConfigError, EngineConfig, FittedPipeline, few_fit, pipeline_predict,
                        seed_population, select_by_importance)
from few.expr import BOOL, eval_trees, parse_tree, projection
from few.fitness import DegenerateTargetError
from few.learners import FittedModel, LearnerSpec


def small_xor(seed=0, n=400, d=6):
    ds = gen_epistasis_xor(n, d, 0.0, seed=seed)
    return ds.X, ds.y


def fake_model(imp, d=4):
    """A stand-in fitted model exposing only the given importances."""
    kind = "knn" if imp is None else "dtree"
    d = d if imp is None else len(imp)
    return FittedModel(kind, {}, np.array([0, 1]), np.zeros(d), np.ones(d), {},
                       None if imp is None else np.asarray(imp, dtype=float))


# ---------------------------------------------------------------- config

@pytest.mark.parametrize("kw", [
    {"fitness_metric": "fisher", "survival": "eps_lexicase"},
    {"validation_fraction": 0.5},
    {"validation_fraction": 0.0},
    {"survival": "roulette"},
    {"output_type": "int"},
    {"generations": -1},
])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        EngineConfig(**kw)


def test_config_accepts_hyphenated_survival_and_multiplier():
    cfg = EngineConfig(survival="eps-lexicase", population_multiplier=0.25)
    assert cfg.survival == "eps_lexicase"
    assert cfg.resolve_population(20) == 5
    assert EngineConfig(population_multiplier=0.01).resolve_population(10) == 1
    assert EngineConfig.from_dict(cfg.to_dict()) == cfg


# ------------------------------------------------------- seed population

def test_seed_population_uses_nonzero_importances():
    cfg = EngineConfig(max_depth=2)
    pop = seed_population(fake_model([0.5, 0, 0, 0.2]), 4, 5, cfg, np.random.default_rng(0))
    assert pop[:2] == [projection(0), projection(3)] and len(pop) == 5


def test_seed_population_without_importances_uses_all_attributes():
    cfg = EngineConfig()
    pop = seed_population(fake_model(None), 4, 10, cfg, np.random.default_rng(1))
    assert pop[:4] == [projection(j) for j in range(4)] and len(pop) == 10


def test_seed_population_all_zero_importances_is_random():
    cfg = EngineConfig(max_depth=3)
    pop = seed_population(fake_model([0, 0, 0]), 3, 6, cfg, np.random.default_rng(2))
    assert len(pop) == 6 and all(t.depth <= 3 for t in pop)


def test_seed_population_truncates_to_p():
    pop = seed_population(fake_model(None, 8), 8, 3, EngineConfig(), np.random.default_rng(3))
    assert pop == [projection(0), projection(1), projection(2)]


# -------------------------------------------------------------- selection

def test_select_by_importance_examples():
    pop = [projection(j) for j in range(3)]
    assert select_by_importance(pop, fake_model([0.9, 0, 0.1]), np.zeros(3)).tolist() == [0, 2]
    assert select_by_importance(pop, fake_model(None, 3), np.zeros(3)).tolist() == [0, 1, 2]
    assert select_by_importance(pop, fake_model([0, 0, 0]), np.array([0.1, 0.7, 0.3])).tolist() == [1]


# ---------------------------------------------------------------- few_fit

def test_zero_generations_returns_initial_model():
    X, y = small_xor()
    p = few_fit(X, y, EngineConfig(generations=0, seed=1))
    assert p.best_val_score == p.initial_val_score
    assert p.trees == [projection(j) for j in range(X.shape[1])]
    rng = np.random.default_rng(1)
    tr, _ = split_indices(y, 0.25, True, rng)
    bare = learners.fit(LearnerSpec("logreg"), X[tr], y[tr], rng=int(rng.integers(2**63)))
    assert np.array_equal(pipeline_predict(p, X), learners.predict(bare, X))


def test_xor_beats_initial_representation():
    X, y = small_xor(1, n=800, d=10)
    cfg = EngineConfig(population_size=20, generations=40, output_type=BOOL, seed=2)
    p = few_fit(X, y, cfg)
    assert p.initial_val_score < 0.65
    assert p.best_val_score > p.initial_val_score


def test_determinism_and_serialization():
    X, y = small_xor(3)
    cfg = EngineConfig(population_size=10, generations=8, seed=7, survival="tournament")
    a, b = few_fit(X, y, cfg), few_fit(X, y, cfg)
    assert a.to_json() == b.to_json()
    again = FittedPipeline.from_dict(json.loads(a.to_json()))
    assert np.array_equal(pipeline_predict(again, X), pipeline_predict(a, X))


def test_replay_on_validation_equals_best_score():
    X, y = small_xor(4)
    p = few_fit(X, y, EngineConfig(population_size=12, generations=10, seed=3))
    va = p.validation_indices
    assert np.mean(pipeline_predict(p, X[va]) == y[va]) == p.best_val_score


@pytest.mark.parametrize("survival", ["tournament", "crowding", "eps_lexicase", "random"])
def test_archive_monotone_and_population_size(survival):
    X, y = small_xor(5)
    sizes = []
    cfg = EngineConfig(population_size=9, generations=12, survival=survival, seed=4)
    p = few_fit(X, y, cfg, callback=lambda g, arc, pop: sizes.append(len(pop)))
    trace = [s.best_val_score for s in p.stats]
    assert trace == sorted(trace) and trace[0] >= p.initial_val_score
    assert sizes == [9] * 12


@pytest.mark.parametrize("metric", ["silhouette", "fisher"])
def test_other_fitness_metrics_run(metric):
    X, y = small_xor(6)
    survival = "tournament" if metric == "fisher" else "eps_lexicase"
    p = few_fit(X, y, EngineConfig(population_size=8, generations=5, fitness_metric=metric,
                                   survival=survival, seed=5))
    assert p.best_val_score >= p.initial_val_score


@pytest.mark.parametrize("kind", ["dtree", "knn", "gnb", "linear_svc", "rforest"])
def test_learner_pairings_run(kind):
    X, y = small_xor(7, n=200)
    p = few_fit(X, y, EngineConfig(population_size=8, generations=3, ml=LearnerSpec(kind), seed=6))
    assert set(pipeline_predict(p, X)) <= {0, 1}


def test_dropped_members_had_zero_importance(monkeypatch):
    X, y = small_xor(8)
    seen = []
    real = engine.select_by_importance

    def spy(population, model, fitness):
        keep = real(population, model, fitness)
        dropped = np.setdiff1d(np.arange(len(population)), keep)
        seen.append((model.importances[dropped], keep.size))
        return keep

    monkeypatch.setattr(engine, "select_by_importance", spy)
    few_fit(X, y, EngineConfig(population_size=10, generations=6, seed=8))
    assert len(seen) == 6
    for dropped_imp, kept in seen:
        assert kept >= 1 and np.all(dropped_imp == 0)


def test_single_class_rejected():
    with pytest.raises(DegenerateTargetError):
        few_fit(np.zeros((20, 2)), np.zeros(20), EngineConfig())


def test_predict_shape_mismatch():
    X, y = small_xor(9)
    p = few_fit(X, y, EngineConfig(generations=1, population_size=4))
    with pytest.raises(learners.ShapeError):
        pipeline_predict(p, X[:, :2])


def test_known_xor_solution_generalises():
    ds = gen_epistasis_xor(1600, 20, 0.0, seed=11)
    tr, te = split_indices(ds.y, 0.5, True, 0)
    trees = [parse_tree("(xor x19 x18)", 20)]
    model = learners.fit(LearnerSpec("dtree"), eval_trees(trees, ds.X[tr]), ds.y[tr])
    acc = learners.accuracy(model, eval_trees(trees, ds.X[te]), ds.y[te])
    assert acc >= 0.95
