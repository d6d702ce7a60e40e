"""Grid search, multi-split benchmarking and rank aggregation.

Every method is described by a :class:`GridSpec`. Learner methods map their
axes onto :class:`~few.learners.LearnerSpec` hyper-parameters; the ``few``
method maps them onto :class:`~few.engine.EngineConfig` fields, with ``ml``
naming the paired learner (run at its defaults).
"""
from __future__ import annotations

import csv
import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from . import learners
from .data import Dataset, load_csv, split_indices, stratified_folds
from .engine import EngineConfig, few_fit, pipeline_predict
from .learners import LearnerSpec

METHODS = ("few",) + learners.KINDS
RESULT_COLUMNS = ("dataset", "method", "split", "params_json", "cv_accuracy",
                  "test_accuracy", "seconds")
RANK_COLUMNS = ("method", "mean_rank", "stderr", "n_datasets")


class HarnessError(RuntimeError):
    pass


@dataclass
class GridSpec:
    method: str
    axes: dict = field(default_factory=dict)
    # settings applied to every combination but not searched
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise HarnessError(f"unknown method {self.method!r}; expected one of {METHODS}")
        for name, values in self.axes.items():
            if len(values) == 0:
                raise HarnessError(f"axis {name!r} has no values")

    @property
    def size(self) -> int:
        return math.prod(len(v) for v in self.axes.values())

    def combination(self, index: int) -> dict:
        """The ``index``-th combination; the last axis varies fastest."""
        out = {}
        names = list(self.axes)
        for name in reversed(names):
            values = self.axes[name]
            index, r = divmod(index, len(values))
            out[name] = values[r]
        return {**self.fixed, **{n: out[n] for n in names}}

    def combinations(self):
        keys = list(self.axes)
        for values in itertools.product(*self.axes.values()):
            yield {**self.fixed, **dict(zip(keys, values))}


def default_grid(method: str) -> GridSpec:
    """Search spaces used for benchmark comparisons."""
    dtree_axes = {"criterion": ["gini", "entropy"], "max_tree_depth": [2, 4, 6, 8, 10]}
    grids = {
        "few": {
            "population_multiplier": [0.25, 0.5, 1.0, 2.0, 3.0],
            "ml": ["logreg", "knn", "rforest", "linear_svc"],
            "output_type": ["bool", "float"],
            "max_depth": [2, 3],
        },
        "logreg": {"C": [0.001, 0.01, 0.1, 1.0, 10.0, 100.0], "penalty": ["l1", "l2"]},
        "linear_svc": {"C": [0.01, 0.1, 1.0, 10.0, 100.0]},
        "rforest": {
            "n_estimators": [10, 100, 1000],
            "min_weight_fraction_leaf": [0.0, 0.25, 0.5],
            "max_features": ["sqrt", "log2", None],
            "criterion": ["entropy", "gini"],
        },
        "knn": {"k": list(range(1, 51)), "weights": ["uniform", "distance"]},
        "dtree": dtree_axes,
        "gnb": {},
    }
    fixed = {"fitness_metric": "r2", "survival": "eps_lexicase"} if method == "few" else {}
    return GridSpec(method, grids[method], fixed)


# ------------------------------------------------------------ estimators

def few_config(params: dict, seed: int) -> EngineConfig:
    params = dict(params)
    ml = params.pop("ml", "logreg")
    if not isinstance(ml, LearnerSpec):
        ml = LearnerSpec(ml)
    return EngineConfig(ml=ml, seed=int(seed), **params)


def fit_predict(method: str, params: dict, X_tr, y_tr, X_te, seed: int) -> np.ndarray:
    """Train ``method`` with ``params`` and predict labels for ``X_te``."""
    if method == "few":
        pipe = few_fit(X_tr, y_tr, few_config(params, seed))
        return pipeline_predict(pipe, X_te)
    model = learners.fit(LearnerSpec(method, dict(params)), X_tr, y_tr, rng=seed)
    return learners.predict(model, X_te)


def cv_accuracy(method: str, params: dict, X, y, k_folds: int = 5, seed: int = 0) -> float:
    """Mean accuracy over stratified folds (folds depend only on ``seed``)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    scores = []
    for f, test in enumerate(stratified_folds(y, k_folds, seed)):
        if test.size == 0:
            continue
        train = np.setdiff1d(np.arange(y.size), test)
        pred = fit_predict(method, params, X[train], y[train], X[test], seed + f)
        scores.append(float(np.mean(pred == y[test])))
    return float(np.mean(scores))


# ----------------------------------------------------------- grid search

def sample_indices(size: int, cap: int, seed) -> np.ndarray:
    """Enumeration indices to evaluate: all of them, or ``cap`` sampled uniformly."""
    if size <= cap:
        return np.arange(size)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(size, cap, replace=False))


def grid_search(train: Dataset, grid: GridSpec, k_folds: int = 5, cap: int = 100, seed=0,
                log: Optional[list] = None):
    """Return ``(best_params, best_cv_accuracy)``.

    If ``log`` is a list, one ``(params, score_or_exception)`` entry is
    appended per evaluated combination, in enumeration order.
    """
    if grid.size == 0:
        raise HarnessError("empty grid")
    seed = int(np.random.SeedSequence(seed).generate_state(1)[0])
    best, best_score, failures = None, -np.inf, []
    for i in sample_indices(grid.size, cap, seed):
        params = grid.combination(int(i))
        try:
            score = cv_accuracy(grid.method, params, train.X, train.y, k_folds, seed)
        except Exception as exc:  # a bad combination must not stop the search
            failures.append((params, exc))
            if log is not None:
                log.append((params, exc))
            continue
        if log is not None:
            log.append((params, score))
        if score > best_score:
            best, best_score = params, score
    if best is None:
        lines = "\n".join(f"  {json.dumps(p, default=str)}: {e}" for p, e in failures)
        raise HarnessError(f"every combination failed for {grid.method}:\n{lines}")
    return best, float(best_score)


# ------------------------------------------------------------- benchmark

@dataclass
class TrialResult:
    dataset: str
    method: str
    split: int
    params: dict
    cv_accuracy: float
    test_accuracy: float
    seconds: float
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def split_seed(seed: int, dataset_index: int, split: int) -> int:
    return int(np.random.SeedSequence([seed, dataset_index, split]).generate_state(1)[0])


def trial_split(ds: Dataset, dataset_index: int, split: int, seed: int, test_fraction: float):
    """Train/test indices shared by every method for one (dataset, split)."""
    return split_indices(ds.y, test_fraction, stratified=True,
                         seed=split_seed(seed, dataset_index, split))


def _run_trial(job):
    ds, di, grid, split, seed, test_fraction, k_folds, cap, fixed_params = job
    started = time.perf_counter()
    s = split_seed(seed, di, split)
    tr, te = trial_split(ds, di, split, seed, test_fraction)
    method_seed = int(np.random.SeedSequence([s, METHODS.index(grid.method)]).generate_state(1)[0])
    try:
        if fixed_params is None:
            params, cv = grid_search(ds.subset(tr), grid, k_folds, cap, method_seed)
        else:
            params, cv = fixed_params
        pred = fit_predict(grid.method, params, ds.X[tr], ds.y[tr], ds.X[te], method_seed)
        acc = float(np.mean(pred == ds.y[te]))
        error = None
    except Exception as exc:
        params, cv, acc, error = {}, math.nan, math.nan, f"{type(exc).__name__}: {exc}"
    return TrialResult(ds.name, grid.method, split, params, cv, acc,
                       time.perf_counter() - started, error)


def run_benchmark(datasets, methods, n_splits: int = 30, test_fraction: float = 0.5, seed: int = 0,
                  k_folds: int = 5, cap: int = 100, tune_once: bool = False, timing: bool = True,
                  workers: int = 1, progress=None) -> list:
    """Tune, refit and test every method on ``n_splits`` splits of every dataset.

    Splits depend only on ``(seed, dataset position, split)``, so all
    methods see identical train/test partitions. Failed trials are kept
    with ``error`` set. With ``tune_once`` the parameters chosen on split 0
    are reused for the remaining splits. Results are sorted by dataset,
    method and split.
    """
    if not methods:
        raise HarnessError("no methods given")
    methods = [m if isinstance(m, GridSpec) else default_grid(m) for m in methods]

    def jobs(splits, chosen=None):
        for di, ds in enumerate(datasets):
            for grid in methods:
                fixed = None if chosen is None else chosen.get((ds.name, grid.method))
                for split in splits:
                    yield (ds, di, grid, split, seed, test_fraction, k_folds, cap, fixed)

    def run(job_list):
        if workers > 1:
            with ProcessPoolExecutor(workers) as pool:
                out = list(pool.map(_run_trial, job_list))
        else:
            out = []
            for job in job_list:
                out.append(_run_trial(job))
                if progress is not None:
                    progress(out[-1])
        return out

    if tune_once and n_splits > 1:
        first = run(list(jobs([0])))
        chosen = {(r.dataset, r.method): (r.params, r.cv_accuracy) for r in first if r.ok}
        rest = run(list(jobs(range(1, n_splits), chosen)))
        results = first + rest
    else:
        results = run(list(jobs(range(n_splits))))
    if not timing:
        for r in results:
            r.seconds = 0.0
    return sorted(results, key=lambda r: (r.dataset, r.method, r.split))


def _num(v) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def write_results(results, path) -> None:
    """Results CSV; a failed trial stores ``{"error": ...}`` as its params."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in results:
            params = {"error": r.error} if r.error else r.params
            w.writerow([r.dataset, r.method, r.split, json.dumps(params, sort_keys=True),
                        _num(r.cv_accuracy), _num(r.test_accuracy), _num(r.seconds)])


def read_results(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            params = json.loads(row["params_json"])
            error = None
            if row["test_accuracy"] == "" and set(params) == {"error"}:
                error, params = params["error"], {}
            num = lambda s: math.nan if s == "" else float(s)  # noqa: E731
            out.append(TrialResult(row["dataset"], row["method"], int(row["split"]), params,
                                   num(row["cv_accuracy"]), num(row["test_accuracy"]),
                                   num(row["seconds"]), error))
    return out


# ----------------------------------------------------------------- ranks

@dataclass
class RankTable:
    datasets: list
    methods: list
    ranks: np.ndarray  # datasets x methods, 1 = best
    mean_rank: dict
    stderr: dict

    @property
    def n_datasets(self) -> int:
        return len(self.datasets)

    def ordered(self) -> list:
        return sorted(self.methods, key=lambda m: (self.mean_rank[m], m))


def mean_rank(results) -> RankTable:
    """Rank methods per dataset by mean test accuracy (average ranks on ties).

    Failed trials are ignored; a method with no successful trial on a
    dataset ranks below every method that has one.
    """
    datasets = sorted({r.dataset for r in results})
    methods = sorted({r.method for r in results})
    acc = np.full((len(datasets), len(methods)), -np.inf)
    for di, ds in enumerate(datasets):
        for mi, m in enumerate(methods):
            vals = [r.test_accuracy for r in results
                    if r.dataset == ds and r.method == m and r.ok and not math.isnan(r.test_accuracy)]
            if vals:
                acc[di, mi] = np.mean(vals)
    ranks = np.vstack([rankdata(-row, method="average") for row in acc]) if datasets else \
        np.empty((0, len(methods)))
    means, errs = {}, {}
    for mi, m in enumerate(methods):
        col = ranks[:, mi]
        means[m] = float(col.mean())
        errs[m] = float(col.std(ddof=1) / math.sqrt(col.size)) if col.size > 1 else 0.0
    return RankTable(datasets, methods, ranks, means, errs)


def write_ranks(table: RankTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RANK_COLUMNS)
        for m in table.ordered():
            w.writerow([m, repr(table.mean_rank[m]), repr(table.stderr[m]), table.n_datasets])


def read_ranks(path) -> dict:
    """``{method: (mean_rank, stderr, n_datasets)}`` from a rank CSV."""
    with open(path, newline="") as fh:
        return {row["method"]: (float(row["mean_rank"]), float(row["stderr"]),
                                int(row["n_datasets"])) for row in csv.DictReader(fh)}


def load_datasets(paths, target="label") -> list:
    return [load_csv(Path(p), target) for p in paths]
