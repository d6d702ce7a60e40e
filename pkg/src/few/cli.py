"""Command line entry point: ``few {fit,predict,tune,bench,datagen}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .data import DataError, gen_epistasis_xor, gen_parity, load_csv, load_features, write_csv
from .engine import ConfigError, EngineConfig, FittedPipeline, few_fit, pipeline_predict
from .expr import ParseError
from .fitness import METRICS
from .learners import KINDS, LearnerError, LearnerSpec

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _json_arg(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"invalid JSON: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="few", description="Feature engineering wrapper for classification.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="train FEW and write the pipeline as JSON")
    f.add_argument("--data", required=True)
    f.add_argument("--target", default="label")
    f.add_argument("--ml", choices=KINDS, default="logreg")
    f.add_argument("--ml-params", type=_json_arg, default={},
                   help="JSON object of learner hyper-parameters")
    f.add_argument("--pop-size", type=int, default=50)
    f.add_argument("--pop-multiplier", type=float, default=None,
                   help="population as a multiple of the attribute count")
    f.add_argument("--generations", type=int, default=100)
    f.add_argument("--survival", default="eps_lexicase",
                   choices=["eps_lexicase", "eps-lexicase", "tournament", "crowding", "random"])
    f.add_argument("--fitness", choices=METRICS, default="r2")
    f.add_argument("--output-type", choices=["float", "bool"], default="float")
    f.add_argument("--max-depth", type=int, default=3)
    f.add_argument("--crossover-rate", type=float, default=0.5)
    f.add_argument("--mutation-rate", type=float, default=0.1)
    f.add_argument("--validation-fraction", type=float, default=0.25)
    f.add_argument("--time-budget", type=float, default=None, help="seconds")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", required=True)

    pr = sub.add_parser("predict", help="apply a pipeline to a CSV, one label per line")
    pr.add_argument("--pipeline", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--out", default=None, help="label file (default: stdout)")

    t = sub.add_parser("tune", help="grid-search one method on one dataset")
    t.add_argument("--data", required=True)
    t.add_argument("--target", default="label")
    t.add_argument("--method", choices=harness.METHODS, required=True)
    t.add_argument("--axes", type=_json_arg, default=None,
                   help="JSON object mapping parameter names to candidate lists")
    t.add_argument("--folds", type=int, default=5)
    t.add_argument("--cap", type=int, default=100)
    t.add_argument("--few-generations", type=int, default=None)
    t.add_argument("--seed", type=int, default=0)

    b = sub.add_parser("bench", help="run the multi-split benchmark")
    b.add_argument("--data", nargs="+", required=True, help="one or more CSV files")
    b.add_argument("--target", default="label")
    b.add_argument("--methods", nargs="+", choices=harness.METHODS, default=list(harness.METHODS))
    b.add_argument("--splits", type=int, default=30)
    b.add_argument("--test-fraction", type=float, default=0.5)
    b.add_argument("--folds", type=int, default=5)
    b.add_argument("--cap", type=int, default=100)
    b.add_argument("--few-generations", type=int, default=None)
    b.add_argument("--tune-once", action="store_true",
                   help="tune on the first split only and reuse the winner")
    b.add_argument("--no-timing", action="store_true",
                   help="write 0 seconds so reruns are byte-identical")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True, help="results CSV")
    b.add_argument("--ranks", default=None, help="rank CSV (default: <out>.ranks.csv)")

    g = sub.add_parser("datagen", help="write a synthetic benchmark CSV")
    g.add_argument("kind", choices=["parity", "epistasis"])
    g.add_argument("--n-samples", type=int, default=None)
    g.add_argument("--n-features", type=int, default=None)
    g.add_argument("--n-relevant", type=int, default=5, help="parity bits that set the label")
    g.add_argument("--noise", type=float, default=0.0, help="epistasis label-flip probability")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    return p


def _grid(method, axes, few_generations):
    grid = harness.default_grid(method)
    if axes is not None:
        if not isinstance(axes, dict):
            raise UsageError("--axes must be a JSON object")
        grid = harness.GridSpec(method, {k: list(v) for k, v in axes.items()}, grid.fixed)
    if method == "few" and few_generations is not None:
        grid.fixed["generations"] = few_generations
    return grid


def cmd_fit(args, out):
    try:
        config = _fit_config(args)
    except (ConfigError, LearnerError) as exc:
        raise UsageError(str(exc)) from None
    ds = load_csv(args.data, args.target)
    labels = np.array(ds.class_names)[ds.y]
    pipe = few_fit(ds.X, labels, config, ds.feature_names, ds.target_name)
    pipe.save(args.out)
    print(f"validation accuracy {pipe.initial_val_score:.4f} -> {pipe.best_val_score:.4f} "
          f"with {len(pipe.trees)} features; wrote {args.out}", file=out)
    for t in pipe.trees:
        print(f"  {t}", file=out)


def _fit_config(args):
    return EngineConfig(
        population_size=args.pop_size,
        population_multiplier=args.pop_multiplier,
        generations=args.generations,
        ml=LearnerSpec(args.ml, args.ml_params),
        fitness_metric=args.fitness,
        survival=args.survival,
        output_type=args.output_type,
        max_depth=args.max_depth,
        crossover_rate=args.crossover_rate,
        mutation_rate=args.mutation_rate,
        validation_fraction=args.validation_fraction,
        seed=args.seed,
        time_budget=args.time_budget,
    )


def cmd_predict(args, out):
    try:
        pipe = FittedPipeline.load(args.pipeline)
    except FileNotFoundError:
        raise DataError(f"pipeline file not found: {args.pipeline}") from None
    except (json.JSONDecodeError, KeyError, TypeError, ParseError) as exc:
        raise DataError(f"{args.pipeline}: not a valid pipeline ({exc})") from None
    X, names = load_features(args.data, drop=pipe.target_name)
    if pipe.feature_names is not None and list(names) != list(pipe.feature_names):
        raise DataError(f"{args.data}: columns {list(names)} do not match the pipeline's "
                        f"attributes {pipe.feature_names}")
    if X.shape[1] != pipe.n_features:
        raise DataError(f"{args.data}: {X.shape[1]} attribute columns, "
                        f"pipeline expects {pipe.n_features}")
    text = "".join(f"{label}\n" for label in pipeline_predict(pipe, X))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        out.write(text)


def cmd_tune(args, out):
    ds = load_csv(args.data, args.target)
    try:
        grid = _grid(args.method, args.axes, args.few_generations)
    except harness.HarnessError as exc:
        raise UsageError(str(exc)) from None
    params, score = harness.grid_search(ds, grid, args.folds, args.cap, args.seed)
    print(json.dumps({"method": args.method, "params": params, "cv_accuracy": score},
                     sort_keys=True), file=out)


def cmd_bench(args, out):
    datasets = harness.load_datasets(args.data, args.target)
    grids = [_grid(m, None, args.few_generations) for m in args.methods]

    def progress(r):
        status = f"{r.test_accuracy:.4f}" if r.ok else f"failed: {r.error}"
        print(f"{r.dataset} {r.method} split {r.split}: {status}", file=sys.stderr)

    results = harness.run_benchmark(datasets, grids, args.splits, args.test_fraction, args.seed,
                                    args.folds, args.cap, args.tune_once, not args.no_timing,
                                    args.workers, progress)
    harness.write_results(results, args.out)
    ranks_path = args.ranks or str(Path(args.out).with_suffix("")) + ".ranks.csv"
    table = harness.mean_rank(results)
    harness.write_ranks(table, ranks_path)
    for m in table.ordered():
        print(f"{m:12s} mean rank {table.mean_rank[m]:.3f} (se {table.stderr[m]:.3f})", file=out)
    failed = sum(not r.ok for r in results)
    if failed:
        print(f"{failed} trial(s) failed; see {args.out}", file=out)


def cmd_datagen(args, out):
    kw = {"seed": args.seed}
    if args.n_samples is not None:
        kw["n_samples"] = args.n_samples
    if args.n_features is not None:
        kw["n_features"] = args.n_features
    if args.kind == "parity":
        ds = gen_parity(n_relevant=args.n_relevant, **kw)
    else:
        ds = gen_epistasis_xor(label_noise=args.noise, **kw)
    write_csv(ds, args.out)
    print(f"wrote {ds.X.shape[0]} rows x {ds.X.shape[1]} attributes to {args.out}", file=out)


COMMANDS = {"fit": cmd_fit, "predict": cmd_predict, "tune": cmd_tune, "bench": cmd_bench,
            "datagen": cmd_datagen}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args, sys.stdout)
    except UsageError as exc:
        print(f"few: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"few: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:
        print(f"few: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
