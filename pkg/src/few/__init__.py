"""FEW: evolve a set of feature transformations wrapped around a classifier.

>>> from few import EngineConfig, LearnerSpec, few_fit, gen_parity
>>> ds = gen_parity(seed=0)
>>> pipe = few_fit(ds.X, ds.y, EngineConfig(ml=LearnerSpec("dtree"), output_type="bool"))
>>> [str(t) for t in pipe.trees]
"""
from .data import Dataset, DataError, gen_epistasis_xor, gen_parity, load_csv, train_test_split
from .engine import EngineConfig, FittedPipeline, few_fit, pipeline_predict
from .expr import FeatureTree, eval_tree, parse_tree, tree_to_text
from .harness import GridSpec, grid_search, mean_rank, run_benchmark
from .learners import LearnerSpec

__version__ = "0.1.0"

__all__ = [
    "Dataset", "DataError", "gen_epistasis_xor", "gen_parity", "load_csv", "train_test_split",
    "EngineConfig", "FittedPipeline", "few_fit", "pipeline_predict",
    "FeatureTree", "eval_tree", "parse_tree", "tree_to_text",
    "GridSpec", "grid_search", "mean_rank", "run_benchmark", "LearnerSpec",
]
