"""Datasets: CSV loading, stratified splitting, synthetic problems."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MISSING = {"", "na", "nan", "null", "none", "?"}
# P(genotype = 0) = 1/2 under Hardy-Weinberg with this minor-allele frequency
XOR_MAF = 1.0 - 1.0 / math.sqrt(2.0)


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple
    class_names: tuple
    name: str = ""
    target_name: str = "label"

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], self.feature_names, self.class_names,
                       self.name, self.target_name)


def _resolve_target(header, target):
    if isinstance(target, int) or (isinstance(target, str) and target.lstrip("-").isdigit()
                                   and target not in header):
        j = int(target)
        if not -len(header) <= j < len(header):
            raise DataError(f"target column index {j} out of range ({len(header)} columns)")
        return j % len(header)
    if target not in header:
        raise DataError(f"target column {target!r} not found; columns are {header}")
    return header.index(target)


def _read_rows(path):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    if len(rows) < 2:
        raise DataError(f"{path}: no data rows")
    return path, [h.strip() for h in rows[0]], rows[1:]


def _parse_matrix(path, header, body, cols):
    """Numeric matrix of ``cols``; missing cells become the column median."""
    X = np.empty((len(body), len(cols)))
    for r, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: row {r} has {len(row)} fields, expected {len(header)}")
        for out_j, j in enumerate(cols):
            cell = row[j].strip()
            if cell.lower() in MISSING:
                X[r - 2, out_j] = np.nan
                continue
            try:
                X[r - 2, out_j] = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {r}, column {header[j]!r}: "
                                f"non-numeric value {cell!r}") from None
    for j in range(X.shape[1]):
        col = X[:, j]
        bad = ~np.isfinite(col)
        if bad.any():
            good = col[~bad]
            col[bad] = np.median(good) if good.size else 0.0
    return X


def load_csv(path, target="label") -> Dataset:
    """Read a header-first CSV; ``target`` is a column name or index.

    Labels are encoded 0..k-1 in order of first appearance; blank or NA
    numeric cells are replaced by their column median.
    """
    path, header, body = _read_rows(path)
    t = _resolve_target(header, target)
    feat_cols = [j for j in range(len(header)) if j != t]
    X = _parse_matrix(path, header, body, feat_cols)
    labels = [row[t].strip() for row in body]
    class_names = list(dict.fromkeys(labels))
    code = {c: i for i, c in enumerate(class_names)}
    y = np.array([code[v] for v in labels], dtype=np.int64)
    return Dataset(X, y, tuple(header[j] for j in feat_cols), tuple(class_names),
                   name=path.stem, target_name=header[t])


def load_features(path, drop=None) -> tuple:
    """Attribute matrix and column names of a CSV, skipping column ``drop`` if present."""
    path, header, body = _read_rows(path)
    cols = [j for j, h in enumerate(header) if h != drop]
    return _parse_matrix(path, header, body, cols), tuple(header[j] for j in cols)


def write_csv(ds: Dataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(ds.feature_names) + [ds.target_name])
        for row, label in zip(ds.X, ds.y):
            w.writerow([_fmt(v) for v in row] + [ds.class_names[label]])


def _fmt(v):
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)


# ------------------------------------------------------------------ splits

def split_indices(y, test_fraction, stratified=True, seed=None):
    """Train/test index arrays.

    Stratified splits take ``round(test_fraction * n_c)`` of each class for
    test, but never a class's last sample (singletons stay in train).
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    y = np.asarray(y)
    if not stratified:
        perm = rng.permutation(y.size)
        n_test = min(max(int(round(test_fraction * y.size)), 1), y.size - 1)
        return np.sort(perm[n_test:]), np.sort(perm[:n_test])
    train, test = [], []
    for c in np.unique(y):
        members = rng.permutation(np.flatnonzero(y == c))
        n_test = min(int(round(test_fraction * members.size)), members.size - 1)
        test.append(members[:n_test])
        train.append(members[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def train_test_split(ds: Dataset, test_fraction=0.5, stratified=True, seed=None):
    tr, te = split_indices(ds.y, test_fraction, stratified, seed)
    return ds.subset(tr), ds.subset(te)


def stratified_folds(y, k_folds, seed=None):
    """Partition sample indices into ``k_folds`` folds, dealing each class round-robin.

    The deal continues where the previous class stopped, so total fold
    sizes also differ by at most one.
    """
    if k_folds < 2:
        raise ValueError("k_folds must be >= 2")
    rng = np.random.default_rng(seed)
    y = np.asarray(y)
    folds = [[] for _ in range(k_folds)]
    offset = 0
    for c in np.unique(y):
        members = rng.permutation(np.flatnonzero(y == c))
        for i, m in enumerate(members):
            folds[(offset + i) % k_folds].append(m)
        offset += members.size
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


def stratified_kfold(ds: Dataset, k_folds=5, seed=None):
    return stratified_folds(ds.y, k_folds, seed)


# -------------------------------------------------------------- generators

def _names(d):
    return tuple(f"x{j}" for j in range(d))


def gen_parity(n_samples=1124, n_features=10, n_relevant=5, seed=None) -> Dataset:
    """Uniform random bits; the label is the parity of the first ``n_relevant``."""
    if not 1 <= n_relevant <= n_features:
        raise ValueError("need 1 <= n_relevant <= n_features")
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 2, size=(n_samples, n_features))
    y = (X[:, :n_relevant].sum(axis=1) % 2).astype(np.int64)
    return Dataset(X.astype(float), y, _names(n_features), ("0", "1"),
                   name=f"parity{n_relevant}+{n_features - n_relevant}")


def gen_epistasis_xor(n_samples=1600, n_features=20, label_noise=0.0, seed=None) -> Dataset:
    """Genotype-like two-locus XOR problem.

    Every column is a genotype in {0, 1, 2} drawn under Hardy-Weinberg
    equilibrium with P(0) = 1/2. The label is 1 iff exactly one of the last
    two columns is non-zero; labels are then flipped with probability
    ``label_noise``. Because each locus is non-zero with probability 1/2,
    no single column carries information about the label.
    """
    if n_features < 2:
        raise ValueError("need at least two features")
    if not 0 <= label_noise < 0.5:
        raise ValueError("label_noise must be in [0, 0.5)")
    rng = np.random.default_rng(seed)
    q = XOR_MAF
    probs = [(1 - q) ** 2, 2 * q * (1 - q), q * q]
    X = rng.choice(3, size=(n_samples, n_features), p=probs).astype(float)
    a = X[:, -2] >= 1
    b = X[:, -1] >= 1
    y = (a ^ b).astype(np.int64)
    flip = rng.random(n_samples) < label_noise
    y = np.where(flip, 1 - y, y)
    return Dataset(X, y, _names(n_features), ("0", "1"),
                   name=f"xor-2w-{n_features}a-{label_noise:g}n")
