"""CART decision trees and bagged forests.

Trees are stored as flat node arrays (``feature`` is -1 at leaves) so they
serialize directly to JSON. Splits send ``x <= threshold`` left.
"""
import math

import numpy as np

from .. import kernels
from .base import resolve_max_features


def _gini(counts):
    n = counts.sum()
    if n == 0:
        return 0.0
    q = counts / n
    return 1.0 - float(np.sum(q * q))


def build_tree(X, y, n_classes, hp, rng):
    """Grow one tree on ``X`` (n x p) and encoded labels ``y`` in 0..n_classes-1.

    Returns the node arrays and the normalized Gini importance per column.
    Nodes split whenever they are impure and a valid split exists, even at
    zero gain; interaction-only signal (XOR, parity) depends on it.
    """
    n, p = X.shape
    max_depth = int(hp["max_tree_depth"])
    min_split = max(2, int(hp["min_samples_split"]))
    min_leaf = max(1, int(math.ceil(float(hp["min_weight_fraction_leaf"]) * n)))
    n_try = resolve_max_features(hp["max_features"], p)
    criterion = kernels.GINI if hp["criterion"] == "gini" else kernels.ENTROPY

    feature, threshold, left, right, value = [], [], [], [], []
    importance = np.zeros(p)
    all_features = np.arange(p, dtype=np.int64)

    def new_node(counts):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(int(np.argmax(counts)))
        return len(feature) - 1

    stack = [(np.arange(n), 0, None, None)]
    while stack:
        idx, depth, parent, side = stack.pop()
        yy = y[idx]
        counts = np.bincount(yy, minlength=n_classes).astype(float)
        node = new_node(counts)
        if parent is not None:
            (left if side == 0 else right)[parent] = node
        m = idx.size
        if depth >= max_depth or m < min_split or m < 2 * min_leaf or counts.max() == m:
            continue
        if n_try < p:
            feats = np.sort(rng.choice(p, size=n_try, replace=False)).astype(np.int64)
        else:
            feats = all_features
        f, thr, _ = kernels.best_split(np.ascontiguousarray(X[idx]), yy.astype(np.int64),
                                       n_classes, feats, criterion, min_leaf)
        if f < 0:
            continue
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        cl = np.bincount(y[li], minlength=n_classes).astype(float)
        cr = counts - cl
        importance[f] += (m / n) * (_gini(counts) - (li.size / m) * _gini(cl)
                                    - (ri.size / m) * _gini(cr))
        feature[node] = int(f)
        threshold[node] = float(thr)
        # right pushed first so the left subtree gets the next node ids
        stack.append((ri, depth + 1, node, 1))
        stack.append((li, depth + 1, node, 0))

    total = importance.sum()
    if total > 0:
        importance = importance / total
    else:
        importance = np.zeros(p)
    nodes = {
        "feature": np.array(feature, dtype=np.int64),
        "threshold": np.array(threshold, dtype=float),
        "left": np.array(left, dtype=np.int64),
        "right": np.array(right, dtype=np.int64),
        "value": np.array(value, dtype=np.int64),
    }
    return nodes, importance


def tree_apply(nodes, X):
    """Leaf class index for every row of ``X``."""
    node = np.zeros(X.shape[0], dtype=np.int64)
    rows = np.arange(X.shape[0])
    feature, threshold = nodes["feature"], nodes["threshold"]
    while True:
        f = feature[node]
        inner = f >= 0
        if not inner.any():
            break
        r = rows[inner]
        n = node[inner]
        go_left = X[r, f[inner]] <= threshold[n]
        node[r] = np.where(go_left, nodes["left"][n], nodes["right"][n])
    return nodes["value"][node]


def fit_dtree(X, y, n_classes, hp, rng):
    nodes, imp = build_tree(X, y, n_classes, hp, rng)
    return {"trees": [nodes]}, imp


def fit_rforest(X, y, n_classes, hp, rng):
    n = X.shape[0]
    trees, imps = [], []
    for _ in range(int(hp["n_estimators"])):
        tree_rng = np.random.default_rng(rng.integers(2**63))
        if hp["bootstrap"]:
            idx = tree_rng.integers(0, n, size=n)
        else:
            idx = np.arange(n)
        nodes, imp = build_tree(X[idx], y[idx], n_classes, hp, tree_rng)
        trees.append(nodes)
        imps.append(imp)
    return {"trees": trees}, np.mean(imps, axis=0)


def predict_trees(params, X, n_classes):
    votes = np.zeros((X.shape[0], n_classes))
    rows = np.arange(X.shape[0])
    for nodes in params["trees"]:
        votes[rows, tree_apply(nodes, X)] += 1.0
    return np.argmax(votes, axis=1)
