"""Typed expression trees used as scalar feature transformations.

A tree is stored as a flat pre-order tuple of :class:`Node`. Operators are
typed: float operators take and return floats, comparisons take floats and
return booleans, logical operators take booleans. Variable leaves may sit in
either a float or a boolean slot; in a boolean slot they are read as
``x != 0``. Constants only appear in float slots.

Booleans are carried as float64 0/1 columns so every feature matrix is a
plain float array.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

FLOAT = "float"
BOOL = "bool"

EPS = 1e-9
# every feature value saturates here so downstream squares stay finite
FEATURE_MAX = 1e30
EXP_CLAMP = 32.0
LEAF_PROB = 0.3
CONST_PROB = 0.25


class OperatorKind(NamedTuple):
    symbol: str
    arity: int
    out_type: str
    in_type: str


def _ops(symbols, arity, out_type, in_type):
    return {s: OperatorKind(s, arity, out_type, in_type) for s in symbols}


FLOAT_BINARY = ("add", "sub", "mul", "div")
FLOAT_UNARY = ("sin", "cos", "exp", "log", "sqrt", "square", "cube")
LOGICAL_BINARY = ("and", "or", "xor")
LOGICAL_UNARY = ("not",)
COMPARISONS = ("eq", "gt", "geq", "lt", "leq")

OPERATORS: dict[str, OperatorKind] = {
    **_ops(FLOAT_BINARY, 2, FLOAT, FLOAT),
    **_ops(FLOAT_UNARY, 1, FLOAT, FLOAT),
    **_ops(LOGICAL_BINARY, 2, BOOL, BOOL),
    **_ops(LOGICAL_UNARY, 1, BOOL, BOOL),
    **_ops(COMPARISONS, 2, BOOL, FLOAT),
}

FLOAT_OPS = FLOAT_BINARY + FLOAT_UNARY
BOOL_OPS = LOGICAL_BINARY + LOGICAL_UNARY + COMPARISONS


class Node(NamedTuple):
    kind: str  # "op" | "var" | "const"
    value: object

    def __repr__(self):
        return _node_text(self)


class ParseError(ValueError):
    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class TreeStructureError(ValueError):
    """Raised when a tree cannot be evaluated against the given data."""


@dataclass(frozen=True)
class FeatureTree:
    nodes: tuple

    @property
    def output_type(self) -> str:
        root = self.nodes[0]
        if root.kind == "op":
            return OPERATORS[root.value].out_type
        return FLOAT

    @property
    def depth(self) -> int:
        return subtree_depth(self.nodes, 0)

    @property
    def size(self) -> int:
        return len(self.nodes)

    def variables(self) -> set:
        return {n.value for n in self.nodes if n.kind == "var"}

    def __str__(self):
        return tree_to_text(self)


def var(j: int) -> Node:
    return Node("var", int(j))


def const(c: float) -> Node:
    return Node("const", float(c))


def op(symbol: str) -> Node:
    return Node("op", symbol)


def projection(j: int) -> FeatureTree:
    return FeatureTree((var(j),))


def arity(node: Node) -> int:
    return OPERATORS[node.value].arity if node.kind == "op" else 0


def subtree_end(nodes, start: int) -> int:
    """Index one past the last node of the subtree rooted at ``start``."""
    need = 1
    i = start
    while need:
        need += arity(nodes[i]) - 1
        i += 1
    return i


def subtree_depth(nodes, start: int) -> int:
    def walk(i):
        n = arity(nodes[i])
        j = i + 1
        best = 0
        for _ in range(n):
            d, j = walk(j)
            best = max(best, d)
        return best + 1, j

    return walk(start)[0]


def slot_types(tree: FeatureTree) -> list:
    """Required type of the slot each node fills (root slot = output type)."""
    nodes = tree.nodes
    out = [None] * len(nodes)
    out[0] = tree.output_type

    def walk(i):
        j = i + 1
        if nodes[i].kind == "op":
            child_type = OPERATORS[nodes[i].value].in_type
            for _ in range(arity(nodes[i])):
                out[j] = child_type
                j = walk(j)
        return j

    walk(0)
    return out


def fits_slot(node: Node, slot: str, at_root: bool = False) -> bool:
    """Whether a subtree rooted at ``node`` may fill a slot of type ``slot``."""
    if node.kind == "op":
        return OPERATORS[node.value].out_type == slot
    if node.kind == "var":
        # a bool tree's root must stay a real boolean operator
        return not (slot == BOOL and at_root)
    return slot == FLOAT


# ---------------------------------------------------------------- evaluation

def _saturate(v):
    v = np.clip(v, -FEATURE_MAX, FEATURE_MAX)
    nan = np.isnan(v)
    if nan.any():
        v[nan] = 0.0
    return v


def _pdiv(a, b):
    safe = np.abs(b) > EPS
    return np.where(safe, a / np.where(safe, b, 1.0), 1.0)


def _plog(a):
    safe = np.abs(a) > EPS
    return np.where(safe, np.log(np.where(safe, np.abs(a), 1.0)), 0.0)


def _truth(a):
    return a != 0


_UNARY = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": lambda a: np.exp(np.minimum(a, EXP_CLAMP)),
    "log": _plog,
    "sqrt": lambda a: np.sqrt(np.abs(a)),
    "square": lambda a: np.square(a),
    "cube": lambda a: a * a * a,
    "not": lambda a: ~_truth(a),
}

_BINARY = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "div": _pdiv,
    "and": lambda a, b: _truth(a) & _truth(b),
    "or": lambda a, b: _truth(a) | _truth(b),
    "xor": lambda a, b: _truth(a) ^ _truth(b),
    "eq": lambda a, b: np.abs(a - b) <= EPS,
    "gt": np.greater,
    "geq": np.greater_equal,
    "lt": np.less,
    "leq": np.less_equal,
}


def eval_tree(tree: FeatureTree, X) -> np.ndarray:
    """Evaluate ``tree`` on every row of ``X``.

    Returns a float64 column of length ``N``. Boolean trees return 0/1.
    Division, log, sqrt, exp and powers are protected, and every value is
    saturated to ``[-1e30, 1e30]`` so the output is always finite.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise TreeStructureError("X must be a 2-d array")
    n, d = X.shape
    nodes = tree.nodes

    def walk(i):
        node = nodes[i]
        if node.kind == "var":
            if not 0 <= node.value < d:
                raise TreeStructureError(f"variable x{node.value} out of range for {d} columns")
            return X[:, node.value], i + 1
        if node.kind == "const":
            return np.full(n, node.value), i + 1
        if node.kind != "op" or node.value not in OPERATORS:
            raise TreeStructureError(f"bad node {node!r}")
        kind = OPERATORS[node.value]
        a, j = walk(i + 1)
        if kind.arity == 1:
            r = _UNARY[node.value](a)
        else:
            b, j = walk(j)
            r = _BINARY[node.value](a, b)
        if kind.out_type == BOOL:
            return r.astype(float), j
        return _saturate(r), j

    with np.errstate(all="ignore"):
        out, end = walk(0)
        if end != len(nodes):
            raise TreeStructureError("trailing nodes after root subtree")
        return _saturate(np.asarray(out, dtype=float))


def eval_trees(trees, X) -> np.ndarray:
    """Feature matrix with one column per tree."""
    X = np.asarray(X, dtype=float)
    if not trees:
        return np.empty((X.shape[0], 0))
    return np.column_stack([eval_tree(t, X) for t in trees])


# ---------------------------------------------------------------- generation

def random_leaf(slot: str, d: int, rng) -> Node:
    if slot == FLOAT and rng.random() < CONST_PROB:
        return const(rng.uniform(-1.0, 1.0))
    return var(rng.integers(d))


def _grow(slot, depth_left, d, rng, at_root, out):
    forced_op = at_root and slot == BOOL
    if depth_left <= 1 or (not forced_op and rng.random() < LEAF_PROB):
        out.append(random_leaf(slot, d, rng))
        return
    symbols = BOOL_OPS if slot == BOOL else FLOAT_OPS
    kind = OPERATORS[symbols[rng.integers(len(symbols))]]
    out.append(op(kind.symbol))
    for _ in range(kind.arity):
        _grow(kind.in_type, depth_left - 1, d, rng, False, out)


def random_tree(max_depth: int, output_type: str, d: int, rng) -> FeatureTree:
    """Grow a random tree no deeper than ``max_depth``.

    With ``max_depth == 1`` only a leaf fits; a boolean request then
    degenerates to a variable projection.
    """
    if max_depth < 1 or d < 1:
        raise ValueError("max_depth and d must be >= 1")
    if output_type not in (FLOAT, BOOL):
        raise ValueError(f"unknown output type {output_type!r}")
    out = []
    if max_depth == 1:
        out.append(random_leaf(FLOAT, d, rng) if output_type == FLOAT else var(rng.integers(d)))
    else:
        _grow(output_type, max_depth, d, rng, True, out)
    return FeatureTree(tuple(out))


# ------------------------------------------------------------- serialization

def _node_text(node: Node) -> str:
    if node.kind == "var":
        return f"x{node.value}"
    if node.kind == "const":
        return repr(float(node.value))
    return str(node.value)


def tree_to_text(tree: FeatureTree) -> str:
    nodes = tree.nodes

    def walk(i):
        node = nodes[i]
        if node.kind != "op":
            return _node_text(node), i + 1
        parts = [node.value]
        j = i + 1
        for _ in range(arity(node)):
            s, j = walk(j)
            parts.append(s)
        return "(" + " ".join(parts) + ")", j

    return walk(0)[0]


_TOKEN = re.compile(r"\(|\)|[^\s()]+")
_VAR = re.compile(r"x(\d+)\Z")


def parse_tree(text: str, d: int) -> FeatureTree:
    """Parse a prefix s-expression such as ``"(xor x18 x19)"``."""
    tokens = [(m.group(), m.start()) for m in _TOKEN.finditer(text)]
    if not tokens:
        raise ParseError("empty expression", 0)
    out = []
    pos = 0

    def atom(tok, at):
        m = _VAR.match(tok)
        if m:
            j = int(m.group(1))
            if j >= d:
                raise ParseError(f"variable {tok} out of range for {d} columns", at)
            return var(j)
        try:
            return const(float(tok))
        except ValueError:
            raise ParseError(f"unknown symbol {tok!r}", at) from None

    def expr(slot, at_root):
        nonlocal pos
        if pos >= len(tokens):
            raise ParseError("unexpected end of expression", len(text))
        tok, at = tokens[pos]
        pos += 1
        if tok == ")":
            raise ParseError("unexpected ')'", at)
        if tok != "(":
            node = atom(tok, at)
            if slot is not None and not fits_slot(node, slot, at_root):
                raise ParseError(f"{tok} cannot appear in a {slot} slot", at)
            out.append(node)
            return
        if pos >= len(tokens):
            raise ParseError("unexpected end of expression", len(text))
        sym, sat = tokens[pos]
        pos += 1
        if sym not in OPERATORS:
            raise ParseError(f"unknown symbol {sym!r}", sat)
        kind = OPERATORS[sym]
        if slot is not None and kind.out_type != slot:
            raise ParseError(f"{sym} returns {kind.out_type}, expected {slot}", sat)
        out.append(op(sym))
        for _ in range(kind.arity):
            if pos < len(tokens) and tokens[pos][0] == ")":
                raise ParseError(f"{sym} expects {kind.arity} argument(s)", tokens[pos][1])
            expr(kind.in_type, False)
        if pos >= len(tokens) or tokens[pos][0] != ")":
            at = tokens[pos][1] if pos < len(tokens) else len(text)
            raise ParseError(f"{sym} expects {kind.arity} argument(s)", at)
        pos += 1

    expr(None, True)
    if pos != len(tokens):
        raise ParseError("trailing input", tokens[pos][1])
    return FeatureTree(tuple(out))
