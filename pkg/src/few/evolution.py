"""Variation operators and survival methods.

Survival functions return indices into the pool they were given. The
engine's pool is always ``parents + offspring`` in that order.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .expr import (BOOL, COMPARISONS, FLOAT, FLOAT_BINARY, FLOAT_UNARY, LOGICAL_BINARY,
                   LOGICAL_UNARY, FeatureTree, Node, const, fits_slot, op, slot_types,
                   subtree_end, var)
from .fitness import UnsupportedMetricError

CROSSOVER_RETRIES = 8
SURVIVAL_METHODS = ("tournament", "crowding", "eps_lexicase", "random")

_SWAP_GROUPS = [FLOAT_BINARY, FLOAT_UNARY, LOGICAL_BINARY, LOGICAL_UNARY, COMPARISONS]
_GROUP_OF = {s: g for g in _SWAP_GROUPS for s in g}


@dataclass(frozen=True)
class Offspring:
    tree: FeatureTree
    parent_ids: tuple
    origin: str  # "crossover" | "mutation"


@dataclass
class SurvivalContext:
    capacity: int
    fitness: np.ndarray
    errors: Optional[np.ndarray] = None
    rng: Optional[np.random.Generator] = None

    def __post_init__(self):
        self.fitness = np.asarray(self.fitness, dtype=float)
        if self.capacity > self.fitness.size:
            raise ValueError(f"capacity {self.capacity} exceeds pool size {self.fitness.size}")
        if self.rng is None:
            self.rng = np.random.default_rng()


# ---------------------------------------------------------------- variation

def subtree_crossover(p1: FeatureTree, p2: FeatureTree, rng, max_depth: int) -> FeatureTree:
    """Replace a random subtree of ``p1`` by a type-compatible random subtree of ``p2``.

    Gives up after a few depth-violating attempts and returns ``p1``.
    """
    slots = slot_types(p1)
    n1, n2 = len(p1.nodes), len(p2.nodes)
    for _ in range(CROSSOVER_RETRIES):
        i = int(rng.integers(n1))
        candidates = [j for j in range(n2) if fits_slot(p2.nodes[j], slots[i], i == 0)]
        if not candidates:
            continue
        j = candidates[int(rng.integers(len(candidates)))]
        graft = p2.nodes[j:subtree_end(p2.nodes, j)]
        nodes = p1.nodes[:i] + graft + p1.nodes[subtree_end(p1.nodes, i):]
        child = FeatureTree(nodes)
        if child.depth <= max_depth:
            return child
    return p1


def _mutate_leaf(node: Node, slot: str, d: int, rng) -> Node:
    if slot == FLOAT and (rng.random() < 0.5 or (node.kind == "var" and d == 1)):
        return const(rng.uniform(-1.0, 1.0))
    if node.kind == "var" and d > 1:
        j = int(rng.integers(d - 1))
        return var(j + (j >= node.value))
    return var(rng.integers(d))


def point_mutation(p: FeatureTree, rate: float, rng, d: int) -> FeatureTree:
    """Independently swap each node, with probability ``rate``, for a different
    node of the same arity and type. Shape and depth are preserved."""
    if not 0 <= rate <= 1:
        raise ValueError("mutation rate must be in [0, 1]")
    slots = slot_types(p)
    out = []
    for i, node in enumerate(p.nodes):
        if rng.random() >= rate:
            out.append(node)
        elif node.kind == "op":
            group = [s for s in _GROUP_OF[node.value] if s != node.value]
            out.append(op(group[int(rng.integers(len(group)))]) if group else node)
        else:
            out.append(_mutate_leaf(node, slots[i], d, rng))
    return FeatureTree(tuple(out))


def make_offspring(parents, count: int, crossover_rate: float, mutation_rate: float,
                   rng, max_depth: int, d: int) -> list:
    """Produce ``count`` offspring from ``parents`` (a sequence of trees)."""
    parents = list(parents)
    if not parents:
        raise ValueError("cannot produce offspring from an empty parent set")
    out = []
    n = len(parents)
    for _ in range(count):
        if rng.random() < crossover_rate:
            a, b = int(rng.integers(n)), int(rng.integers(n))
            child = subtree_crossover(parents[a], parents[b], rng, max_depth)
            out.append(Offspring(child, (a, b), "crossover"))
        else:
            a = int(rng.integers(n))
            out.append(Offspring(point_mutation(parents[a], mutation_rate, rng, d), (a,), "mutation"))
    return out


# ----------------------------------------------------------------- survival

def mad(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(np.median(np.abs(v - np.median(v))))


def tournament_survival(ctx: SurvivalContext) -> np.ndarray:
    """``capacity`` size-2 tournaments drawn with replacement; ties broken at random."""
    m = ctx.fitness.size
    out = np.empty(ctx.capacity, dtype=np.int64)
    for s in range(ctx.capacity):
        a, b = ctx.rng.integers(m, size=2)
        fa, fb = ctx.fitness[a], ctx.fitness[b]
        if fa == fb:
            out[s] = a if ctx.rng.random() < 0.5 else b
        else:
            out[s] = a if fa > fb else b
    return out


def random_survival(ctx: SurvivalContext) -> np.ndarray:
    return np.sort(ctx.rng.choice(ctx.fitness.size, size=ctx.capacity, replace=False))


def lexicase_draws(rng, n_select, n_cases):
    """Random numbers consumed by epsilon-lexicase survival, in order:
    one case permutation per slot, then one uniform per slot for the final pick."""
    orders = np.array([rng.permutation(n_cases) for _ in range(n_select)], dtype=np.int64)
    orders = orders.reshape(n_select, n_cases)
    picks = rng.random(n_select)
    return orders, picks


def eps_lexicase_survival(ctx: SurvivalContext) -> np.ndarray:
    """Epsilon-lexicase survival without replacement.

    Each slot starts from the members not yet chosen, derives per-case
    epsilon as the MAD of that starting pool, filters case by case in a
    random order, and picks uniformly from what remains.
    """
    if ctx.errors is None:
        raise UnsupportedMetricError("epsilon-lexicase survival needs per-case errors")
    errors = np.ascontiguousarray(ctx.errors, dtype=float)
    orders, picks = lexicase_draws(ctx.rng, ctx.capacity, errors.shape[1])
    return kernels.eps_lexicase(errors, ctx.capacity, orders, picks)


def similarity(a, b) -> float:
    """Squared Pearson correlation; identical constant outputs count as 1."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    da, db = a - a.mean(), b - b.mean()
    saa, sbb = da @ da, db @ db
    if saa == 0 or sbb == 0:
        return 1.0 if np.array_equal(a, b) else 0.0
    r2 = (da @ db) ** 2 / (saa * sbb)
    return float(min(r2, 1.0))


def crowding_survival(parent_fitness, offspring, offspring_fitness, parent_outputs,
                      offspring_outputs, capacity, rng) -> np.ndarray:
    """Generational deterministic crowding.

    Slots ``0..len(parents)-1`` start with the parents; vacant slots up to
    ``capacity`` are filled with uniformly drawn offspring. Every other
    offspring, in random order, challenges the slot of its most similar
    parent and takes it only with strictly greater fitness. Returns pool
    indices (offspring ``i`` is pool index ``len(parents) + i``).
    """
    n_par = len(parent_fitness)
    n_off = len(offspring)
    if n_par + n_off < capacity:
        raise ValueError("pool smaller than capacity")
    slots = list(range(min(n_par, capacity)))
    slot_fit = [float(parent_fitness[i]) for i in slots]
    order = rng.permutation(n_off)
    vacancies = capacity - len(slots)
    fillers, contenders = order[:vacancies], order[vacancies:]
    for o in fillers:
        slots.append(n_par + int(o))
        slot_fit.append(float(offspring_fitness[o]))
    for o in contenders:
        child = offspring[o]
        ids = [p for p in child.parent_ids if p < len(slots)]
        if not ids:
            continue
        if len(ids) == 1:
            target = ids[0]
        else:
            sims = [similarity(offspring_outputs[o], parent_outputs[p]) for p in ids]
            target = ids[int(np.argmax(sims))]
        if offspring_fitness[o] > slot_fit[target]:
            slots[target] = n_par + int(o)
            slot_fit[target] = float(offspring_fitness[o])
    return np.array(slots, dtype=np.int64)
