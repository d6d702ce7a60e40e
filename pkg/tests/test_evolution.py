import itertools
from collections import Counter

import numpy as np
import pytest

from few.evolution import (Offspring, SurvivalContext, crowding_survival, eps_lexicase_survival,
                           make_offspring, mad, point_mutation, random_survival, similarity,
                           subtree_crossover, tournament_survival)
from few.expr import BOOL, FLOAT, OPERATORS, parse_tree, random_tree, slot_types
from few.fitness import UnsupportedMetricError
from oracles import brute_eps_lexicase


def rng(seed=0):
    return np.random.default_rng(seed)


# ------------------------------------------------------------------ mad

@pytest.mark.parametrize("values,expected", [
    ((1, 1, 1), 0.0),
    ((0, 1, 1), 0.0),
    ((1, 2, 4, 7), 1.5),
])
def test_mad_examples(values, expected):
    assert mad(values) == expected


# ------------------------------------------------------------ crossover

def test_self_crossover_at_root_is_identity():
    t = parse_tree("(add x0 (mul x1 0.5))", 2)
    # with p1 == p2 every graft is one of t's own subtrees; the root swap returns t
    seen = set()
    r = rng(1)
    for _ in range(200):
        seen.add(subtree_crossover(t, t, r, 3))
    assert t in seen


def test_crossover_depth_bound_and_typing():
    r = rng(2)
    for otype in (FLOAT, BOOL):
        for _ in range(5000):
            p1 = random_tree(3, otype, 5, r)
            p2 = random_tree(3, otype, 5, r)
            child = subtree_crossover(p1, p2, r, 3)
            assert child.depth <= 3
            assert child.output_type == p1.output_type
            for node, slot in zip(child.nodes, slot_types(child)):
                if node.kind == "op":
                    assert OPERATORS[node.value].out_type == slot
                elif node.kind == "const":
                    assert slot == FLOAT
            assert Counter(child.nodes) - (Counter(p1.nodes) + Counter(p2.nodes)) == Counter()


# ------------------------------------------------------------- mutation

def test_mutation_rate_zero_is_copy():
    r = rng(3)
    for _ in range(100):
        t = random_tree(3, FLOAT, 4, r)
        assert point_mutation(t, 0.0, r, 4) == t


def test_mutation_rate_one_single_leaf():
    r = rng(4)
    t = parse_tree("x1", 3)
    for _ in range(100):
        m = point_mutation(t, 1.0, r, 3)
        assert m.size == 1 and m.nodes[0].kind in ("var", "const") and m != t


def test_mutation_preserves_shape_and_types():
    r = rng(5)
    for otype in (FLOAT, BOOL):
        for _ in range(2000):
            t = random_tree(3, otype, 4, r)
            m = point_mutation(t, 0.5, r, 4)
            assert m.depth == t.depth and m.size == t.size and m.output_type == t.output_type
            for a, b in zip(t.nodes, m.nodes):
                if a.kind == "op":
                    assert b.kind == "op"
                    ka, kb = OPERATORS[a.value], OPERATORS[b.value]
                    assert (ka.arity, ka.in_type, ka.out_type) == (kb.arity, kb.in_type, kb.out_type)


def test_mutation_changed_node_count_matches_rate():
    r = rng(6)
    t = parse_tree("(add (mul x0 x1) (sub x2 0.5))", 4)
    rate = 0.3
    changed = sum(sum(a != b for a, b in zip(t.nodes, point_mutation(t, rate, r, 4).nodes))
                  for _ in range(10_000))
    expected = rate * t.size * 10_000
    assert abs(changed - expected) <= 0.05 * expected


# ------------------------------------------------------------ offspring

def test_offspring_counts_and_origins():
    r = rng(7)
    parents = [random_tree(3, FLOAT, 3, r) for _ in range(5)]
    out = make_offspring(parents, 100, 0.5, 0.1, r, 3, 3)
    assert len(out) == 100
    for o in out:
        assert len(o.parent_ids) == (2 if o.origin == "crossover" else 1)
    assert all(o.origin == "mutation" for o in make_offspring(parents, 50, 0.0, 0.1, r, 3, 3))
    single = make_offspring(parents[:1], 20, 1.0, 0.1, r, 3, 3)
    assert all(o.parent_ids == (0, 0) for o in single)


def test_offspring_empty_parents_rejected():
    with pytest.raises(ValueError):
        make_offspring([], 3, 0.5, 0.1, rng(), 3, 2)


# ----------------------------------------------------------- tournament

def test_tournament_two_member_mix():
    # pairings (a,a) (a,b) (b,a) (b,b): the fitter member wins 3 of 4
    r = rng(8)
    wins = [tournament_survival(SurvivalContext(2, np.array([0.9, 0.1]), rng=r))
            for _ in range(10_000)]
    assert np.mean(np.concatenate(wins) == 0) == pytest.approx(0.75, abs=0.01)


class RecordingRng:
    def __init__(self, seed):
        self.inner = rng(seed)
        self.pairs = []

    def integers(self, *a, **k):
        out = self.inner.integers(*a, **k)
        self.pairs.append(tuple(int(v) for v in out))
        return out

    def random(self):
        return self.inner.random()


def test_tournament_entrant_with_max_fitness_wins():
    fit = np.array([0.1, 0.5, 0.95])
    for seed in range(200):
        rec = RecordingRng(seed)
        survivors = tournament_survival(SurvivalContext(3, fit, rng=rec))
        for (a, b), s in zip(rec.pairs, survivors):
            if 2 in (a, b):
                assert s == 2
            else:
                assert s == max(a, b)


# ------------------------------------------------------------ random

def test_random_survival_full_pool_and_distinct():
    ctx = SurvivalContext(5, np.zeros(5), rng=rng(11))
    assert sorted(random_survival(ctx)) == [0, 1, 2, 3, 4]
    ctx = SurvivalContext(4, np.zeros(9), rng=rng(12))
    s = random_survival(ctx)
    assert len(set(s)) == 4


def test_random_survival_frequency():
    r = rng(13)
    trials, P, m = 4000, 3, 8
    counts = np.zeros(m)
    for _ in range(trials):
        counts[random_survival(SurvivalContext(P, np.zeros(m), rng=r))] += 1
    p = P / m
    sigma = np.sqrt(trials * p * (1 - p))
    assert np.all(np.abs(counts - trials * p) <= 3 * sigma)


# ------------------------------------------------------- eps-lexicase

def test_lexicase_requires_case_errors():
    with pytest.raises(UnsupportedMetricError):
        eps_lexicase_survival(SurvivalContext(1, np.zeros(2), None, rng()))


def test_lexicase_hand_example_first_survivor():
    errors = np.array([[0, 0], [1, 1], [1, 0]], dtype=float)
    for seed in range(50):
        s = eps_lexicase_survival(SurvivalContext(1, np.zeros(3), errors, rng(seed)))
        assert s.tolist() == [0]


def test_lexicase_last_slot_takes_remaining_member():
    errors = np.array([[0, 0], [5, 5]], dtype=float)
    s = eps_lexicase_survival(SurvivalContext(2, np.zeros(2), errors, rng(14)))
    assert s.tolist() == [0, 1]


def test_lexicase_survivors_distinct_and_deterministic():
    r = rng(15)
    errors = r.random((12, 9))
    a = eps_lexicase_survival(SurvivalContext(7, np.zeros(12), errors, rng(99)))
    b = eps_lexicase_survival(SurvivalContext(7, np.zeros(12), errors, rng(99)))
    assert a.tolist() == b.tolist()
    assert len(set(a.tolist())) == 7


@pytest.mark.parametrize("seed", range(100))
def test_lexicase_matches_brute_force(seed):
    r = rng(1000 + seed)
    m, n = int(r.integers(1, 9)), int(r.integers(1, 7))
    P = int(r.integers(1, min(4, m) + 1))
    errors = r.integers(0, 5, size=(m, n)) / 4.0
    got = eps_lexicase_survival(SurvivalContext(P, np.zeros(m), errors, rng(seed)))
    assert got.tolist() == brute_eps_lexicase(errors, P, rng(seed))


def test_lexicase_dominant_member_survives_first():
    r = rng(16)
    for _ in range(500):
        m, n = int(r.integers(2, 9)), int(r.integers(1, 7))
        errors = r.random((m, n)) + 1.0
        star = int(r.integers(m))
        # make star better than everyone by more than any MAD on every case
        errors[star] = 0.0
        errors[np.arange(m) != star] += 10.0
        s = eps_lexicase_survival(SurvivalContext(1, np.zeros(m), errors, r))
        assert s[0] == star


# ------------------------------------------------------------ crowding

def off(tree_id, parents, origin=None):
    return Offspring(parse_tree(f"x{tree_id}", 10), tuple(parents),
                     origin or ("crossover" if len(parents) == 2 else "mutation"))


def test_similarity_self_is_one():
    x = np.array([0.0, 1.0, 3.0, 2.0])
    assert similarity(x, x) == pytest.approx(1.0)
    assert similarity(x, 2 * x + 1) == pytest.approx(1.0)


def test_crowding_child_goes_to_identical_parent():
    parent_out = np.array([[0, 1, 2, 3], [3, 1, 0, 2]], dtype=float)
    child_out = parent_out[1:2].copy()
    chosen = crowding_survival([0.1, 0.1], [off(5, (0, 1))], [0.5], parent_out, child_out, 2, rng())
    assert chosen.tolist() == [0, 2]


def test_crowding_equal_fitness_keeps_occupant():
    parent_out = np.array([[0, 1, 2, 3]], dtype=float)
    chosen = crowding_survival([0.4], [off(5, (0,))], [0.4], parent_out, parent_out, 1, rng())
    assert chosen.tolist() == [0]


def test_crowding_worse_children_leave_parents():
    r = rng(17)
    parent_out = r.random((4, 6))
    child_out = r.random((6, 6))
    children = [off(i, tuple(r.integers(4, size=int(r.integers(1, 3))))) for i in range(6)]
    chosen = crowding_survival([0.9] * 4, children, [0.1] * 6, parent_out, child_out, 4, r)
    assert chosen.tolist() == [0, 1, 2, 3]


def test_crowding_fills_vacancies_and_never_lowers_slot_fitness():
    r = rng(18)
    for _ in range(200):
        n_par, cap = int(r.integers(1, 5)), 5
        parent_fit = r.random(n_par)
        children = []
        for i in range(cap):
            k = int(r.integers(1, 3))
            children.append(off(i, tuple(int(v) for v in r.integers(n_par, size=k))))
        child_fit = r.random(cap)
        chosen = crowding_survival(parent_fit, children, child_fit, r.random((n_par, 5)),
                                   r.random((cap, 5)), cap, r)
        assert len(chosen) == cap and len(set(chosen.tolist())) == cap
        pool_fit = np.concatenate([parent_fit, child_fit])
        for slot in range(n_par):
            assert pool_fit[chosen[slot]] >= parent_fit[slot]


@pytest.mark.parametrize("method", ["tournament", "random", "eps_lexicase"])
def test_survival_cardinality(method):
    funcs = {"tournament": tournament_survival, "random": random_survival,
             "eps_lexicase": eps_lexicase_survival}
    r = rng(19)
    for m, P in itertools.product([3, 7, 12], [1, 3]):
        ctx = SurvivalContext(P, r.random(m), r.random((m, 4)), r)
        assert len(funcs[method](ctx)) == P
