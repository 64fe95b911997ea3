import numpy as np
import pytest

from treedesign.graphs import DirectedArcSet, UndirectedGraph, generate_erdos_renyi
from treedesign.mcf import check_feasible, objective, route_on_tree
from treedesign.oracle import (
    BudgetExceededError,
    EnumerationBudget,
    enumerate_arborescences,
    enumerate_spanning_trees,
    exact_project,
    exact_solve,
    spanning_tree_count_kirchhoff,
)

from helpers import k3, k3_instance


def test_tree_counts_small_graphs():
    assert len(list(enumerate_spanning_trees(k3()))) == 3
    k4 = generate_erdos_renyi(4, 1.0, seed=0)
    assert len(list(enumerate_spanning_trees(k4))) == 16  # Cayley 4^2
    p4 = UndirectedGraph(4, [(0, 1), (1, 2), (2, 3)])
    assert len(list(enumerate_spanning_trees(p4))) == 1


def test_counts_match_kirchhoff():
    rng = np.random.default_rng(31)
    for _ in range(20):
        g = generate_erdos_renyi(int(rng.integers(3, 9)), 0.6,
                                 int(rng.integers(10**6)))
        assert len(list(enumerate_spanning_trees(g))) == \
            spanning_tree_count_kirchhoff(g)


def test_trees_unique_and_valid():
    g = generate_erdos_renyi(6, 0.7, seed=8)
    seen = set()
    from treedesign.graphs import is_spanning_tree
    for t in enumerate_spanning_trees(g):
        assert is_spanning_tree(g, t)
        assert t.selected not in seen
        seen.add(t.selected)


def test_budget_is_loud():
    g = generate_erdos_renyi(6, 1.0, seed=1)  # m = 15
    with pytest.raises(BudgetExceededError):
        list(enumerate_spanning_trees(g, EnumerationBudget(max_edges=10)))
    with pytest.raises(BudgetExceededError):
        list(enumerate_spanning_trees(g, EnumerationBudget(max_trees=10)))
    with pytest.raises(ValueError):
        EnumerationBudget(max_edges=0)


def test_arborescence_enumeration_cases():
    two = DirectedArcSet(2, [(0, 1), (1, 0)])
    assert len(list(enumerate_arborescences(two, 0))) == 1
    three = DirectedArcSet(3, [(0, 1), (0, 2), (2, 1), (1, 2)])
    assert len(list(enumerate_arborescences(three, 0))) == 3
    # isolated non-root node: no incoming arc choices at all
    isolated = DirectedArcSet(3, [(0, 1)])
    assert len(list(enumerate_arborescences(isolated, 0))) == 0


def test_exact_solve_k3():
    inst = k3_instance(costs=(1.0, 2.0, 3.0), commodity=(0, 2), hop=1)
    res = exact_solve(inst)
    assert res.feasible
    assert abs(res.objective - 4.0) < 1e-12
    assert {inst.graph.edges[e] for e in res.tree.selected} == {(0, 1), (0, 2)}

    inst2 = k3_instance(costs=(1.0, 2.0, 3.0), commodity=(0, 2), hop=2)
    res2 = exact_solve(inst2)
    assert abs(res2.objective - 3.0) < 1e-12
    assert {inst2.graph.edges[e] for e in res2.tree.selected} == {(0, 1), (1, 2)}


def test_exact_solve_infeasible():
    # path graph, commodity across 3 hops, bound 1: no tree can route it
    g = UndirectedGraph(4, [(0, 1), (1, 2), (2, 3)])
    from treedesign.mcf import Commodity, Instance
    inst = Instance(g, [1.0, 1.0, 1.0], [Commodity(0, 3)], 1)
    res = exact_solve(inst)
    assert not res.feasible
    assert res.objective is None


def test_exact_solve_optimum_is_lower_bound_and_pruning_safe():
    # the pruned scan must agree with a naive full scan
    rng = np.random.default_rng(13)
    for _ in range(10):
        from treedesign.mcf import random_instance
        inst = random_instance(6, 0.6, seed=int(rng.integers(10**6)))
        res = exact_solve(inst)
        best = None
        for t in enumerate_spanning_trees(inst.graph):
            routing = route_on_tree(inst, t)
            if routing.feasible:
                cost = objective(inst, t.vector)
                if best is None or cost < best - 1e-15:
                    best = cost
        if best is None:
            assert not res.feasible
        else:
            assert abs(res.objective - best) <= 1e-12
            routing = route_on_tree(inst, res.tree)
            assert check_feasible(inst, res.tree, routing.flows).feasible


def test_exact_project_identity():
    # minimum distance equals (n-1) + ||mu - w||^2 + 2 * min_z z'h
    rng = np.random.default_rng(2)
    for _ in range(25):
        g = generate_erdos_renyi(int(rng.integers(3, 8)), 0.6,
                                 int(rng.integers(10**6)))
        w = rng.uniform(0, 1, g.m)
        mu = rng.uniform(-1, 1, g.m)
        _, dist = exact_project(w, mu, g)
        h = mu - w
        zmin = min(float(h[list(t.selected)].sum())
                   for t in enumerate_spanning_trees(g))
        identity = (g.n - 1) + float(np.sum((mu - w) ** 2)) + 2 * zmin
        assert abs(dist - identity) <= 1e-12


def test_exact_project_trivials():
    g = k3()
    tree = np.zeros(3)
    tree[[0, 2]] = 1
    z, dist = exact_project(tree, np.zeros(3), g)
    assert dist <= 1e-15
    assert list(z.vector) == [1, 0, 1]
    # shifting both w and mu by the same vector leaves the argmin set fixed
    rng = np.random.default_rng(6)
    w = rng.uniform(0, 1, 3)
    mu = rng.uniform(-1, 1, 3)
    shift = rng.normal(size=3)
    z1, _ = exact_project(w, mu, g)
    z2, _ = exact_project(w + shift, mu + shift, g)
    assert z1 == z2
