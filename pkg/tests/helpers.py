"""Shared test fixtures: reference oracles and small deterministic generators."""

import numpy as np
import scipy.sparse as sp

from treedesign.graphs import UndirectedGraph, generate_erdos_renyi
from treedesign.mcf import Commodity, Instance
from treedesign.qp import QuadraticProgram


def k3():
    return UndirectedGraph(3, [(0, 1), (1, 2), (0, 2)])


def k3_instance(costs=(1.0, 2.0, 3.0), commodity=(0, 2), hop=2):
    """K3 with costs assigned per edge tuple: (0,1), (1,2), (0,2)."""
    g = k3()
    by_edge = {(0, 1): costs[0], (1, 2): costs[1], (0, 2): costs[2]}
    ordered = [by_edge[e] for e in g.edges]
    return Instance(g, ordered, [Commodity(*commodity)], hop)


def edge_weights(g, mapping):
    """Weight vector from an {edge tuple: value} mapping."""
    return np.array([mapping[e] for e in g.edges], dtype=float)


def random_connected_graph(rng, n_low=3, n_high=8, p=0.6):
    n = int(rng.integers(n_low, n_high))
    return generate_erdos_renyi(n, p, int(rng.integers(10**6)))


def random_feasible_qp(rng, dim_high=41):
    """Feasible diagonal QP plus its strictly interior certificate point.

    Diagonal entries are at least 1 so the reference step size below is a
    valid (conservative) dual step.
    """
    n = int(rng.integers(5, dim_high))
    d = rng.uniform(1.0, 5.0, n)
    q = rng.normal(0.0, 1.0, n)
    v0 = rng.uniform(0.2, 0.8, n)
    m_eq = int(rng.integers(1, min(8, n)))
    m_in = int(rng.integers(1, 15))
    a_eq = rng.normal(0.0, 1.0, (m_eq, n))
    a_in = rng.normal(0.0, 1.0, (m_in, n))
    qp = QuadraticProgram(
        d=d,
        q=q,
        a_eq=sp.csr_matrix(a_eq),
        b_eq=a_eq @ v0,
        a_in=sp.csr_matrix(a_in),
        b_in=a_in @ v0 + rng.uniform(0.05, 0.5, m_in),
        lo=np.zeros(n),
        hi=np.ones(n),
    )
    return qp, v0


def projected_gradient_qp(qp, steps=10**6, stop_change=1e-15):
    """Long-run projected-gradient reference for diagonal QPs.

    Ascends the dual of the box-constrained Lagrangian: for fixed
    multipliers the inner minimizer is a componentwise clamp, the multiplier
    step is 1/(max d + ||A||^2), and inequality multipliers are projected
    onto the nonnegative orthant. Independent of the operator-splitting
    solver under test.
    """
    d, q = qp.d, qp.q
    a_eq = qp.a_eq.toarray()
    a_in = qp.a_in.toarray()
    b_eq, b_in = qp.b_eq, qp.b_in
    stacked = np.vstack([a_eq, a_in]) if (a_eq.size or a_in.size) \
        else np.zeros((0, qp.n))
    norm = np.linalg.norm(stacked, 2) if stacked.size else 0.0
    step = 1.0 / (float(d.max()) + norm**2)
    lam_eq = np.zeros(len(b_eq))
    lam_in = np.zeros(len(b_in))

    def primal(le, li):
        return np.clip(-(q + a_eq.T @ le + a_in.T @ li) / d, qp.lo, qp.hi)

    for _ in range(steps):
        v = primal(lam_eq, lam_in)
        le_new = lam_eq + step * (a_eq @ v - b_eq)
        li_new = np.maximum(0.0, lam_in + step * (a_in @ v - b_in))
        moved = 0.0
        if len(le_new):
            moved = max(moved, float(np.max(np.abs(le_new - lam_eq))))
        if len(li_new):
            moved = max(moved, float(np.max(np.abs(li_new - lam_in))))
        lam_eq, lam_in = le_new, li_new
        if moved < stop_change:
            break
    return primal(lam_eq, lam_in)
