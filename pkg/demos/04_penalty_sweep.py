"""Penalty-parameter sweep: solution quality versus rho.

Small penalties favor objective quality, large penalties favor feasibility
enforcement and degrade the final tree. This script sweeps rho over several
seeds and prints the optimality gaps against the exhaustive oracle, the
trade-off the solver tables are built around.
"""

import statistics

from treedesign import (
    EnumerationBudget,
    SolverConfig,
    compute_gap,
    exact_solve,
    random_instance,
    solve_central,
)

SEEDS = range(6)
RHOS = (0.1, 1.0, 10.0)
budget = EnumerationBudget(max_edges=34, max_trees=30_000_000)

instances = {s: random_instance(9, 0.5, seed=s) for s in SEEDS}
optima = {s: exact_solve(instances[s], budget) for s in SEEDS}

print("rho     feasible   gaps (%)                         median")
for rho in RHOS:
    gaps = []
    feasible = 0
    for s in SEEDS:
        rep = solve_central(instances[s],
                            SolverConfig(rho=rho, tol=1e-4, max_iters=500))
        if rep.feasible and optima[s].feasible:
            feasible += 1
            gaps.append(compute_gap(rep.objective, optima[s].objective))
    line = " ".join(f"{g:6.2f}" for g in gaps)
    print(f"{rho:<7g} {feasible}/{len(list(SEEDS))}        {line:<32} "
          f"{statistics.median(gaps):6.2f}")

print("\nsame experiment via the command line:")
print("  treedesign sweep --n 9 --seeds 6 --rhos 0.1,1,10 "
      "--modes central --oracle-max-edges 34 --oracle-max-trees 30000000 "
      "--out sweep_out")
