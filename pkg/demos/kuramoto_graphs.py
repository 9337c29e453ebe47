"""Kuramoto oscillators on a graph: when is synchrony the only stable state?

With d = 1 and p = 2 the certificate is the graph Laplacian, and the landscape
is benign once lambda_max / lambda_2 < 2.
"""

import numpy as np

from sync_landscape import (
    StiefelTuple,
    build_certificate,
    gen_kuramoto_graph,
    landscape_verdict,
    random_stiefel,
    recovery_error,
    second_order_check,
    solve,
)
from sync_landscape.instances import complete_graph, cycle_graph, from_adjacency, star_graph

graphs = {
    "complete K_12": complete_graph(12),
    "cycle C_6": cycle_graph(6),
    "cycle C_12": cycle_graph(12),
    "star S_8": star_graph(8),
}
for name, adj in graphs.items():
    inst = from_adjacency(adj)
    v = landscape_verdict(build_certificate(inst.A, inst.Z), 2)
    print(f"{name:14s} cond {v.cond:7.3f}  benign {v.benign}")

# the 12-cycle has twisted equilibria: phases 2 pi k / 12 are stationary and stable
theta = 2 * np.pi * np.arange(12) / 12
twist = np.stack([np.cos(theta), np.sin(theta)], axis=1)[:, None, :]
inst = from_adjacency(cycle_graph(12))
res = solve(inst.A, StiefelTuple(twist))
laplacian = build_certificate(inst.A, inst.Z)
crit = second_order_check(laplacian, StiefelTuple(twist))
print(f"\nC_12 from the one-twist state: {res.iters} iterations, recovery error {recovery_error(res.S_final, inst.Z):.2f}, "
      f"second order {crit.is_second_order} (min curvature {crit.hess_min_eig:.3f})")

print("\ndense random graphs, n = 40:")
for p_edge in (0.5, 0.7, 0.9):
    conds, errs = [], []
    for seed in range(5):
        inst = gen_kuramoto_graph(40, p_edge, seed=seed)
        conds.append(landscape_verdict(build_certificate(inst.A, inst.Z), 2).cond)
        errs.append(recovery_error(solve(inst.A, random_stiefel(40, 1, 2, 100 + seed)).S_final, inst.Z))
    print(f"   p_edge {p_edge}: cond in [{min(conds):.2f}, {max(conds):.2f}], worst recovery error {max(errs):.1e}")
