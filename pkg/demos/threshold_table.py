"""Benign-landscape thresholds alpha_g(p, d) over a small grid.

Prints the table of alpha_g together with the two weaker bounds: the tau = 1
value (p + d - 2) / (2d) and the relaxed alpha_m. Cells with p <= d are
marked x, cells where no condition number qualifies are marked <1.
"""

import time

from sync_landscape import alpha_g, alpha_g_tau, alpha_m

P_MAX, D_MAX = 11, 5

start = time.perf_counter()
print("d \\ p " + "".join(f"{p:>8d}" for p in range(2, P_MAX + 1)))
for d in range(1, D_MAX + 1):
    cells = []
    for p in range(2, P_MAX + 1):
        if p <= d:
            cells.append("x")
            continue
        res = alpha_g(p, d)
        cells.append("<1" if not res.feasible else (f"{res.alpha:.0f}" if d == 1 else f"{res.alpha:.4f}"))
    print(f"{d:<6d}" + "".join(f"{c:>8s}" for c in cells))
print(f"({time.perf_counter() - start:.2f}s)\n")

# the optimal tau moves away from 1 as p grows, which is where the gain comes from
d = 3
print(f"d = {d}:   p   alpha_g   tau*    alpha_m   tau=1")
for p in range(d + 2, d + 10):
    g = alpha_g(p, d)
    print(f"        {p:3d}   {g.alpha:.4f}  {g.tau_star:.3f}   {alpha_m(p, d).alpha:.4f}   "
          f"{alpha_g_tau(p, d, 1.0).alpha:.4f}")
