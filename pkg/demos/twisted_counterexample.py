"""A spurious second-order critical point at condition number 2p / (d + 1).

Builds the twisted configuration (sign flips times cyclic shifts), its
certificate L(t), and checks criticality on both sides of the critical twist.
"""

import numpy as np

from sync_landscape import (
    BlockSymMatrix,
    critical_twist,
    second_order_check,
    twisted_certificate,
    twisted_state,
    verify_certificate,
)
from sync_landscape.criticality import hessian_quadratic_form, tangent_project
from sync_landscape.solver import SolveConfig, solve

rng = np.random.default_rng(0)

for p, d in [(2, 1), (3, 1), (3, 2), (4, 2), (4, 3)]:
    S = twisted_state(p, d)
    t_star = critical_twist(p, d)
    at = twisted_certificate(p, d, t_star)
    report = verify_certificate(at)
    crit = second_order_check(at, S)
    print(f"p={p} d={d} n={S.n:3d}  cond {report.cond:.4f} (2p/(d+1) = {2 * p / (d + 1):.4f})  "
          f"grad {crit.grad_residual:.0e}  min hess {crit.hess_min_eig:+.1e}  second order: {crit.is_second_order}")

    # a little less twist and the same-Y tangent directions go downhill
    below = twisted_certificate(p, d, 0.9 * t_star)
    worst = min(
        hessian_quadratic_form(below, S, T, T)
        for T in (tangent_project(S, np.broadcast_to(rng.standard_normal((d, p)), S.blocks.shape)) for _ in range(20))
    )
    print(f"          at 0.9 t*: second order {second_order_check(below, S).is_second_order}, "
          f"most negative sampled curvature {worst:.3f}")

# gradient descent started on the twisted state never leaves it
p, d = 3, 1
L = twisted_certificate(p, d, critical_twist(p, d))
res = solve(BlockSymMatrix(L.n, L.d, -L.data), twisted_state(p, d), SolveConfig(max_iter=100))
print(f"\nsolver from the twisted state: {res.iters} iterations, gradient {res.grad_residual:.1e}")
