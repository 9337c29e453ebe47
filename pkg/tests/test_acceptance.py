"""End-to-end acceptance checks, one pass/fail line per criterion.

Each test prints ``[PASS] ACn ...`` or ``[FAIL] ACn ...`` and the lines are
repeated in the terminal summary. Criterion 10 is split into the certified
cells (10a) and the exploratory ``p = d`` cells (10b).
"""

import math
import time

import numpy as np

from conftest import ACCEPTANCE_LINES, random_tangent, random_tuple
from sync_landscape.blockmat import BlockSymMatrix, identity_stack, partial_trace
from sync_landscape.certificate import build_certificate, landscape_verdict, verify_certificate
from sync_landscape.criticality import (
    dual_certificate_check,
    g_eval,
    hessian_quadratic_form,
    key_psd_check,
    per_s_bound,
    riemannian_gradient,
    second_order_check,
    tangent_project,
)
from sync_landscape.instances import critical_twist, gen_od_gaussian, twisted_certificate, twisted_state
from sync_landscape.operators import monte_carlo_cov, operator_spectrum, p_cov_exact, sigma_tau
from sync_landscape.solver import estimate_minimizer, random_stiefel, recovery_error, retract, solve
from sync_landscape.thresholds import (
    alpha_g,
    alpha_g_tau,
    alpha_m,
    g_exact,
    g_grid_sup,
    q_tau,
    r_tau,
    tau_star_m,
)

# printed four-decimal values, keyed by (d, p); "<1" cells are not finite and are left out
PRINTED_TABLE = {
    1: {p: float(p) for p in range(2, 12)},
    2: dict(zip(range(3, 12), [1.1141, 1.4831, 1.8465, 2.2071, 2.5736, 2.9438, 3.3216, 3.7051, 4.0925])),
    3: dict(zip(range(4, 12), [1.0103, 1.2309, 1.4721, 1.6946, 1.9218, 2.1605, 2.4087, 2.6632])),
    4: dict(zip(range(6, 12), [1.1447, 1.3177, 1.4778, 1.6414, 1.8161, 2.0000])),
    5: dict(zip(range(7, 12), [1.1025, 1.2355, 1.3600, 1.4869, 1.6227])),
}
BELOW_ONE = [(4, 5), (5, 6)]

INSTANCE_SEED = 7
INIT_SEEDS = range(1000, 1010)  # disjoint from instance seeds so no start reproduces the ground truth


def record(tag, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {tag} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_ac1_table():
    start = time.perf_counter()
    worst, count, bad = 0.0, 0, []
    for d, row in PRINTED_TABLE.items():
        for p, printed in row.items():
            got = alpha_g(p, d).alpha
            err = abs(got - printed)
            worst = max(worst, err)
            count += 1
            if err > 5e-4:
                bad.append((d, p, got, printed))
    below = all(not alpha_g(p, d).feasible for d, p in BELOW_ONE)
    elapsed = time.perf_counter() - start
    ok = count == 38 and not bad and below and elapsed < 10
    record("AC1", ok, f"table: {count} cells, max |err| {worst:.1e}, '<1' cells ok={below}, {elapsed:.2f}s, off={bad}")


def test_ac2_d1_exact():
    values = [alpha_g(p, 1).alpha for p in range(2, 12)]
    ok = all(v == p for v, p in zip(values, range(2, 12)))
    record("AC2", ok, f"alpha_g(p,1) == p for p=2..11: {values}")


def test_ac3_anchors():
    closed = all(
        alpha_g_tau(p, d, 1.0).alpha == (p + d - 2) / (2 * d) for d in range(1, 7) for p in range(d + 1, d + 16)
    )
    tau_one = all(tau_star_m(d + 2, d) == 1.0 for d in range(2, 7))
    monotone, dominance, worst = True, True, math.inf
    for d in range(2, 6):
        ms = [alpha_m(p, d).alpha for p in range(d + 3, d + 16)]
        monotone &= all(b > a for a, b in zip(ms, ms[1:]))
        for p, am in zip(range(d + 3, d + 16), ms):
            ag, a1 = alpha_g(p, d).alpha, (p + d - 2) / (2 * d)
            dominance &= ag >= am - 1e-9 and am >= a1 - 1e-9
            worst = min(worst, ag - am)
    ok = closed and tau_one and monotone and dominance
    record("AC3", ok, f"closed form={closed}, tau*(d+2,d)=1: {tau_one}, alpha_m monotone={monotone}, "
                      f"dominance={dominance} (min alpha_g-alpha_m {worst:.2e})")


def test_ac4_grid_oracle():
    rng = np.random.default_rng(404)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        d = int(rng.integers(1, 5))
        p = int(rng.integers(d + 1, 11))
        x = float(1 - rng.random())
        tau = float(rng.random())
        worst = max(worst, abs(g_exact(p, d, x, tau) - g_grid_sup(p, d, x, tau)))
    elapsed = time.perf_counter() - start
    record("AC4", worst <= 2e-2 and elapsed < 60, f"exact vs grid sup over 200 draws: max |diff| {worst:.1e}, {elapsed:.1f}s")


def test_ac5_spectrum():
    rng = np.random.default_rng(505)
    bad = []
    for d, p in [(1, 3), (2, 4), (3, 5)]:
        s = np.linalg.qr(rng.standard_normal((p, d)))[0].T
        for tau in (0.0, 0.25, 0.5, 1.0):
            expected = {}
            for val, mult in ((1.0, d * (d + 1) // 2), (1 - 2 * tau, d * (d - 1) // 2), (0.0, d * (p - d))):
                if mult:
                    expected[round(val, 12)] = expected.get(round(val, 12), 0) + mult
            got = {round(v, 8) + 0.0: k for v, k in operator_spectrum(s, tau)}
            if got != {round(k, 8) + 0.0: v for k, v in expected.items()}:
                bad.append((d, p, tau, got))
    record("AC5", not bad, f"multiplicities match on 12 (d,p,tau) cases; mismatches={bad}")


def test_ac6_covariance():
    n, d, p = 5, 2, 4
    S = random_stiefel(n, d, p, seed=606)
    diag_err, trace_err = 0.0, 0.0
    for tau in np.linspace(0, 1, 11):
        sig = sigma_tau(S, tau)
        val = q_tau(d, tau) + d * tau * tau
        diag_err = max(diag_err, max(np.abs(sig.block(i, i) - val * np.eye(d)).max() for i in range(n)))
        ones = identity_stack(n, d)
        lhs = np.sum(sig.data * (ones @ ones.T))
        rhs = q_tau(d, tau) * np.sum(S.gram() ** 2) + tau ** 2 * np.sum(partial_trace(S.gram(), n, d) ** 2)
        trace_err = max(trace_err, abs(np.trace(sig.data) - n * d * val), abs(lhs - rhs))
    tau = 0.3
    rel = {}
    for which, exact in (("L-cov", sigma_tau(S, tau)), ("P-cov", p_cov_exact(S, tau))):
        emp = monte_carlo_cov(S, tau, which, trials=100_000, seed=2024)
        rel[which] = float(np.linalg.norm(emp.data - exact.data) / np.linalg.norm(exact.data))
    ok = diag_err <= 1e-10 and trace_err <= 1e-10 and max(rel.values()) <= 5e-2
    record("AC6", ok, f"diag err {diag_err:.1e}, trace identities err {trace_err:.1e}, "
                      f"Monte Carlo rel err L={rel['L-cov']:.4f} P={rel['P-cov']:.4f}")


def test_ac7_key_psd():
    rng = np.random.default_rng(707)
    worst = math.inf
    for _ in range(500):
        n, d = int(rng.integers(1, 9)), int(rng.integers(1, 4))
        p = int(rng.integers(d, 7))
        S = random_tuple(rng, n, d, p, spread=float(rng.random() * 2))
        y = rng.standard_normal((d, p))
        tau = float(rng.choice([0.0, 0.3, 0.5, 1.0, rng.random()]))
        worst = min(worst, key_psd_check(S, y / np.linalg.norm(y), tau))
    record("AC7", worst >= -1e-9, f"min eigenvalue over 500 draws {worst:.2e}")


def test_ac8_twisted():
    rng = np.random.default_rng(808)
    details, ok = [], True
    for p, d in [(2, 1), (3, 1), (3, 2), (4, 2), (4, 3)]:
        S = twisted_state(p, d)
        t_star = critical_twist(p, d)
        L = twisted_certificate(p, d, t_star)
        rep = second_order_check(L, S)
        cond = verify_certificate(L).cond
        below = twisted_certificate(p, d, 0.9 * t_star)
        most_negative = min(
            hessian_quadratic_form(below, S, T, T)
            for T in (tangent_project(S, np.broadcast_to(rng.standard_normal((d, p)), S.blocks.shape)) for _ in range(50))
        )
        cell_ok = (
            rep.grad_residual <= 1e-10
            and rep.is_second_order
            and rep.hess_min_eig >= -1e-8
            and abs(cond - 2 * p / (d + 1)) <= 1e-10
            and most_negative < -1e-8
        )
        ok &= cell_ok
        details.append(f"({p},{d}) grad {rep.grad_residual:.0e} hess {rep.hess_min_eig:.0e} "
                       f"cond {cond:.6f} below {most_negative:.2f}")
    record("AC8", ok, "twisted states: " + "; ".join(details))


def test_ac9_dual_feasibility():
    n, d, p = 6, 2, 5
    rng = np.random.default_rng(909)
    feasible, unbounded, worst_chain = 0, 0, math.inf
    taus = np.linspace(0, 1, 21)
    alphas = [alpha_g_tau(p, d, t) for t in taus]
    for _ in range(100):
        S = random_tuple(rng, n, d, p, spread=float(0.3 + 1.5 * rng.random()))
        tau = float(rng.random())
        bound = per_s_bound(S, tau)
        if not math.isfinite(bound):
            # every alpha is admissible for this S; test a large one
            unbounded += 1
            bound = 1e3
        rep = dual_certificate_check(S, tau, 0.95 * bound)
        feasible += rep.feasible and rep.x_perp_min_eig >= -1e-8 and rep.x_perp_trace <= 1 + 1e-8
        for t, res in zip(taus, alphas):
            if res.feasible:
                a = res.alpha - 1e-6
                worst_chain = min(worst_chain, r_tau(p, d, t) / a - g_eval(S, 1 - 1 / a, t))
    ok = feasible == 100 and worst_chain >= 0
    record("AC9", ok, f"feasible {feasible}/100 at 0.95x per-S bound ({unbounded} unbounded), "
                      f"min chain slack {worst_chain:.2e}")


def _landscape_cells():
    out = []
    for d, sigmas in ((1, (0.0, 0.5, 1.0)), (2, (0.0, 0.1, 0.2, 0.5))):
        p = d + 2
        for sigma in sigmas:
            inst = gen_od_gaussian(30, d, sigma, INSTANCE_SEED)
            Z = inst.Z if sigma == 0 else estimate_minimizer(inst.A, seed=INSTANCE_SEED)
            L = build_certificate(inst.A, Z)
            rep = verify_certificate(L)
            benign = rep.kkt_ok and rep.unique_ok and landscape_verdict(L, p).benign
            out.append((d, p, sigma, inst, Z, rep.cond, benign))
    return out


def test_ac10a_certified_cells_recover():
    cells = _landscape_cells()
    benign_cells = [c for c in cells if c[6]]
    summary, ok = [], True
    for d, p, sigma, inst, Z, cond, _ in benign_cells:
        errs = [recovery_error(solve(inst.A, random_stiefel(30, d, p, s)).S_final, Z) for s in INIT_SEEDS]
        wins = sum(e <= 1e-4 for e in errs)
        ok &= wins == len(INIT_SEEDS)
        summary.append(f"d={d} p={p} sigma={sigma} cond={cond:.2f}: {wins}/10")
    skipped = [f"d={c[0]} sigma={c[2]} cond={c[5]:.2f}" for c in cells if not c[6]]
    ok &= {c[0] for c in benign_cells} == {1, 2}
    record("AC10a", ok, "certified cells: " + "; ".join(summary) + f" | not certified (excluded): {skipped}")


def test_ac10b_exploratory_square_blocks():
    # Exploratory: at p = d the blocks live on O(d), whose two components are never
    # crossed by a continuous path, so the sign pattern of det(S_i) at the start is kept.
    summary, ok = [], True
    for d in (1, 2, 3):
        inst = gen_od_gaussian(30, d, 0.0, INSTANCE_SEED)
        errs = [recovery_error(solve(inst.A, random_stiefel(30, d, d, s)).S_final, inst.Z) for s in INIT_SEEDS]
        wins = sum(e <= 1e-4 for e in errs)
        ok &= wins >= 9
        summary.append(f"d={d}: {wins}/10")
    record("AC10b", ok, "noiseless p=d cells: " + "; ".join(summary))


def test_ac11_gradient_fd():
    rng = np.random.default_rng(1111)
    eps, worst = 1e-5, 0.0
    for _ in range(200):
        n, d = int(rng.integers(2, 6)), int(rng.integers(1, 4))
        p = d + int(rng.integers(1, 3))
        m = rng.standard_normal((n * d, n * d))
        A = BlockSymMatrix(n, d, m + m.T)
        S = random_tuple(rng, n, d, p)
        T = random_tangent(rng, S)
        T /= np.linalg.norm(T)

        def f(blocks):
            s = blocks.reshape(n * d, p)
            return -0.5 * float(np.sum(s * (A.data @ s)))

        fd = (f(retract(S.blocks, eps * T)) - f(retract(S.blocks, -eps * T))) / (2 * eps)
        worst = max(worst, abs(fd + np.sum(riemannian_gradient(A, S).blocks * T)))
    record("AC11", worst <= 1e-6, f"max |finite difference - gradient pairing| over 200 triples {worst:.1e}")
