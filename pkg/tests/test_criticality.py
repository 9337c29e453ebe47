import math

import numpy as np
import pytest

from conftest import random_tangent, random_tuple
from sync_landscape.blockmat import BlockSymMatrix, identity_stack, projector_perp
from sync_landscape.criticality import (
    AlignedError,
    DimensionCapError,
    dual_certificate_check,
    g_eval,
    hessian_matrix,
    hessian_quadratic_form,
    key_psd_check,
    per_s_bound,
    riemannian_gradient,
    second_order_check,
    tangent_basis,
    tangent_dim,
    tangent_project,
    uvw_stats,
)
from sync_landscape.instances import critical_twist, twisted_certificate, twisted_state
from sync_landscape.operators import NotOnManifoldError, StiefelTuple, p_cov_exact, sigma_tau, stacked_p_tau
from sync_landscape.solver import retract
from sync_landscape.thresholds import alpha_g, alpha_g_tau, g_exact, q_tau, r_tau

TWIST_CELLS = [(2, 1), (3, 1), (3, 2), (4, 2), (4, 3)]


def random_sym(rng, size):
    m = rng.standard_normal((size, size))
    return m + m.T


def f_value(A, blocks):
    s = blocks.reshape(-1, blocks.shape[2])
    return -0.5 * float(np.sum(s * (A.data @ s)))


def test_gradient_is_tangent_and_zero_at_noiseless_minimum(rng):
    ones = identity_stack(4, 2)
    A = BlockSymMatrix(4, 2, ones @ ones.T)
    assert np.abs(riemannian_gradient(A, StiefelTuple.identity(4, 2, 3)).blocks).max() == 0
    S = random_tuple(rng, 4, 2, 3)
    G = riemannian_gradient(BlockSymMatrix(4, 2, random_sym(rng, 8)), S)
    assert G.tangency_error() <= 1e-12


def test_gradient_matches_finite_differences(rng):
    eps = 1e-5
    for _ in range(20):
        n, d = int(rng.integers(2, 5)), int(rng.integers(1, 4))
        p = d + int(rng.integers(1, 3))
        A = BlockSymMatrix(n, d, random_sym(rng, n * d))
        S = random_tuple(rng, n, d, p)
        G = riemannian_gradient(A, S).blocks
        for _ in range(10):
            T = random_tangent(rng, S)
            T /= np.linalg.norm(T)
            fd = (f_value(A, retract(S.blocks, eps * T)) - f_value(A, retract(S.blocks, -eps * T))) / (2 * eps)
            assert abs(fd + np.sum(G * T)) <= 1e-6


def test_hessian_form_basics(rng):
    S = random_tuple(rng, 3, 2, 4)
    L = BlockSymMatrix(3, 2, random_sym(rng, 6))
    zero = np.zeros_like(S.blocks)
    assert hessian_quadratic_form(L, S, zero, zero) == 0
    with pytest.raises(NotOnManifoldError):
        hessian_quadratic_form(L, S, S.blocks, S.blocks)
    t1, t2 = random_tangent(rng, S), random_tangent(rng, S)
    assert np.isclose(hessian_quadratic_form(L, S, t1, t2), hessian_quadratic_form(L, S, t2, t1))


def test_hessian_matrix_matches_quadratic_form(rng):
    S = random_tuple(rng, 3, 2, 4)
    L = BlockSymMatrix(3, 2, random_sym(rng, 6))
    H = hessian_matrix(L, S)
    assert H.shape == (tangent_dim(3, 2, 4),) * 2
    # coordinates of a random tangent vector in the assembled basis reproduce the form
    coords = rng.standard_normal(H.shape[0])
    local = [tangent_basis(S.blocks[i]) for i in range(3)]
    k = local[0].shape[0]
    T = np.stack([np.tensordot(coords[i * k:(i + 1) * k], local[i], axes=1) for i in range(3)])
    assert np.isclose(coords @ H @ coords, hessian_quadratic_form(L, S, T, T))


def test_dimension_cap():
    S = StiefelTuple.identity(600, 3, 6)
    L = BlockSymMatrix(600, 3, np.eye(1800))
    with pytest.raises(DimensionCapError, match="sampled"):
        second_order_check(L, S)


def test_noiseless_minimum_is_second_order(rng):
    n, d, p = 5, 2, 3
    ones = identity_stack(n, d)
    L = BlockSymMatrix(n, d, n * np.eye(n * d) - ones @ ones.T)
    S = StiefelTuple.identity(n, d, p)
    rep = second_order_check(L, S)
    assert rep.is_first_order and rep.is_second_order and rep.hess_min_eig >= -1e-10
    for _ in range(100):
        T = random_tangent(rng, S)
        assert hessian_quadratic_form(L, S, T, T) >= -1e-10


@pytest.mark.parametrize("p,d", TWIST_CELLS)
def test_twisted_state_boundary(rng, p, d):
    S = twisted_state(p, d)
    t_star = critical_twist(p, d)
    rep = second_order_check(twisted_certificate(p, d, t_star), S)
    assert rep.grad_residual <= 1e-10
    assert rep.is_second_order and abs(rep.hess_min_eig) <= 1e-8
    below = twisted_certificate(p, d, 0.9 * t_star)
    assert not second_order_check(below, S).is_second_order
    shared = rng.standard_normal((d, p))
    T = tangent_project(S, np.broadcast_to(shared, S.blocks.shape))
    assert hessian_quadratic_form(below, S, T, T) < -1e-8


def test_uvw_examples(rng):
    zero = uvw_stats(StiefelTuple.identity(4, 2, 3))
    assert max(abs(zero.u), abs(zero.v), abs(zero.w)) <= 1e-12
    assert math.isclose(uvw_stats(twisted_state(3, 2)).v, 1.0)
    for _ in range(100):
        n, d = int(rng.integers(1, 7)), int(rng.integers(1, 4))
        p = d + int(rng.integers(0, 3))
        st = uvw_stats(random_tuple(rng, n, d, p, spread=float(rng.random() * 2)))
        assert -1e-10 <= st.u <= st.w + 1e-10
        assert st.w <= st.v + 1e-10 and st.v <= 1 + 1e-10
        if d == 1 and st.sigma_min_zs > 0:
            assert abs(st.u - st.w) <= 1e-10


def test_g_eval_bounds(rng):
    for _ in range(60):
        n, d = int(rng.integers(2, 7)), int(rng.integers(1, 4))
        p = d + int(rng.integers(1, 4))
        S = random_tuple(rng, n, d, p, spread=float(0.2 + rng.random()))
        x, tau = float(1 - rng.random()), float(rng.random())
        val = g_eval(S, x, tau)
        assert val <= g_exact(p, d, x, tau) + 1e-9
        assert val <= 2 * (q_tau(d, tau) + d * tau * tau) + 1e-9
    for p, d in TWIST_CELLS:
        S = twisted_state(p, d)
        for tau in (0.0, 0.4, 1.0):
            bound = (p - d) / p * q_tau(d, tau) + (p * d - 1) / (p * d) * d * tau * tau
            assert g_eval(S, 0.5, tau) <= bound + 1e-9
    with pytest.raises(AlignedError):
        g_eval(StiefelTuple.identity(3, 2, 3), 0.5, 0.3)


def test_alpha_chain_on_random_configurations(rng):
    p, d = 5, 2
    taus = np.linspace(0, 1, 11)
    alphas = [alpha_g_tau(p, d, t).alpha for t in taus]
    for _ in range(20):
        S = random_tuple(rng, 6, d, p, spread=float(0.3 + rng.random()))
        for tau, alpha in zip(taus, alphas):
            a = alpha - 1e-6
            assert r_tau(p, d, tau) / a >= g_eval(S, 1 - 1 / a, tau) - 1e-12


def test_dual_certificate_examples(rng):
    p, d = 5, 2
    ceiling = alpha_g(p, d).alpha
    for _ in range(20):
        S = random_tuple(rng, 6, d, p, spread=float(0.3 + rng.random()))
        tau = float(rng.random())
        bound = per_s_bound(S, tau)
        if math.isfinite(bound):
            rep = dual_certificate_check(S, tau, 0.95 * bound)
            assert rep.feasible, rep
            assert rep.x_perp_trace <= 1 + 1e-8
        assert not dual_certificate_check(S, tau, 10 * ceiling).feasible
        prior = (p + d - 2) / (2 * d)
        rep = dual_certificate_check(S, 1.0, 0.999 * prior, theta=math.pi)
        assert abs(rep.delta) <= 1e-15 and rep.feasible


def test_dual_certificate_pure_beta_on_balanced_state():
    S = twisted_state(4, 2)
    rep = dual_certificate_check(S, 0.5, 1.0)
    assert rep.pure_beta and rep.delta == 0


def test_key_psd(rng):
    for _ in range(60):
        n, d = int(rng.integers(1, 7)), int(rng.integers(1, 4))
        p = d + int(rng.integers(0, 3))
        S = random_tuple(rng, n, d, p)
        y = rng.standard_normal((d, p))
        for tau in (0.0, 0.3, 0.5, 1.0):
            val = key_psd_check(S, y / np.linalg.norm(y), tau)
            assert val >= -1e-9
            if n == 1:
                assert abs(val) <= 1e-12
        u, _, vt = np.linalg.svd(S.blocks.sum(axis=0), full_matrices=False)
        assert key_psd_check(S, np.outer(u[:, 0], vt[0]), 0.3) >= -1e-9


def test_expectation_identity(rng):
    n, d, p, tau = 4, 2, 4, 0.35
    S = random_tuple(rng, n, d, p)
    proj = projector_perp(n, d).data
    L = BlockSymMatrix(n, d, proj @ random_sym(rng, n * d) @ proj)
    target = np.sum(L.data * sigma_tau(S, tau).data) - r_tau(p, d, tau) * np.sum(L.data * S.gram())
    # exact second moment of the random direction gives the identity without sampling error
    lam = np.einsum("nap,nbp->nab", (L.data @ S.stacked()).reshape(n, d, p), S.blocks)
    lam = 0.5 * (lam + lam.transpose(0, 2, 1))
    cov = p_cov_exact(S, tau).data.reshape(n, d, n, d)
    exact = np.sum(L.data * cov.reshape(n * d, n * d)) - sum(np.sum(lam[i] * cov[i, :, i, :]) for i in range(n))
    assert np.isclose(exact, target)
    draws = rng.standard_normal((10_000, d, p))
    vals = [hessian_quadratic_form(L, S, T, T) for T in (stacked_p_tau(S, phi, tau) for phi in draws)]
    assert abs(np.mean(vals) - target) <= 0.05 * max(abs(target), 1.0)
