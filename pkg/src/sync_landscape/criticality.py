"""Critical-point tests on products of Stiefel manifolds and dual feasibility checks.

Conventions
-----------
The factorized objective is ``f(S) = -1/2 <A, S S^T>``. ``riemannian_gradient``
returns the tangent projection of ``A S``, which is the Riemannian gradient of
``+1/2 <A, S S^T>``, i.e. ``-grad f``. Along a tangent direction ``T`` the
directional derivative of ``f`` is therefore ``-<riemannian_gradient(A, S), T>``.

Second-order quantities are expressed through a certificate ``L``; the
Hessian of ``1/2 <L, S S^T>`` restricted to the tangent space is the
quadratic form ``<L - bdg(L S S^T), T T^T>``.

The canonical candidate is the all-identity tuple; callers with a general
``Z`` normalize first (see ``certificate.build_certificate``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .blockmat import BlockSymMatrix, DimensionError, eigs_sym
from .operators import (
    NotOnManifoldError,
    StiefelTuple,
    TangentTuple,
    polar_factor,
    sigma_tau,
    stacked_l_tau,
    stacked_p_tau,
    tangency_error,
)
from .thresholds import r_tau

TANGENT_TOL = 1e-10
HESSIAN_DIM_CAP = 4000
ALIGNED_RTOL = 1e-10


class AlignedError(ValueError):
    """``S S^T`` coincides with ``Z Z^T``, so the normalized ratios are undefined."""


class DimensionCapError(ValueError):
    """Dense Hessian assembly would exceed the size cap."""


@dataclass(frozen=True)
class CriticalityReport:
    grad_residual: float
    hess_min_eig: float
    is_first_order: bool
    is_second_order: bool
    tangent_dim: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class UVWStats:
    u: float
    v: float
    w: float
    sigma_min_zs: float


@dataclass(frozen=True)
class DualFeasibilityReport:
    alpha_used: float
    beta: float
    delta: float
    theta: float
    x_perp_min_eig: float
    x_perp_trace: float
    two_by_two_ok: bool
    feasible: bool
    pure_beta: bool = False

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _check_shapes(M: BlockSymMatrix, S: StiefelTuple) -> None:
    if (M.n, M.d) != (S.n, S.d):
        raise DimensionError(f"matrix has (n, d) = ({M.n}, {M.d}) but S has ({S.n}, {S.d})")


def _sym_multiplier(product: np.ndarray, blocks: np.ndarray) -> np.ndarray:
    """Blocks ``sym((M S)_i S_i^T)`` of ``bdg(M S S^T)``, shape ``(n, d, d)``."""
    lam = np.einsum("nap,nbp->nab", product, blocks)
    return 0.5 * (lam + lam.transpose(0, 2, 1))


def tangent_project(S: StiefelTuple, Y: np.ndarray) -> np.ndarray:
    """Orthogonal projection of ``(n, d, p)`` blocks onto the tangent space at ``S``."""
    return Y - _sym_multiplier(Y, S.blocks) @ S.blocks


def riemannian_gradient(A: BlockSymMatrix, S: StiefelTuple) -> TangentTuple:
    """Block ``i``: ``sum_j A_ij S_j - 1/2 sum_j (A_ij S_j S_i^T + S_i S_j^T A_ji) S_i``."""
    _check_shapes(A, S)
    product = (A.data @ S.stacked()).reshape(S.blocks.shape)
    return TangentTuple(tangent_project(S, product), S)


def _stacked_tangent(S: StiefelTuple, T) -> np.ndarray:
    blocks = T.blocks if isinstance(T, TangentTuple) else np.asarray(T, dtype=float)
    if blocks.shape != S.blocks.shape:
        raise DimensionError(f"tangent shape {blocks.shape} != {S.blocks.shape}")
    err = tangency_error(S.blocks, blocks)
    if err > TANGENT_TOL * (1.0 + np.abs(blocks).max()):
        raise NotOnManifoldError(f"direction is not tangent (error {err:.2e})")
    return blocks.reshape(-1, S.p)


def hessian_quadratic_form(L: BlockSymMatrix, S: StiefelTuple, T1, T2) -> float:
    """``<L - bdg(L S S^T), (T1 T2^T + T2 T1^T) / 2>`` for tangent ``T1, T2``."""
    _check_shapes(L, S)
    t1 = _stacked_tangent(S, T1)
    t2 = _stacked_tangent(S, T2)
    lam = _sym_multiplier((L.data @ S.stacked()).reshape(S.blocks.shape), S.blocks)
    b1 = t1.reshape(S.blocks.shape)
    b2 = t2.reshape(S.blocks.shape)
    full = float(np.sum(t1 * (L.data @ t2)))
    diag = float(np.einsum("nab,nap,nbp->", lam, b1, b2))
    return full - diag


def tangent_basis(s_i: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the tangent space at one block, shape ``(dim, d, p)``.

    Skew generators ``(e_a e_b^T - e_b e_a^T) S_i / sqrt(2)`` come first, then
    ``e_a c^T`` for an orthonormal basis ``c`` of the complement of the row space.
    """
    d, p = s_i.shape
    out = []
    for a in range(d):
        for b in range(a + 1, d):
            gen = np.zeros((d, d))
            gen[a, b], gen[b, a] = 1.0, -1.0
            out.append(gen @ s_i / math.sqrt(2.0))
    if p > d:
        q, _ = np.linalg.qr(np.hstack([s_i.T, np.eye(p)]))
        complement = q[:, d:p]
        for a in range(d):
            for k in range(p - d):
                block = np.zeros((d, p))
                block[a] = complement[:, k]
                out.append(block)
    return np.array(out).reshape(-1, d, p)


def tangent_dim(n: int, d: int, p: int) -> int:
    return n * (d * p - d * (d + 1) // 2)


def first_order_residual(L: BlockSymMatrix, S: StiefelTuple) -> float:
    """``|(L - bdg(L S S^T)) S|_F / (1 + |L|_F)``."""
    _check_shapes(L, S)
    product = (L.data @ S.stacked()).reshape(S.blocks.shape)
    lam = _sym_multiplier(product, S.blocks)
    resid = product - lam @ S.blocks
    return float(np.linalg.norm(resid) / (1.0 + np.linalg.norm(L.data)))


def hessian_matrix(L: BlockSymMatrix, S: StiefelTuple) -> np.ndarray:
    """Gram matrix of the Hessian form in the per-node orthonormal tangent basis."""
    n, d, p = S.blocks.shape
    dim = tangent_dim(n, d, p)
    if dim > HESSIAN_DIM_CAP:
        raise DimensionCapError(
            f"tangent dimension {dim} exceeds {HESSIAN_DIM_CAP}; use sampled directions instead"
        )
    product = (L.data @ S.stacked()).reshape(S.blocks.shape)
    lam = _sym_multiplier(product, S.blocks)
    per_node = [tangent_basis(S.blocks[i]) for i in range(n)]
    local = per_node[0].shape[0] if n else 0
    basis = np.zeros((dim, n, d, p))
    for i, b in enumerate(per_node):
        basis[i * local:(i + 1) * local, i] = b
    flat = basis.reshape(dim, n * d, p)
    applied = np.einsum("ab,kbp->kap", L.data, flat)
    gram = np.einsum("kap,lap->kl", flat, applied)
    # block-diagonal multiplier only couples directions at the same node
    for i, b in enumerate(per_node):
        sl = slice(i * local, (i + 1) * local)
        gram[sl, sl] -= np.einsum("ab,kap,lbp->kl", lam[i], b, b)
    return 0.5 * (gram + gram.T)


def second_order_check(L: BlockSymMatrix, S: StiefelTuple, tol: float = 1e-8) -> CriticalityReport:
    _check_shapes(L, S)
    resid = first_order_residual(L, S)
    hess = hessian_matrix(L, S)
    min_eig = float(np.linalg.eigvalsh(hess)[0]) if hess.size else 0.0
    scale = 1.0 + float(np.abs(eigs_sym(L).eigenvalues).max())
    first = resid <= tol
    second = first and min_eig >= -tol * scale
    return CriticalityReport(resid, min_eig, bool(first), bool(second), hess.shape[0])


def uvw_stats(S: StiefelTuple) -> UVWStats:
    """Alignment statistics of ``S`` relative to the all-identity candidate."""
    n, d, _ = S.blocks.shape
    zs = S.blocks.sum(axis=0)
    zs_sq = float(np.sum(zs * zs))
    v = 1.0 - zs_sq / (n * n * d)
    r_t = polar_factor(zs)
    u = 1.0 - float(np.sum((S.stacked() @ r_t.T) ** 2)) / (n * d)
    if zs_sq > 0:
        overlaps = np.einsum("nap,ap->n", S.blocks, zs)
        w = 1.0 - float(np.sum(overlaps ** 2)) / (n * d * zs_sq)
    else:
        w = 1.0
    sigma_min = float(np.linalg.svd(zs, compute_uv=False).min())
    return UVWStats(u, v, w, sigma_min)


@dataclass(frozen=True)
class _GParts:
    perp_mass: float  # <P_perp, S S^T>
    sigma_perp_trace: float  # Tr of projected Sigma
    pull: np.ndarray  # Z^T P_{S,tau}(Z^T S), d x p


def _g_parts(S: StiefelTuple, tau: float) -> _GParts:
    n, d, _ = S.blocks.shape
    zs = S.blocks.sum(axis=0)
    perp_mass = n * d - float(np.sum(zs * zs)) / n
    if perp_mass <= ALIGNED_RTOL * n * d:
        raise AlignedError("S S^T equals Z Z^T up to tolerance")
    sigma = sigma_tau(S, tau).data
    ones_sum = sigma.reshape(n, d, n, d).sum(axis=(0, 2))
    sigma_perp = float(np.trace(sigma)) - float(np.trace(ones_sum)) / n
    pull = stacked_p_tau(S, zs, tau).sum(axis=0)
    return _GParts(perp_mass, sigma_perp, pull)


def g_eval(S: StiefelTuple, x: float, tau: float) -> float:
    """The per-configuration ratio bounded above by ``G(x, tau)``."""
    if x <= 0:
        raise ValueError(f"x must be positive, got {x}")
    parts = _g_parts(S, tau)
    n = S.n
    pull_sq = float(np.sum(parts.pull ** 2)) / n ** 2
    return parts.sigma_perp_trace / parts.perp_mass - pull_sq / (parts.perp_mass ** 2 * x)


def per_s_bound(S: StiefelTuple, tau: float) -> float:
    """Largest ``alpha`` with ``r(tau)/alpha >= g_eval(S, 1 - 1/alpha, tau)``, in closed form.

    Writing ``x = 1 - 1/alpha`` the condition is ``x^2 - 2 a x <= b^2``; the
    bound is ``1 / (1 - a - sqrt(a^2 + b^2))``, infinite when that
    denominator is not positive.
    """
    a, b = _theta_coefficients(S, tau)
    denom = 1.0 - a - math.hypot(a, b)
    return math.inf if denom <= 0 else 1.0 / denom


def _theta_coefficients(S: StiefelTuple, tau: float) -> tuple[float, float]:
    parts = _g_parts(S, tau)
    r = r_tau(S.p, S.d, tau)
    a = 0.5 * (1.0 - parts.sigma_perp_trace / (parts.perp_mass * r))
    b = float(np.linalg.norm(parts.pull)) / S.n / (parts.perp_mass * math.sqrt(r))
    return a, b


def _project_perp(M: np.ndarray, n: int, d: int) -> np.ndarray:
    """``P_perp M P_perp`` without forming the projector."""
    blocks = M.reshape(n, d, n, d)
    row_mean = blocks.mean(axis=0, keepdims=True)
    centered = blocks - row_mean
    col_mean = centered.mean(axis=2, keepdims=True)
    return (centered - col_mean).reshape(n * d, n * d)


def dual_certificate_check(
    S: StiefelTuple,
    tau: float,
    alpha: float,
    theta: float | None = None,
    tol: float = 1e-8,
) -> DualFeasibilityReport:
    """Assemble the constructed dual point at ``alpha`` and test its feasibility."""
    n, d, p = S.blocks.shape
    parts = _g_parts(S, tau)
    r = r_tau(p, d, tau)
    mass = parts.perp_mass
    pull_norm = float(np.linalg.norm(parts.pull))
    pure_beta = pull_norm == 0.0

    a = 0.5 * (1.0 - parts.sigma_perp_trace / (mass * r))
    b = pull_norm / n / (mass * math.sqrt(r))
    if theta is None:
        if abs(a) + abs(b) > 0:
            theta = math.atan2(b, -a)
        else:
            grid = np.linspace(0.0, math.pi, 257)
            theta = float(grid[np.argmax(a * (1 - np.cos(grid)) + b * np.sin(grid))])
    if pure_beta:
        theta = math.pi if a > 0 else 0.0

    beta = alpha * (1.0 - math.cos(theta)) / (2.0 * mass * r)
    delta = 0.0 if pure_beta else alpha * math.sin(theta) / (mass * math.sqrt(r))

    s = S.stacked()
    radial_coef = alpha / mass - beta * r
    x = radial_coef * (s @ s.T) + beta * sigma_tau(S, tau).data
    if not pure_beta:
        y = -parts.pull / pull_norm
        c = stacked_p_tau(S, y, tau).reshape(n * d, p)
        x -= 0.5 * delta * (c @ s.T + s @ c.T)
    x_perp = _project_perp(x, n, d)
    x_perp = 0.5 * (x_perp + x_perp.T)

    vals = np.linalg.eigvalsh(x_perp)
    trace = float(np.trace(x_perp))
    small = np.array([[radial_coef, -0.5 * delta], [-0.5 * delta, beta]])
    small_min = float(np.linalg.eigvalsh(small)[0])
    two_ok = small_min >= -tol * (1.0 + np.abs(small).max())
    min_eig = float(vals[0])
    feasible = two_ok and min_eig >= -tol and trace <= 1.0 + tol
    return DualFeasibilityReport(alpha, beta, delta, float(theta), min_eig, trace, bool(two_ok), bool(feasible), pure_beta)


def key_psd_check(S: StiefelTuple, Y: np.ndarray, tau: float) -> float:
    """Minimum eigenvalue of ``(Sigma)_perp - (L(Y) L(Y)^T)_perp`` for unit ``Y``."""
    n, d, p = S.blocks.shape
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (d, p):
        raise DimensionError(f"Y must be {d} x {p}, got {Y.shape}")
    if abs(np.linalg.norm(Y) - 1.0) > 1e-9:
        raise ValueError("Y must have unit Frobenius norm")
    ly = stacked_l_tau(S, Y, tau).reshape(n * d, p)
    diff = _project_perp(sigma_tau(S, tau).data - ly @ ly.T, n, d)
    return float(np.linalg.eigvalsh(0.5 * (diff + diff.T))[0])

