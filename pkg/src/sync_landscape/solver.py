"""Riemannian gradient descent for the rank-``p`` factorization.

Minimizes ``F(S) = -<A, S S^T>`` over ``n`` row-orthonormal ``d x p`` blocks
with a polar retraction. The Riemannian gradient of ``F`` is
``-2 * riemannian_gradient(A, S)``, so a descent step moves along
``+riemannian_gradient``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .blockmat import BlockSymMatrix
from .criticality import riemannian_gradient
from .operators import StiefelTuple, polar_factor


@dataclass(frozen=True)
class SolveConfig:
    max_iter: int = 5000
    grad_tol: float = 1e-9
    step_rule: str = "backtracking"
    step: float | None = None  # fixed step, or initial step for backtracking
    armijo: float = 1e-4
    shrink: float = 0.5
    seed: int = 0
    record_trace: bool = False

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")
        if self.step_rule not in ("fixed", "backtracking"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")
        if self.step is not None and self.step <= 0:
            raise ValueError("step must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")


@dataclass(frozen=True)
class SolveResult:
    S_final: StiefelTuple
    objective: float
    grad_residual: float
    iters: int
    converged: bool
    reason: str = ""
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "grad_residual": self.grad_residual,
            "iters": self.iters,
            "converged": self.converged,
            "reason": self.reason,
        }


def random_stiefel(n: int, d: int, p: int, seed: int) -> StiefelTuple:
    """Blocks are polar factors of independent Gaussian ``d x p`` matrices."""
    if p < d:
        raise ValueError(f"need p >= d, got p={p}, d={d}")
    g = np.random.default_rng(seed).standard_normal((n, d, p))
    u, _, vt = np.linalg.svd(g, full_matrices=False)
    return StiefelTuple(u @ vt)


def retract(s_i: np.ndarray, t_i: np.ndarray) -> np.ndarray:
    """Polar retraction; works blockwise on stacked ``(..., d, p)`` arrays."""
    moved = np.asarray(s_i, dtype=float) + np.asarray(t_i, dtype=float)
    if moved.ndim == 2:
        return polar_factor(moved)
    u, _, vt = np.linalg.svd(moved, full_matrices=False)
    return u @ vt


def spectral_norm_estimate(A: BlockSymMatrix, iters: int = 20, seed: int = 0) -> float:
    """Power-iteration estimate of ``|A|_2``."""
    v = np.random.default_rng(seed).standard_normal(A.data.shape[0])
    est = 0.0
    for _ in range(iters):
        w = A.data @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        est = nw / np.linalg.norm(v)
        v = w / nw
    return float(est)


def objective(A: BlockSymMatrix, S: StiefelTuple) -> float:
    s = S.stacked()
    return -float(np.sum(s * (A.data @ s)))


def solve(A: BlockSymMatrix, S0: StiefelTuple, cfg: SolveConfig = SolveConfig()) -> SolveResult:
    if (A.n, A.d) != (S0.n, S0.d):
        raise ValueError(f"A has (n, d) = ({A.n}, {A.d}) but S0 has ({S0.n}, {S0.d})")
    n, d = S0.n, S0.d
    norm_scale = math.sqrt(n * d)
    base_step = cfg.step
    if base_step is None:
        base_step = 1.0 / (2.0 * max(spectral_norm_estimate(A, seed=cfg.seed), 1e-12))
    floor = base_step * 1e-16

    blocks = S0.blocks.copy()
    S = S0
    value = objective(A, S)
    ascent = riemannian_gradient(A, S).blocks
    # grad F = -2 * ascent
    grad_norm = 2.0 * float(np.linalg.norm(ascent)) / norm_scale
    trace = [(value, grad_norm)] if cfg.record_trace else []
    step = base_step
    reason = "max-iter"
    it = 0
    while grad_norm > cfg.grad_tol and it < cfg.max_iter:
        direction = 2.0 * ascent
        decrease = float(np.sum(direction * direction))
        if cfg.step_rule == "backtracking":
            step = base_step
        while True:
            trial = retract(blocks, step * direction)
            trial_S = StiefelTuple(trial, check=False)
            trial_value = objective(A, trial_S)
            if cfg.step_rule == "fixed" or trial_value <= value - cfg.armijo * step * decrease:
                break
            step *= cfg.shrink
            if step < floor:
                break
        if step < floor:
            reason = "step-underflow"
            break
        it += 1
        blocks, S, value = trial, trial_S, trial_value
        ascent = riemannian_gradient(A, S).blocks
        grad_norm = 2.0 * float(np.linalg.norm(ascent)) / norm_scale
        if cfg.record_trace:
            trace.append((value, grad_norm))
    if grad_norm <= cfg.grad_tol:
        reason = "grad-tol"

    converged = grad_norm <= cfg.grad_tol
    return SolveResult(StiefelTuple(blocks), value, grad_norm, it, converged, reason, trace)


def recovery_error(S: StiefelTuple, Z: StiefelTuple) -> float:
    """``|S S^T - Z Z^T|_F / |Z Z^T|_F``."""
    if (S.n, S.d) != (Z.n, Z.d):
        raise ValueError(f"S has (n, d) = ({S.n}, {S.d}) but Z has ({Z.n}, {Z.d})")
    zz = Z.gram()
    return float(np.linalg.norm(S.gram() - zz) / np.linalg.norm(zz))


def estimate_minimizer(A: BlockSymMatrix, seed: int = 0, grad_tol: float = 1e-11) -> StiefelTuple:
    """Candidate global minimizer with square blocks, for certificate construction.

    Takes the top-``d`` eigenvectors of ``A``, rounds each block to the nearest
    orthogonal matrix, then polishes with gradient descent at ``p = d``. The
    result is only a candidate; ``certificate.verify_certificate`` decides
    whether it is optimal.
    """
    n, d = A.n, A.d
    vals, vecs = np.linalg.eigh(A.data)
    top = vecs[:, -d:] * np.sqrt(np.maximum(vals[-d:], 0.0))
    blocks = top.reshape(n, d, d)
    u, _, vt = np.linalg.svd(blocks)
    start = StiefelTuple(u @ vt)
    return solve(A, start, SolveConfig(max_iter=20000, grad_tol=grad_tol, seed=seed)).S_final
