"""Scalar threshold functions for the benign-landscape guarantee.

The central quantity is ``alpha_g(p, d)``: the largest condition number
``lambda_max(L) / lambda_{d+1}(L)`` of a certificate below which every
second-order critical point of the rank-``p`` factorization is global.
It is obtained by maximizing ``alpha_g_tau(p, d, tau)`` over ``tau`` in
``[0, 1]``, where for each ``tau`` one solves

    r(tau) / alpha >= G(1 - 1/alpha, tau)

for the largest ``alpha``. ``G`` is a supremum over an ordered simplex with
a closed form (``g_exact``) and a brute-force grid oracle (``g_grid_sup``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

CASE_IDS = (
    "d1-capped",
    "d1-p",
    "case1-quadratic",
    "case2-linear",
    "case3-constant",
    "infeasible",
)

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_REGION_RTOL = 1e-9


class ThresholdDomainError(ValueError):
    """Arguments outside the domain where a threshold function is defined."""


@dataclass(frozen=True)
class ThresholdResult:
    alpha: float
    tau_star: float
    case_id: str
    p: int
    d: int

    @property
    def feasible(self) -> bool:
        return self.case_id != "infeasible"


@dataclass(frozen=True)
class GridSpec:
    tau_points: int = 2049
    uvw_points: int = 256
    refine_iters: int = 60

    def __post_init__(self):
        if min(self.tau_points, self.uvw_points, self.refine_iters) < 2:
            raise ValueError("grid counts must be at least 2")


DEFAULT_GRID = GridSpec()


def _check_tau(tau) -> None:
    if not 0.0 <= float(tau) <= 1.0:
        raise ThresholdDomainError(f"tau must lie in [0, 1], got {tau}")


def validate_pd(p: int, d: int) -> None:
    """Reject ``(p, d)`` pairs for which the landscape threshold is undefined."""
    if d < 1:
        raise ThresholdDomainError(f"d must be >= 1, got {d}")
    if d == 1 and p < 2:
        raise ThresholdDomainError(f"d = 1 needs p >= 2, got p={p}")
    if d >= 2 and p < d + 1:
        raise ThresholdDomainError(f"d = {d} needs p >= {d + 1}, got p={p}")


def q_tau(d: int, tau):
    _check_tau(tau)
    return (d - 2) * tau * tau - 2 * (d - 1) * tau + d


def r_tau(p: int, d: int, tau):
    if p < d:
        raise ThresholdDomainError(f"need p >= d, got p={p}, d={d}")
    _check_tau(tau)
    return 2 * (d - 1) * tau * tau + p - d


def h_tau(p: int, d: int, tau: float) -> float:
    if d == 1:
        raise ThresholdDomainError("h is undefined for d = 1")
    if p < d + 1:
        raise ThresholdDomainError(f"need p >= d + 1, got p={p}, d={d}")
    q = q_tau(d, tau)
    if q <= 0.0:
        return math.inf
    head = 2.0 - d / (d + 1) if p == d + 1 else p / (d * (p - d))
    return head + (p * d / (p * d - 1)) * tau * tau / q


def g_exact(p: int, d: int, x: float, tau: float) -> float:
    """Closed form of the simplex supremum ``G(x, tau)``."""
    validate_pd(p, d)
    if x <= 0:
        raise ThresholdDomainError(f"x must be positive, got {x}")
    _check_tau(tau)
    if d == 1:
        return max(x * (1 - tau * tau) ** 2 + 2 * tau * tau, (p - 1) / p)
    q = q_tau(d, tau)
    h = h_tau(p, d, tau)
    y = x * d * q
    full = 2 * q + 2 * d * tau * tau
    if y >= max(1.0, 1.0 / h):
        return full - 1.0 / (x * d)
    if 2.0 - h <= y <= 1.0:
        return x * d * q * q + 2 * d * tau * tau
    return full - q * h


def g_grid_sup(p: int, d: int, x: float, tau: float, grid: GridSpec = DEFAULT_GRID) -> float:
    """Brute-force maximum of the simplex objective on a grid.

    The simplex ``0 <= u <= w <= v <= 1`` is parameterized as ``u = t v``,
    ``w = s v`` with ``0 <= t <= s <= 1``. The objective is a polynomial in
    ``(t, s, v)`` that stays finite as ``v -> 0``, so the ``v = 0`` face is
    sampled directly. For each ``v`` the coupling ``t <= s`` is resolved with
    a running maximum over ``t``: column ``k`` pairs ``s = ratio[k]`` with
    the best ``t <= s``.
    """
    validate_pd(p, d)
    if x <= 0:
        raise ThresholdDomainError(f"x must be positive, got {x}")
    q = q_tau(d, tau)
    m = grid.uvw_points
    # the kink of (1 - d v)_+ is added to the v axis
    v = np.union1d(np.linspace(0.0, 1.0, m), [1.0 / d])[:, None]
    ratio = np.linspace(0.0, 1.0, m)[None, :]
    slack = np.maximum(1.0 - d * v, 0.0)
    radial = q * ratio * (2.0 - p * ratio * v / (p - d)) - slack * ratio * ratio / (x * d)
    twist = d * tau * tau * ratio * (2.0 - p * d * ratio * v / (p * d - 1))
    best_radial = np.maximum.accumulate(radial, axis=1)
    return float((twist + best_radial).max())


def _d1_alpha(p: int, tau: float) -> tuple[Fraction, str, bool]:
    """Exact rational solve of the ``d = 1`` threshold at a given ``tau``."""
    t2 = Fraction(tau) ** 2
    q = 1 - t2
    rhs = Fraction(p - 1, p)
    r = p - 1
    options = []
    capped = (r + q * q) / (2 * t2 + q * q)
    if capped > 1 and (1 - 1 / capped) * q * q + 2 * t2 >= rhs:
        options.append((capped, "d1-capped"))
    if (1 - Fraction(1, p)) * q * q + 2 * t2 <= rhs:
        options.append((Fraction(p), "d1-p"))
    if not options:
        return min(capped, Fraction(1)), "infeasible", False
    best = max(a for a, _ in options)
    case = next(c for a, c in options if a == best)
    return best, case, True


def _alpha_candidates(p: int, d: int, tau: np.ndarray):
    """Vectorized branch solve for ``d >= 2``; returns alpha values and case ids."""
    tau = np.asarray(tau, dtype=float)
    t2 = tau * tau
    q = (d - 2) * t2 - 2 * (d - 1) * tau + d
    r = 2 * (d - 1) * t2 + p - d
    full = 2 * (q + d * t2)
    head = 2.0 - d / (d + 1) if p == d + 1 else p / (d * (p - d))
    edge = q <= 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where(edge, np.inf, head + (p * d / (p * d - 1)) * t2 / np.where(edge, 1.0, q))
        inv_h = 1.0 / h

        lead = full - 1.0 / d
        mid = full + r
        disc = mid * mid - 4.0 * lead * r
        a1 = np.where(disc >= 0, (mid + np.sqrt(np.maximum(disc, 0.0))) / (2.0 * lead), np.nan)
        a2 = (d * q * q + r) / (d * q * q + 2 * d * t2)
        denom3 = full - np.where(edge, 0.0, q * h)
        a3 = np.where(denom3 > 0, r / denom3, np.nan)

        def region(alpha):
            return (1.0 - 1.0 / alpha) * d * q

        lo1 = np.maximum(1.0, inv_h)
        y1, y2, y3 = region(a1), region(a2), region(a3)
        slack = _REGION_RTOL
        ok1 = (a1 > 1) & (y1 >= lo1 - slack)
        ok2 = (a2 > 1) & (y2 >= 2.0 - h - slack) & (y2 <= 1.0 + slack)
        in1 = y3 >= lo1 + slack
        in2 = (y3 >= 2.0 - h + slack) & (y3 <= 1.0 - slack)
        ok3 = (a3 > 1) & ~in1 & ~in2

    cands = np.stack([a1, a2, a3])
    valid = np.stack([ok1, ok2, ok3]) & np.isfinite(cands)
    masked = np.where(valid, cands, -np.inf)
    idx = np.argmax(masked, axis=0)
    alpha = np.take_along_axis(masked, idx[None], axis=0)[0]
    feasible = np.isfinite(alpha)

    # Without a region-consistent root above 1 the threshold is at most 1;
    # report the best sub-1 candidate for diagnostics.
    sub_one = np.where(np.isfinite(cands) & (cands > 0) & (cands <= 1), cands, 0.0).max(axis=0)
    alpha = np.where(feasible, alpha, sub_one)
    case = np.where(feasible, idx + 2, 5)

    # tau = 1 is a removable singularity of the linear branch.
    alpha = np.where(edge, (p + d - 2) / (2 * d), alpha)
    case = np.where(edge, 3, case)
    if p + d - 2 <= 2 * d:
        case = np.where(edge, 5, case)
    return alpha, case


def alpha_g_tau(p: int, d: int, tau: float) -> ThresholdResult:
    """Largest ``alpha`` with ``r(tau)/alpha >= G(1 - 1/alpha, tau)`` at fixed ``tau``."""
    validate_pd(p, d)
    _check_tau(tau)
    if d == 1:
        alpha, case, _ = _d1_alpha(p, tau)
        return ThresholdResult(float(alpha), float(tau), case, p, d)
    alpha, case = _alpha_candidates(p, d, np.array([tau]))
    return ThresholdResult(float(alpha[0]), float(tau), CASE_IDS[int(case[0])], p, d)


def _golden_max(f, lo: float, hi: float, iters: int) -> tuple[float, float]:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    e = a + _GOLDEN * (b - a)
    fc, fe = f(c), f(e)
    for _ in range(iters):
        if fc >= fe:
            b, e, fe = e, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, e, fe
            e = a + _GOLDEN * (b - a)
            fe = f(e)
    return (c, fc) if fc >= fe else (e, fe)


def alpha_g(p: int, d: int, grid: GridSpec = DEFAULT_GRID) -> ThresholdResult:
    """Maximize ``alpha_g_tau`` over ``tau``: grid search, then golden-section refinement."""
    validate_pd(p, d)
    taus = np.linspace(0.0, 1.0, grid.tau_points)

    if d == 1:
        values = [_d1_alpha(p, float(t)) for t in taus]
        k = max(range(len(values)), key=lambda i: (values[i][2], values[i][0]))
        alpha, case, _ = values[k]
        return ThresholdResult(float(alpha), float(taus[k]), case, p, d)

    alphas, cases = _alpha_candidates(p, d, taus)
    feasible = cases != 5
    if not feasible.any():
        k = int(np.argmax(alphas))
        return ThresholdResult(float(alphas[k]), float(taus[k]), "infeasible", p, d)

    score = np.where(feasible, alphas, -np.inf)
    k = int(np.argmax(score))
    best_tau, best_alpha = float(taus[k]), float(score[k])

    def objective(t: float) -> float:
        a, c = _alpha_candidates(p, d, np.array([t]))
        return float(a[0]) if c[0] != 5 else -math.inf

    lo, hi = float(taus[max(k - 1, 0)]), float(taus[min(k + 1, len(taus) - 1)])
    t_ref, a_ref = _golden_max(objective, lo, hi, grid.refine_iters)
    if a_ref > best_alpha:
        best_tau, best_alpha = t_ref, a_ref
    return alpha_g_tau(p, d, best_tau)


def alpha_m_tau(p: int, d: int, tau: float) -> float:
    """The relaxed per-``tau`` threshold obtained by dropping the negative terms of ``G``."""
    return r_tau(p, d, tau) / (2 * (q_tau(d, tau) + d * tau * tau))


def tau_star_m(p: int, d: int) -> float:
    """Maximizer of ``alpha_m_tau`` over ``tau``, in closed form."""
    if d < 2:
        raise ThresholdDomainError("alpha_m is defined for d >= 2 only")
    if p < d + 2:
        raise ThresholdDomainError(f"alpha_m needs p >= d + 2, got p={p}, d={d}")
    a = (2 * d - p) / (d - 1)
    return 0.5 * (a + math.sqrt(a * a + 2 * (p - d) / (d - 1)))


def alpha_m(p: int, d: int) -> ThresholdResult:
    tau = tau_star_m(p, d)
    if not 0.5 < tau <= 1.0 + 1e-12:
        raise ArithmeticError(f"tau_* = {tau} left (1/2, 1] for p={p}, d={d}")
    tau = min(tau, 1.0)
    return ThresholdResult(tau / (2 * tau - 1), tau, "case3-constant", p, d)


def simplified_p_min(d: int) -> float:
    """Smallest ``p`` for which the simplified lower bound applies."""
    return (1 + 2 * math.sqrt(d) / (d - 1)) * d + 2


def alpha_simplified(p: int, d: int) -> ThresholdResult | None:
    """Closed-form lower bound on ``alpha_g``; ``None`` when ``p`` is too small."""
    if d < 2 or p < simplified_p_min(d):
        return None
    b = (4 * d - 2 * p - 3 / d) / (2 * (d - 1))
    c = (p - d + 1 / d) / (2 * (d - 1))
    tau = 0.5 * (b + math.sqrt(b * b + 4 * c))
    return ThresholdResult(tau / (2 * tau - 1), tau, "case1-quadratic", p, d)


def counterexample_threshold(p: int, d: int) -> float:
    """Condition number at which the twisted state becomes second-order critical."""
    if p < d or d < 1:
        raise ThresholdDomainError(f"need p >= d >= 1, got p={p}, d={d}")
    return 2 * p / (d + 1)
