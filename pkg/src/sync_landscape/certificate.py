"""Optimality certificates and the landscape verdict.

Given data ``A`` and a candidate ``Z`` (one ``d x d`` orthogonal block per
node), the certificate is ``L = bdg(A Z Z^T) - A``. If ``L`` is PSD with
``L Z = 0`` then ``Z Z^T`` solves the semidefinite relaxation, and if in
addition ``lambda_{d+1}(L) > 0`` it is the unique solution. The landscape
verdict then compares ``lambda_max / lambda_{d+1}`` with ``alpha_g(p, d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .blockmat import BlockSymMatrix, DimensionError, bdg, eigs_sym, identity_stack
from .operators import StiefelTuple
from .thresholds import (
    DEFAULT_GRID,
    GridSpec,
    ThresholdDomainError,
    ThresholdResult,
    alpha_g,
    alpha_m,
)

DEFAULT_TOL = 1e-8


class CertificateError(ValueError):
    """The certificate failed verification, so no verdict can be issued."""


@dataclass(frozen=True)
class CertificateReport:
    lz_residual: float
    min_eig: float
    lambda_d_plus_1: float
    lambda_max: float
    cond: float
    kkt_ok: bool
    unique_ok: bool
    kernel_ok: bool = True

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class Verdict:
    cond: float
    alpha: ThresholdResult
    benign: bool
    margin: float
    alpha_m: float | None = None
    alpha_tau_one: float | None = None

    def to_dict(self) -> dict:
        return {
            "cond": self.cond,
            "alpha_g": self.alpha.alpha,
            "tau_star": self.alpha.tau_star,
            "case_id": self.alpha.case_id,
            "benign": self.benign,
            "margin": self.margin,
            "alpha_m": self.alpha_m,
            "alpha_tau_one": self.alpha_tau_one,
        }


def build_certificate(A: BlockSymMatrix, Z: StiefelTuple) -> BlockSymMatrix:
    """Certificate of ``Z`` for data ``A``, expressed in the frame where ``Z`` is all identities.

    With ``D = blkdiag(Z_1, ..., Z_n)`` the returned matrix is
    ``D^T (bdg(A Z Z^T) - A) D``, which annihilates the stacked identities
    whenever the raw certificate annihilates ``Z``.
    """
    if Z.p != Z.d:
        raise DimensionError(f"candidate Z must have square blocks, got d={Z.d}, p={Z.p}")
    if (A.n, A.d) != (Z.n, Z.d):
        raise DimensionError(f"A has (n, d) = ({A.n}, {A.d}) but Z has ({Z.n}, {Z.d})")
    n, d = A.n, A.d
    z = Z.stacked()
    raw = bdg(A.data @ z @ z.T, n, d).data - A.data
    # conjugate block (i, j) by Z_i^T (.) Z_j
    blocks = raw.reshape(n, d, n, d)
    rot = np.einsum("iab,iajc,jcd->ibjd", Z.blocks, blocks, Z.blocks)
    return BlockSymMatrix(n, d, rot.reshape(n * d, n * d))


def verify_certificate(L: BlockSymMatrix, d: int | None = None, tol: float = DEFAULT_TOL) -> CertificateReport:
    """Check PSD-ness, the kernel condition and the spectral gap of a normalized certificate."""
    d = L.d if d is None else d
    if d != L.d:
        raise DimensionError(f"declared d={d} does not match matrix block size {L.d}")
    vals = eigs_sym(L).eigenvalues
    scale = 1.0 + float(np.abs(vals).max())
    ones = identity_stack(L.n, d)
    lz = float(np.linalg.norm(L.data @ ones) / (1.0 + np.linalg.norm(L.data)))
    min_eig = float(vals[0])
    lam_max = float(vals[-1])
    lam_next = float(vals[d]) if len(vals) > d else math.nan
    kernel_ok = bool(np.all(vals[:d] <= tol * scale))
    kkt_ok = lz <= tol and min_eig >= -tol * scale
    unique_ok = kernel_ok and len(vals) > d and lam_next > tol * scale
    cond = lam_max / lam_next if unique_ok else math.inf
    return CertificateReport(lz, min_eig, lam_next, lam_max, cond, bool(kkt_ok), bool(unique_ok), kernel_ok)


def landscape_verdict(
    L: BlockSymMatrix,
    p: int,
    d: int | None = None,
    tol: float = DEFAULT_TOL,
    grid: GridSpec = DEFAULT_GRID,
) -> Verdict:
    """Decide whether rank-``p`` factorization has a benign landscape for this certificate."""
    d = L.d if d is None else d
    report = verify_certificate(L, d, tol)
    if not report.kkt_ok:
        raise CertificateError(
            f"certificate fails KKT checks (|LZ| residual {report.lz_residual:.2e}, "
            f"min eigenvalue {report.min_eig:.2e}); the candidate is not a certified optimum"
        )
    if not report.unique_ok:
        raise CertificateError(
            f"lambda_(d+1) = {report.lambda_d_plus_1:.2e} is not positive; the optimum is not unique"
        )
    threshold = alpha_g(p, d, grid)
    # cond carries eigensolver round-off, so a value within tol of the threshold counts as a tie
    benign = threshold.feasible and report.cond < threshold.alpha * (1.0 - tol)
    try:
        am = alpha_m(p, d).alpha
    except ThresholdDomainError:
        am = None
    return Verdict(
        cond=report.cond,
        alpha=threshold,
        benign=bool(benign),
        margin=threshold.alpha - report.cond,
        alpha_m=am,
        alpha_tau_one=(p + d - 2) / (2 * d),
    )
