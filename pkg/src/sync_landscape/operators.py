"""Tangent-operator family on Stiefel blocks and the induced covariance.

For a row-orthonormal ``d x p`` block ``S_i`` and ``tau`` in ``[0, 1]``::

    L(Y) = (1 - tau) Y S_i^T S_i + tau S_i Y^T S_i
    P(Y) = Y - L(Y)

``P`` at ``tau = 1/2`` is the orthogonal projection onto the tangent space
of the Stiefel manifold at ``S_i``. Applying ``L`` to a standard Gaussian
``d x p`` matrix, one block per node, gives a random ``nd x p`` matrix whose
second moment ``sigma_tau`` has a closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blockmat import BlockSymMatrix, DimensionError, group_eigenvalues, identity_stack

STIEFEL_TOL = 1e-10


class NotOnManifoldError(ValueError):
    """Blocks fail row-orthonormality or tangency beyond tolerance."""


@dataclass(frozen=True)
class StiefelTuple:
    """``n`` row-orthonormal ``d x p`` blocks stored as an ``(n, d, p)`` array."""

    blocks: np.ndarray = field(repr=False)
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        arr = np.array(self.blocks, dtype=float)
        if arr.ndim != 3 or arr.shape[1] > arr.shape[2]:
            raise DimensionError(f"expected blocks of shape (n, d, p) with p >= d, got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "blocks", arr)
        if self.check:
            err = self.orthonormality_error()
            if err > STIEFEL_TOL:
                raise NotOnManifoldError(f"blocks are not row-orthonormal (error {err:.2e})")

    @classmethod
    def from_stacked(cls, stacked: np.ndarray, d: int, check: bool = True) -> "StiefelTuple":
        stacked = np.asarray(stacked, dtype=float)
        if stacked.shape[0] % d:
            raise DimensionError(f"row count {stacked.shape[0]} not divisible by d={d}")
        return cls(stacked.reshape(-1, d, stacked.shape[1]), check)

    @classmethod
    def identity(cls, n: int, d: int, p: int | None = None) -> "StiefelTuple":
        """The canonical all-identity tuple, padded with zero columns to width ``p``."""
        p = d if p is None else p
        block = np.zeros((d, p))
        block[:, :d] = np.eye(d)
        return cls(np.broadcast_to(block, (n, d, p)).copy())

    @property
    def n(self) -> int:
        return self.blocks.shape[0]

    @property
    def d(self) -> int:
        return self.blocks.shape[1]

    @property
    def p(self) -> int:
        return self.blocks.shape[2]

    def stacked(self) -> np.ndarray:
        """The ``nd x p`` matrix with the blocks stacked node-major."""
        return self.blocks.reshape(self.n * self.d, self.p)

    def gram(self) -> np.ndarray:
        s = self.stacked()
        return s @ s.T

    def orthonormality_error(self) -> float:
        prod = np.einsum("nap,nbp->nab", self.blocks, self.blocks)
        return float(np.abs(prod - np.eye(self.d)).max()) if self.n else 0.0


@dataclass(frozen=True)
class TangentTuple:
    """Tangent vectors at ``base``; block ``i`` satisfies ``T_i S_i^T + S_i T_i^T = 0``."""

    blocks: np.ndarray = field(repr=False)
    base: StiefelTuple = field(repr=False)
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        arr = np.array(self.blocks, dtype=float)
        if arr.shape != self.base.blocks.shape:
            raise DimensionError(f"tangent shape {arr.shape} != base shape {self.base.blocks.shape}")
        if self.check and arr.size:
            # relative to the tangent's size so large gradients are not rejected for round-off
            err = tangency_error(self.base.blocks, arr)
            if err > STIEFEL_TOL * (1.0 + np.abs(arr).max()):
                raise NotOnManifoldError(f"tangency error {err:.3e} exceeds tolerance")
        arr.setflags(write=False)
        object.__setattr__(self, "blocks", arr)

    def stacked(self) -> np.ndarray:
        return self.blocks.reshape(-1, self.blocks.shape[2])

    def tangency_error(self) -> float:
        return tangency_error(self.base.blocks, self.blocks)


def tangency_error(base: np.ndarray, tangent: np.ndarray) -> float:
    """Largest entry of ``T_i S_i^T + S_i T_i^T`` over all nodes."""
    cross = np.einsum("...ap,...bp->...ab", tangent, base)
    return float(np.abs(cross + np.swapaxes(cross, -1, -2)).max()) if cross.size else 0.0


def _check_pair(s_i: np.ndarray, y: np.ndarray) -> None:
    if s_i.shape != y.shape[-2:]:
        raise DimensionError(f"S_i has shape {s_i.shape} but Y has shape {y.shape}")


def apply_l_tau(s_i: np.ndarray, y: np.ndarray, tau: float) -> np.ndarray:
    """``(1 - tau) Y S_i^T S_i + tau S_i Y^T S_i``; ``y`` may carry leading batch axes."""
    s_i = np.asarray(s_i, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_pair(s_i, y)
    radial = y @ s_i.T
    return (1.0 - tau) * radial @ s_i + tau * np.swapaxes(radial, -1, -2) @ s_i


def apply_p_tau(s_i: np.ndarray, y: np.ndarray, tau: float) -> np.ndarray:
    return np.asarray(y, dtype=float) - apply_l_tau(s_i, y, tau)


def stacked_l_tau(S: StiefelTuple, y: np.ndarray, tau: float) -> np.ndarray:
    """Apply ``L`` at every node to the same ``Y``; returns ``n x d x p``."""
    radial = np.einsum("ap,nbp->nab", y, S.blocks)
    return (1.0 - tau) * radial @ S.blocks + tau * np.swapaxes(radial, 1, 2) @ S.blocks


def stacked_p_tau(S: StiefelTuple, y: np.ndarray, tau: float) -> np.ndarray:
    """Per-node ``Y - L_i(Y)`` for a shared ``Y``; returns ``n x d x p``."""
    return y[None] - stacked_l_tau(S, y, tau)


def operator_matrix(s_i: np.ndarray, tau: float) -> np.ndarray:
    """Matrix of ``Y -> L(Y)`` acting on row-major ``vec(Y)``."""
    d, p = s_i.shape
    basis = np.eye(d * p).reshape(d * p, d, p)
    return apply_l_tau(s_i, basis, tau).reshape(d * p, d * p).T


def operator_spectrum(s_i: np.ndarray, tau: float, rtol: float = 1e-8) -> list[tuple[float, int]]:
    """Eigenvalues of ``L`` with multiplicities, coincident values merged."""
    mat = operator_matrix(np.asarray(s_i, dtype=float), tau)
    return group_eigenvalues(np.linalg.eigvalsh(0.5 * (mat + mat.T)), rtol)


def sigma_tau(S: StiefelTuple, tau: float) -> BlockSymMatrix:
    """Closed-form second moment of the stacked ``L(Phi)`` with ``Phi`` Gaussian."""
    blocks = S.blocks
    n, d, _ = blocks.shape
    cross = np.einsum("iap,jbp->ijab", blocks, blocks)  # S_i S_j^T
    sq = np.einsum("ijab,ijab->ij", cross, cross)
    inner = np.einsum("ijaa->ij", cross)
    left = np.einsum("ijab,ijcb->ijac", cross, cross)  # S_i S_j^T S_j S_i^T
    right = np.einsum("ijba,ijbc->ijac", cross, cross)  # S_j S_i^T S_i S_j^T
    out = (
        (1 - tau) ** 2 * sq[:, :, None, None] * np.eye(d)
        + (1 - tau) * tau * (left + right)
        + tau ** 2 * inner[:, :, None, None] * cross
    )
    return BlockSymMatrix(n, d, out.transpose(0, 2, 1, 3).reshape(n * d, n * d))


def monte_carlo_cov(
    S: StiefelTuple,
    tau: float,
    which: str = "L-cov",
    trials: int = 100_000,
    seed: int = 0,
    chunk: int = 4096,
) -> BlockSymMatrix:
    """Empirical second moment of the stacked operator applied to Gaussian ``Phi``.

    ``which`` is ``"L-cov"`` for ``L_i(Phi)`` or ``"P-cov"`` for ``Phi - L_i(Phi)``.
    Trials are drawn in fixed-size chunks, each from its own child of the seed
    sequence, so the result depends only on ``seed`` and ``trials``.
    """
    if which not in ("L-cov", "P-cov"):
        raise ValueError(f"which must be 'L-cov' or 'P-cov', got {which!r}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n, d, p = S.blocks.shape
    sizes = [chunk] * (trials // chunk) + ([trials % chunk] if trials % chunk else [])
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    acc = np.zeros((n * d, n * d))
    for size, child in zip(sizes, children):
        phi = np.random.default_rng(child).standard_normal((size, d, p))
        radial = np.einsum("tap,nbp->tnab", phi, S.blocks)
        out = (1 - tau) * radial @ S.blocks + tau * np.swapaxes(radial, 2, 3) @ S.blocks
        if which == "P-cov":
            out = phi[:, None] - out
        flat = out.reshape(size, n * d, p)
        acc += np.einsum("tap,tbp->ab", flat, flat)
    return BlockSymMatrix(n, d, acc / trials)


def p_cov_exact(S: StiefelTuple, tau: float) -> BlockSymMatrix:
    """Closed-form second moment of the stacked ``Phi - L_i(Phi)``."""
    n, d = S.n, S.d
    ones = identity_stack(n, d)
    shift = 2 * (d - 1) * tau + S.p - 2 * d
    return BlockSymMatrix(n, d, shift * ones @ ones.T + sigma_tau(S, tau).data)


def polar_factor(m: np.ndarray) -> np.ndarray:
    """Nearest row-orthonormal matrix ``U V^T`` from the thin SVD of ``m``.

    For rank-deficient input the singular bases completed by LAPACK are used
    as returned, which is deterministic for a given input.
    """
    u, _, vt = np.linalg.svd(np.asarray(m, dtype=float), full_matrices=False)
    return u @ vt
