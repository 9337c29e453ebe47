"""Block-structured symmetric matrices.

Every matrix that appears in the synchronization calculus (data ``A``,
certificate ``L``, covariance ``Sigma``) is an ``nd x nd`` symmetric array
with ``d x d`` blocks. This module holds the container type, the block
diagonal symmetrizer, the blockwise partial trace, the centering projector
and a thin facade over the dense symmetric eigensolver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SYMMETRY_RTOL = 1e-12
MULTIPLICITY_RTOL = 1e-8


class DimensionError(ValueError):
    """An array does not have the block shape that was declared."""


class SymmetryError(ValueError):
    """An array is further from symmetric than the ingestion tolerance."""


class EigenSolverError(RuntimeError):
    """The dense eigensolver failed to converge."""


def asymmetry(data: np.ndarray) -> float:
    """Largest entrywise gap ``|M - M^T|`` relative to ``1 + max|M|``."""
    data = np.asarray(data, dtype=float)
    scale = 1.0 + (np.abs(data).max() if data.size else 0.0)
    return float(np.abs(data - data.T).max() / scale) if data.size else 0.0


@dataclass(frozen=True)
class BlockSymMatrix:
    """Symmetric ``nd x nd`` array viewed as an ``n x n`` grid of ``d x d`` blocks.

    Construction symmetrizes ``data`` as ``(M + M^T)/2``. Inputs whose
    asymmetry exceeds ``tol`` are rejected unless ``force=True``. The
    ``symmetrized`` flag records that the stored array differs from the
    input, which happens for round-tripped files.
    """

    n: int
    d: int
    data: np.ndarray = field(repr=False)
    symmetrized: bool = False

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise DimensionError(f"need n >= 1 and d >= 1, got n={self.n}, d={self.d}")
        arr = np.array(self.data, dtype=float)
        expected = (self.n * self.d, self.n * self.d)
        if arr.shape != expected:
            raise DimensionError(f"expected shape {expected}, got {arr.shape}")
        changed = self.symmetrized or not np.array_equal(arr, arr.T)
        arr = 0.5 * (arr + arr.T)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "symmetrized", bool(changed))

    @classmethod
    def from_array(cls, data, d: int, tol: float = SYMMETRY_RTOL, force: bool = False):
        """Wrap a square array, inferring ``n`` from its size and ``d``."""
        arr = np.asarray(data, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] % d:
            raise DimensionError(f"expected a square array with side divisible by d={d}, got {arr.shape}")
        gap = asymmetry(arr)
        if gap > tol and not force:
            raise SymmetryError(f"asymmetry {gap:.3e} exceeds tolerance {tol:.1e}")
        return cls(arr.shape[0] // d, d, arr)

    @property
    def size(self) -> int:
        return self.n * self.d

    def block(self, i: int, j: int) -> np.ndarray:
        d = self.d
        return self.data[i * d:(i + 1) * d, j * d:(j + 1) * d]

    def blocks(self) -> np.ndarray:
        """Return a ``(n, n, d, d)`` view with ``blocks()[i, j]`` the block ``(i, j)``."""
        return self.data.reshape(self.n, self.d, self.n, self.d).transpose(0, 2, 1, 3)


@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues, optionally with matching eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None

    def grouped(self, rtol: float = MULTIPLICITY_RTOL) -> list[tuple[float, int]]:
        return group_eigenvalues(self.eigenvalues, rtol)


def _as_array(M, n: int | None, d: int | None) -> tuple[np.ndarray, int, int]:
    if isinstance(M, BlockSymMatrix):
        if (n is not None and n != M.n) or (d is not None and d != M.d):
            raise DimensionError(f"expected (n, d) = ({n}, {d}), got ({M.n}, {M.d})")
        return M.data, M.n, M.d
    arr = np.asarray(M, dtype=float)
    if n is None or d is None:
        raise DimensionError("plain arrays need explicit n and d")
    if arr.shape != (n * d, n * d):
        raise DimensionError(f"expected shape {(n * d, n * d)}, got {arr.shape}")
    return arr, n, d


def bdg(M, n: int | None = None, d: int | None = None) -> BlockSymMatrix:
    """Keep the diagonal blocks of ``M``, each replaced by its symmetric part."""
    arr, n, d = _as_array(M, n, d)
    diag = arr.reshape(n, d, n, d)[np.arange(n), :, np.arange(n), :]
    diag = 0.5 * (diag + diag.transpose(0, 2, 1))
    out = np.zeros((n * d, n * d))
    for i in range(n):
        out[i * d:(i + 1) * d, i * d:(i + 1) * d] = diag[i]
    return BlockSymMatrix(n, d, out)


def partial_trace(M, n: int | None = None, d: int | None = None) -> np.ndarray:
    """``n x n`` matrix whose ``(i, j)`` entry is the trace of block ``(i, j)``."""
    arr, n, d = _as_array(M, n, d)
    return np.einsum("iaja->ij", arr.reshape(n, d, n, d))


def identity_stack(n: int, d: int) -> np.ndarray:
    """The ``nd x d`` matrix of ``n`` stacked identity blocks."""
    return np.tile(np.eye(d), (n, 1))


def projector_perp(n: int, d: int) -> BlockSymMatrix:
    """Orthogonal projector onto the complement of the stacked identities."""
    if n < 1 or d < 1:
        raise DimensionError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    ones = identity_stack(n, d)
    return BlockSymMatrix(n, d, np.eye(n * d) - ones @ ones.T / n)


def eigs_sym(M, want_vectors: bool = False, tol: float = SYMMETRY_RTOL) -> Spectrum:
    """Dense symmetric eigendecomposition with ascending eigenvalues."""
    if isinstance(M, BlockSymMatrix):
        arr = M.data
    else:
        arr = np.asarray(M, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionError(f"expected a square array, got {arr.shape}")
        gap = asymmetry(arr)
        if gap > tol:
            raise SymmetryError(f"asymmetry {gap:.3e} exceeds tolerance {tol:.1e}")
        arr = 0.5 * (arr + arr.T)
    try:
        if want_vectors:
            vals, vecs = np.linalg.eigh(arr)
            return Spectrum(vals, vecs)
        return Spectrum(np.linalg.eigvalsh(arr))
    except np.linalg.LinAlgError as exc:
        # LAPACK reports the number of off-diagonal elements that failed to converge
        raise EigenSolverError(f"symmetric eigensolver did not converge: {exc}") from exc


def group_eigenvalues(values, rtol: float = MULTIPLICITY_RTOL) -> list[tuple[float, int]]:
    """Cluster sorted eigenvalues whose consecutive gaps are below ``rtol * (1 + radius)``."""
    vals = np.sort(np.asarray(values, dtype=float))
    if vals.size == 0:
        return []
    gap = rtol * (1.0 + np.abs(vals).max())
    groups: list[list[float]] = [[vals[0]]]
    for v in vals[1:]:
        if v - groups[-1][-1] <= gap:
            groups[-1].append(v)
        else:
            groups.append([v])
    return [(float(np.mean(g)), len(g)) for g in groups]
