"""Seeded problem generators and the twisted-state construction."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .blockmat import BlockSymMatrix, identity_stack
from .operators import StiefelTuple, polar_factor

TWISTED_CAP = 4096


class CapExceededError(ValueError):
    """Requested construction is larger than the supported cap."""


@dataclass(frozen=True)
class SyncInstance:
    n: int
    d: int
    A: BlockSymMatrix
    Z: StiefelTuple | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.A.n, self.A.d) != (self.n, self.d):
            raise ValueError(f"A has (n, d) = ({self.A.n}, {self.A.d}), expected ({self.n}, {self.d})")
        if self.Z is not None and (self.Z.n, self.Z.d, self.Z.p) != (self.n, self.d, self.d):
            raise ValueError("Z must hold n square d x d blocks")

    def to_dict(self) -> dict:
        """JSON-ready dictionary; arrays are flattened row-major."""
        out = {
            "n": self.n,
            "d": self.d,
            "seed": self.meta.get("seed"),
            "generator": self.meta.get("generator"),
            "params": self.meta.get("params", {}),
            "A": self.A.data.ravel().tolist(),
        }
        if self.Z is not None:
            out["Z"] = self.Z.stacked().ravel().tolist()
        return out

    @classmethod
    def from_dict(cls, raw: dict, tol: float = 1e-12) -> "SyncInstance":
        n, d = int(raw["n"]), int(raw["d"])
        a = np.asarray(raw["A"], dtype=float)
        if a.size != (n * d) ** 2:
            raise ValueError(f"A has {a.size} entries, expected {(n * d) ** 2}")
        A = BlockSymMatrix.from_array(a.reshape(n * d, n * d), d, tol=tol)
        Z = None
        if raw.get("Z") is not None:
            z = np.asarray(raw["Z"], dtype=float)
            if z.size != n * d * d:
                raise ValueError(f"Z has {z.size} entries, expected {n * d * d}")
            Z = StiefelTuple(z.reshape(n, d, d))
        meta = {"generator": raw.get("generator"), "params": raw.get("params", {}), "seed": raw.get("seed")}
        return cls(n, d, A, Z, meta)


def _meta(generator: str, seed, **params) -> dict:
    return {"generator": generator, "seed": seed, "params": params}


def random_orthogonal(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    return np.stack([polar_factor(rng.standard_normal((d, d))) for _ in range(n)])


def _symmetric_noise(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """Gaussian block noise with ``W_ji = W_ij^T`` and zero diagonal blocks."""
    w = rng.standard_normal((n, n, d, d))
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    w = np.where(upper[:, :, None, None], w, 0.0)
    w = w + w.transpose(1, 0, 3, 2)
    return w.transpose(0, 2, 1, 3).reshape(n * d, n * d)


def _set_diagonal_blocks(a: np.ndarray, n: int, d: int, block: np.ndarray) -> np.ndarray:
    for i in range(n):
        a[i * d:(i + 1) * d, i * d:(i + 1) * d] = block
    return a


def gen_od_gaussian(n: int, d: int, sigma: float, seed: int) -> SyncInstance:
    """``A_ij = O_i O_j^T + sigma W_ij`` with ``A_ii = I``."""
    if n < 2 or d < 1 or sigma < 0:
        raise ValueError("need n >= 2, d >= 1, sigma >= 0")
    rng = np.random.default_rng(seed)
    o = random_orthogonal(rng, n, d)
    stacked = o.reshape(n * d, d)
    a = stacked @ stacked.T + sigma * _symmetric_noise(rng, n, d)
    _set_diagonal_blocks(a, n, d, np.eye(d))
    return SyncInstance(n, d, BlockSymMatrix(n, d, a), StiefelTuple(o), _meta("od-gaussian", seed, sigma=sigma))


def gen_z2(
    n: int,
    model: str = "gaussian",
    seed: int = 0,
    sigma: float = 0.0,
    p_edge: float = 1.0,
    flip_prob: float = 0.0,
) -> SyncInstance:
    """Sign synchronization: ``model`` is ``"gaussian"`` or ``"erdos_renyi"``."""
    rng = np.random.default_rng(seed)
    z = rng.choice([-1.0, 1.0], size=n)
    if model == "gaussian":
        a = np.outer(z, z) + sigma * _symmetric_noise(rng, n, 1)
        params = {"model": model, "sigma": sigma}
    elif model == "erdos_renyi":
        edges = np.triu(rng.random((n, n)) < p_edge, k=1)
        flips = np.triu(rng.random((n, n)) < flip_prob, k=1)
        signs = np.where(flips, -1.0, 1.0)
        a = np.where(edges, np.outer(z, z) * signs, 0.0)
        a = a + a.T
        params = {"model": model, "p_edge": p_edge, "flip_prob": flip_prob}
    else:
        raise ValueError(f"unknown model {model!r}")
    np.fill_diagonal(a, 1.0)
    return SyncInstance(n, 1, BlockSymMatrix(n, 1, a), StiefelTuple(z.reshape(n, 1, 1)), _meta("z2", seed, **params))


def from_adjacency(adjacency, generator: str = "graph", seed=None, **params) -> SyncInstance:
    """Kuramoto instance on a given graph; the candidate is the synchronized state."""
    adj = np.asarray(adjacency, dtype=float)
    n = adj.shape[0]
    return SyncInstance(n, 1, BlockSymMatrix(n, 1, adj), StiefelTuple.identity(n, 1), _meta(generator, seed, **params))


def gen_kuramoto_graph(n: int, p_edge: float, signed: bool = False, seed: int = 0) -> SyncInstance:
    """Erdos-Renyi coupling graph, optionally with random edge signs."""
    rng = np.random.default_rng(seed)
    edges = np.triu(rng.random((n, n)) < p_edge, k=1).astype(float)
    if signed:
        edges *= np.triu(rng.choice([-1.0, 1.0], size=(n, n)), k=1)
    return from_adjacency(edges + edges.T, "kuramoto", seed, p_edge=p_edge, signed=signed)


def complete_graph(n: int) -> np.ndarray:
    return np.ones((n, n)) - np.eye(n)


def cycle_graph(n: int) -> np.ndarray:
    adj = np.zeros((n, n))
    idx = np.arange(n)
    adj[idx, (idx + 1) % n] = adj[(idx + 1) % n, idx] = 1.0
    return adj


def star_graph(n: int) -> np.ndarray:
    adj = np.zeros((n, n))
    adj[0, 1:] = adj[1:, 0] = 1.0
    return adj


def gen_procrustes(
    n: int,
    d: int,
    m: int,
    sigma: float,
    seed: int,
    orthonormal_template: bool = False,
) -> SyncInstance:
    """Pairwise products ``A_i A_j^T`` of noisy rotated copies ``A_i = O_i T + sigma W_i``."""
    if m < d:
        raise ValueError(f"need m >= d, got m={m}, d={d}")
    rng = np.random.default_rng(seed)
    template = rng.standard_normal((d, m))
    if orthonormal_template:
        template = polar_factor(template)
    o = random_orthogonal(rng, n, d)
    copies = o @ template + sigma * rng.standard_normal((n, d, m))
    stacked = copies.reshape(n * d, m)
    a = stacked @ stacked.T
    _set_diagonal_blocks(a, n, d, np.zeros((d, d)))
    sv = np.linalg.svd(template, compute_uv=False)
    meta = _meta("procrustes", seed, m=m, sigma=sigma, orthonormal_template=orthonormal_template)
    meta["params"]["kappa"] = float(sv.max() / sv.min())
    return SyncInstance(n, d, BlockSymMatrix(n, d, a), StiefelTuple(o), meta)


def _cyclic_shift(p: int) -> np.ndarray:
    m = np.zeros((p, p))
    m[np.arange(p - 1), np.arange(1, p)] = 1.0
    m[p - 1, 0] = 1.0
    return m


def twisted_state(p: int, d: int) -> StiefelTuple:
    """All ``2^d p`` products ``D_j [I_d, 0] M^k`` of sign diagonals and cyclic shifts.

    Sign patterns are enumerated by binary counting (``+1`` before ``-1``),
    ``k`` runs over ``1..p`` and node ``(j, k)`` sits at index ``j p + k - 1``.
    """
    if d < 1 or p < d + 1:
        raise ValueError(f"need d >= 1 and p >= d + 1, got p={p}, d={d}")
    n = 2 ** d * p
    if n > TWISTED_CAP:
        raise CapExceededError(f"2^d p = {n} exceeds cap {TWISTED_CAP}")
    head = np.eye(d, p)
    shift = _cyclic_shift(p)
    powers = [np.linalg.matrix_power(shift, k) for k in range(1, p + 1)]
    blocks = [
        np.diag(np.array(signs)) @ head @ power
        for signs in itertools.product([1.0, -1.0], repeat=d)
        for power in powers
    ]
    S = StiefelTuple(np.array(blocks))
    s = S.stacked()
    if not np.allclose(s.T @ s, (n * d / p) * np.eye(p), atol=1e-12):
        raise ArithmeticError("twisted state lost its tight-frame property")
    if np.abs(S.blocks.sum(axis=0)).max() > 1e-12:
        raise ArithmeticError("twisted state is not balanced")
    return S


def twisted_certificate(p: int, d: int, t: float) -> BlockSymMatrix:
    """``(1 + t)(I - Z Z^T / n) - t (p / (n d)) S S^T`` for the twisted state ``S``."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    S = twisted_state(p, d)
    n = S.n
    ones = identity_stack(n, d)
    s = S.stacked()
    data = (1 + t) * (np.eye(n * d) - ones @ ones.T / n) - t * (p / (n * d)) * (s @ s.T)
    return BlockSymMatrix(n, d, data)


def critical_twist(p: int, d: int) -> float:
    """Value ``t* = 2p/(d+1) - 1`` at which the twisted state is exactly second-order critical."""
    return 2 * p / (d + 1) - 1
