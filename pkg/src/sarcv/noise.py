"""Q-Wiener increments, PSD-cone compound Poisson jumps and moment formulas."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .opalg import SymPsdOperator


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for stream ``key`` under ``seed``.

    Streams are derived through ``SeedSequence`` spawn keys, so replication
    ``r`` always sees the same numbers whatever order cells are run in.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SpectralQ:
    """Covariance operator of the driving noise, in spectral form.

    ``eigenvectors`` holds orthonormal columns (``dim x rank``) in the
    ambient orthonormal coordinates of U.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        lam = np.array(self.eigenvalues, dtype=float).ravel()
        E = np.array(self.eigenvectors, dtype=float)
        if lam.size == 0:
            raise ValueError("Q needs at least one eigenvalue")
        if np.any(lam <= 0) or not np.all(np.isfinite(lam)):
            raise ValueError("eigenvalues must be finite and strictly positive")
        if np.any(np.diff(lam) > 0):
            raise ValueError("eigenvalues must be sorted in decreasing order")
        if E.ndim != 2 or E.shape[1] != lam.size or E.shape[0] < lam.size:
            raise ValueError(f"eigenvector matrix of shape {E.shape} does not fit {lam.size} eigenvalues")
        if np.max(np.abs(E.T @ E - np.eye(lam.size))) > 1e-10:
            raise ValueError("eigenvectors are not orthonormal")
        for arr in (lam, E):
            arr.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenvectors", E)

    @classmethod
    def diagonal(cls, eigenvalues, dim: int | None = None) -> "SpectralQ":
        lam = np.asarray(eigenvalues, dtype=float)
        dim = lam.size if dim is None else dim
        return cls(lam, np.eye(dim)[:, : lam.size])

    @classmethod
    def geometric(cls, dim: int, ratio: float = 0.5, first: float = 1.0, rank: int | None = None) -> "SpectralQ":
        rank = dim if rank is None else rank
        return cls.diagonal(first * ratio ** np.arange(rank), dim)

    @property
    def dim(self) -> int:
        return self.eigenvectors.shape[0]

    @property
    def rank(self) -> int:
        return self.eigenvalues.size

    def trace(self) -> float:
        return float(np.sum(self.eigenvalues))

    def trace_p(self, p: int) -> float:
        return float(np.sum(self.eigenvalues ** p))

    def matrix(self) -> np.ndarray:
        E = self.eigenvectors
        return (E * self.eigenvalues) @ E.T

    def sqrt_factor(self) -> np.ndarray:
        """``E diag(sqrt(lambda))``; ``K @ sqrt_factor()`` has the norms of ``K Q^{1/2}``."""
        return self.eigenvectors * np.sqrt(self.eigenvalues)

    def sqrt_matrix(self) -> np.ndarray:
        F = self.sqrt_factor()
        return F @ self.eigenvectors.T

    def as_operator(self) -> SymPsdOperator:
        return SymPsdOperator(self.matrix())


@dataclass(frozen=True)
class WienerIncrements:
    step: float
    draws: np.ndarray  # (steps, dim)


@dataclass(frozen=True)
class SubordinatorIncrements:
    step: float
    draws: np.ndarray  # (steps, dim, dim), each symmetric PSD


def standard_normals(Q: SpectralQ, steps: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((steps, Q.rank))


def wiener_from_normals(Q: SpectralQ, delta: float, xi: np.ndarray) -> np.ndarray:
    """Map KL coefficients ``xi`` (steps x rank) to increments in U coordinates."""
    return xi @ (Q.sqrt_factor() * np.sqrt(delta)).T


def sample_wiener_increments(Q: SpectralQ, delta: float, steps: int, seed: int) -> WienerIncrements:
    """Exact N(0, delta Q) increments through the Karhunen-Loeve expansion."""
    if not delta > 0:
        raise ValueError("step size must be positive")
    if int(steps) < 1:
        raise ValueError("need at least one step")
    xi = standard_normals(Q, int(steps), make_rng(seed))
    return WienerIncrements(float(delta), wiener_from_normals(Q, delta, xi))


def fourth_moment_theoretical(Q: SpectralQ, delta: float) -> float:
    """E ||W_{t+delta} - W_t||^4 = delta^2 (Tr(Q)^2 + 2 Tr_2(Q))."""
    return delta ** 2 * (Q.trace() ** 2 + 2.0 * Q.trace_p(2))


def second_moment_theoretical(Q: SpectralQ, delta: float) -> float:
    return delta * Q.trace()


def _unit_sphere(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    v = rng.standard_normal((count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def sample_jumps(rate: float, jump_scale: float, dim: int, horizon: float, rng: np.random.Generator):
    """Jump times on ``[0, horizon)`` and rank-one PSD jump sizes.

    Each jump is ``gamma v v^T`` with ``gamma ~ Exp(mean=jump_scale)`` and
    ``v`` uniform on the unit sphere.
    """
    if rate < 0:
        raise ValueError("jump rate must be non-negative")
    if not jump_scale > 0:
        raise ValueError("jump scale must be positive")
    count = int(rng.poisson(rate * horizon)) if rate > 0 else 0
    times = np.sort(rng.uniform(0.0, horizon, size=count))
    gam = rng.exponential(jump_scale, size=count)
    v = _unit_sphere(rng, count, dim)
    jumps = gam[:, None, None] * v[:, :, None] * v[:, None, :]
    return times, jumps


def jump_second_moment(rate: float, jump_scale: float, dim: int) -> float:
    """E ||L_1||_HS^2 bound per unit time: rate E||J||^2 + rate^2 ||E J||^2.

    With ``J = gamma v v^T``: ``||J||_HS = gamma``, ``E gamma^2 = 2 s^2`` and
    ``E J = s I / dim``.  For increments over ``h <= 1`` this dominates
    ``E ||L_{t+h} - L_t||^2 / h``.
    """
    return rate * 2.0 * jump_scale ** 2 + rate ** 2 * jump_scale ** 2 / dim


def sample_subordinator_increments(
    rate: float, jump_scale: float, dim: int, delta: float, steps: int, seed: int
) -> SubordinatorIncrements:
    """Per-step increments of a compound Poisson subordinator on the PSD cone."""
    if rate < 0:
        raise ValueError("jump rate must be non-negative")
    if not delta > 0 or int(steps) < 1:
        raise ValueError("need a positive step and at least one step")
    rng = make_rng(seed)
    counts = rng.poisson(rate * delta, size=int(steps)) if rate > 0 else np.zeros(int(steps), dtype=int)
    total = int(counts.sum())
    gam = rng.exponential(jump_scale, size=total)
    v = _unit_sphere(rng, total, dim)
    jumps = gam[:, None, None] * v[:, :, None] * v[:, None, :]
    draws = np.zeros((int(steps), dim, dim))
    owner = np.repeat(np.arange(int(steps)), counts)
    np.add.at(draws, owner, jumps)
    return SubordinatorIncrements(float(delta), draws)
