"""Semigroups S(t) in orthonormal coordinates and the rate sequence b_n(T).

Three cases are provided: the identity (martingale case), ``exp(tA)`` for
a bounded generator, and the shift ``h -> h(. + t)`` on the grid version
of H_beta.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

from .noise import SpectralQ
from .opalg import OrthoOperator, _as_matrix, op_norm
from .spaces import FilipovicSpace


class Semigroup:
    """Base class; subclasses provide ``dim`` and ``matrix(t)``."""

    dim: int
    name: str = "semigroup"

    def matrix(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def _check_t(self, t: float):
        if t < 0:
            raise ValueError(f"semigroup time must be non-negative, got {t}")

    def apply(self, t: float, v) -> np.ndarray:
        self._check_t(t)
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.dim:
            raise ValueError(f"vector of dimension {v.shape[-1]} for a semigroup on dimension {self.dim}")
        return v @ self.matrix(t).T

    def apply_to_operator(self, t: float, K) -> OrthoOperator:
        self._check_t(t)
        K = _as_matrix(K)
        if K.shape[0] != self.dim:
            raise ValueError(f"operator with {K.shape[0]} rows for a semigroup on dimension {self.dim}")
        return OrthoOperator(self.matrix(t) @ K)

    def describe(self) -> dict:
        return {"kind": self.name, "dim": self.dim}


class IdentitySemigroup(Semigroup):
    name = "identity"

    def __init__(self, dim: int):
        if int(dim) < 1:
            raise ValueError("dimension must be positive")
        self.dim = int(dim)

    def matrix(self, t: float) -> np.ndarray:
        self._check_t(t)
        return np.eye(self.dim)

    def apply(self, t: float, v) -> np.ndarray:
        self._check_t(t)
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.dim:
            raise ValueError(f"vector of dimension {v.shape[-1]} for a semigroup on dimension {self.dim}")
        return v.copy()


class MatrixExpSemigroup(Semigroup):
    """Uniformly continuous semigroup ``exp(t A)`` of a bounded generator."""

    name = "matrix_exp"

    def __init__(self, generator):
        A = np.array(_as_matrix(generator), dtype=float)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"generator must be square, got {A.shape}")
        A.setflags(write=False)
        self.generator = A
        self.dim = A.shape[0]

    def matrix(self, t: float) -> np.ndarray:
        self._check_t(t)
        if t == 0.0:
            return np.eye(self.dim)
        return scipy.linalg.expm(t * self.generator)

    def generator_norm(self) -> float:
        return op_norm(self.generator)

    def describe(self) -> dict:
        return {"kind": self.name, "dim": self.dim, "generator": self.generator.tolist()}


class ShiftSemigroup(Semigroup):
    """Shift of forward curves, acting on orthonormal coordinates of H_beta.

    Off-node shifts use linear interpolation, so the semigroup law is exact
    only for shifts that are multiples of a uniform grid spacing.
    """

    name = "shift"

    def __init__(self, space: FilipovicSpace):
        self.space = space
        self.dim = space.dim

    def nodal_matrix(self, t: float) -> np.ndarray:
        self._check_t(t)
        return self.space.shift_matrix(t)

    def matrix(self, t: float) -> np.ndarray:
        self._check_t(t)
        if t == 0.0:
            return np.eye(self.dim)
        return self.space.operator_to_ortho(self.space.shift_matrix(t))

    def apply(self, t: float, v) -> np.ndarray:
        self._check_t(t)
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.dim:
            raise ValueError(f"vector of dimension {v.shape[-1]} for a semigroup on dimension {self.dim}")
        if t == 0.0:
            return v.copy()
        h = self.space.from_ortho(v)
        shifted = h @ self.space.shift_matrix(t).T
        return self.space.to_ortho(shifted)

    def describe(self) -> dict:
        x = self.space.grid
        return {"kind": self.name, "beta": self.space.beta, "x_max": float(x[-1]), "m": self.space.m}


def apply(S: Semigroup, t: float, v) -> np.ndarray:
    return S.apply(t, v)


def apply_to_operator(S: Semigroup, t: float, K) -> OrthoOperator:
    return S.apply_to_operator(t, K)


def global_bound(S: Semigroup, t: float, points: int = 64) -> float:
    """M(t) = sup over [0, t] of ||S(x)||_op, evaluated on ``points`` nodes."""
    return max(op_norm(S.matrix(x)) for x in np.linspace(0.0, t, points))


def estimate_bn(
    S: Semigroup,
    vol,
    Q: SpectralQ,
    delta_n: float,
    T: float,
    subgrid: int = 16,
    time_stride: int = 1,
) -> float:
    """Monte Carlo / grid estimate of

        b_n(T) = sup_r E[ sup_{x <= delta_n} ||(I - S(x)) sigma_r Q^{1/2}||_op^2 ].

    ``vol`` is one VolPath or a sequence of replications; the expectation is
    the average over them.  The inner sup runs over ``subgrid`` equispaced
    points of ``[0, delta_n]``; the outer sup over path nodes with
    ``t <= T`` (every ``time_stride``-th node).
    """
    paths = [vol] if not isinstance(vol, (list, tuple)) else list(vol)
    if not paths or len(paths[0]) == 0:
        raise ValueError("empty volatility path")
    if delta_n > T:
        raise ValueError("delta_n must not exceed T")
    if subgrid < 2:
        raise ValueError("subgrid needs at least 2 points")
    xs = np.linspace(0.0, delta_n, subgrid)[1:]
    eye = np.eye(S.dim)
    gaps = [eye - S.matrix(x) for x in xs]
    if all(not np.any(g) for g in gaps):
        return 0.0
    F = Q.sqrt_factor()
    nodes = paths[0].node_indices(T, time_stride)
    best = 0.0
    for j in nodes:
        acc = 0.0
        for path in paths:
            B = path.op(j) @ F
            acc += max(op_norm(g @ B) ** 2 for g in gaps)
        best = max(best, acc / len(paths))
    return float(best)


def bn_refinement_delta(S: Semigroup, vol, Q: SpectralQ, delta_n: float, T: float, subgrid: int = 16, time_stride: int = 1) -> float:
    """Change in the b_n estimate when the inner subgrid is refined 2x."""
    fine = estimate_bn(S, vol, Q, delta_n, T, 2 * subgrid - 1, time_stride)
    return fine - estimate_bn(S, vol, Q, delta_n, T, subgrid, time_stride)


def _deviation_factor(A, delta_n: float) -> float:
    a = op_norm(A)
    return delta_n * a * np.exp(a * delta_n)


def bn_bound_uniform(A, delta_n: float, C2: float, traceQ: float) -> float:
    """b_n(T) <= delta_n ||A|| exp(||A|| delta_n) sqrt(C2) Tr(Q)."""
    A = _as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError("generator must be square")
    return float(_deviation_factor(A, delta_n) * np.sqrt(C2) * traceQ)


def bn_bound_uniform_squared(A, delta_n: float, sigma_hs2: float) -> float:
    """(delta_n ||A|| exp(||A|| delta_n))^2 * sup_r E||sigma_r Q^{1/2}||_HS^2."""
    A = _as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError("generator must be square")
    return float(_deviation_factor(A, delta_n) ** 2 * sigma_hs2)


def semigroup_from_spec(spec: dict, dim: int | None = None) -> Semigroup:
    kind = spec["kind"]
    if kind == "identity":
        return IdentitySemigroup(spec.get("dim", dim))
    if kind == "matrix_exp":
        return MatrixExpSemigroup(np.asarray(spec["generator"], dtype=float))
    if kind == "shift":
        return ShiftSemigroup(FilipovicSpace.uniform(spec.get("beta", 0.5), spec.get("x_max", 5.0), spec.get("m", 64)))
    raise ValueError(f"unknown semigroup kind {kind!r}")


def random_generator(dim: int, norm: float, seed: int) -> np.ndarray:
    """Random square matrix rescaled to operator norm ``norm``."""
    from .noise import make_rng

    A = make_rng(seed, 7).standard_normal((dim, dim))
    return A * (norm / np.linalg.svd(A, compute_uv=False)[0])


__all__ = [
    "Semigroup",
    "IdentitySemigroup",
    "MatrixExpSemigroup",
    "ShiftSemigroup",
    "apply",
    "apply_to_operator",
    "global_bound",
    "estimate_bn",
    "bn_refinement_delta",
    "bn_bound_uniform",
    "bn_bound_uniform_squared",
    "semigroup_from_spec",
    "random_generator",
]
