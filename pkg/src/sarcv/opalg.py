"""Finite-rank Hilbert-Schmidt and trace-class operator algebra.

Every operator is stored as a real matrix in fixed orthonormal bases, so
Hilbert-Schmidt quantities reduce to Frobenius quantities and the trace of
a symmetric operator is the sum of its eigenvalues.  Functions accept
either the wrapper types below or plain 2-D arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

PSD_RTOL = 1e-12
SVD_MAX_DIM = 64
POWER_ITERATIONS = 500
POWER_TOL = 1e-12


class PsdViolation(ValueError):
    """Raised when a matrix that should be positive semidefinite is not."""


def _as_matrix(K) -> np.ndarray:
    if isinstance(K, (OrthoOperator, SymPsdOperator)):
        return K.entries
    arr = np.asarray(K, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D operator matrix, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class OrthoOperator:
    """Linear operator U -> H given by its matrix in orthonormal coordinates."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"operator matrix must be 2-D and non-empty, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("operator entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def T(self) -> "OrthoOperator":
        return OrthoOperator(self.entries.T)

    def __matmul__(self, other):
        if isinstance(other, (OrthoOperator, SymPsdOperator)):
            return compose(self, other)
        return self.entries @ np.asarray(other, dtype=float)


@dataclass(frozen=True)
class SymPsdOperator:
    """Symmetric positive-semidefinite operator on a ``dim``-dimensional space.

    Construction symmetrises inputs that are symmetric up to rounding and
    clamps eigenvalues in ``(-eps, 0)`` to zero, where
    ``eps = 1e-12 * max|eigenvalue|``.  More negative eigenvalues raise
    :class:`PsdViolation`.
    """

    entries: np.ndarray

    def __post_init__(self):
        arr = clamp_psd(self.entries)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def check_symmetric(A, rtol: float = 1e-10) -> np.ndarray:
    A = _as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if np.max(np.abs(A - A.T)) > rtol * scale:
        raise ValueError("matrix is not symmetric")
    return 0.5 * (A + A.T)


def clamp_psd(A) -> np.ndarray:
    """Return a symmetric copy of ``A`` with tiny negative eigenvalues set to 0."""
    S = check_symmetric(A)
    if not np.all(np.isfinite(S)):
        raise ValueError("operator entries must be finite")
    w, V = np.linalg.eigh(S)
    top = float(np.max(np.abs(w))) if w.size else 0.0
    eps = PSD_RTOL * top
    if w.size and w[0] < -eps:
        raise PsdViolation(f"smallest eigenvalue {w[0]:.3e} below tolerance -{eps:.3e}")
    if w.size and w[0] < 0.0:
        w = np.clip(w, 0.0, None)
        S = (V * w) @ V.T
        S = 0.5 * (S + S.T)
    return S


def tensor_square(x) -> OrthoOperator:
    """Rank-one operator ``z -> <x, z> x``."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("tensor_square needs a vector of dimension >= 1")
    if not np.all(np.isfinite(x)):
        raise ValueError("vector entries must be finite")
    return OrthoOperator(np.outer(x, x))


def tensor(x, y) -> OrthoOperator:
    """The operator ``z -> <x, z> y`` from the space of ``x`` into that of ``y``."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    return OrthoOperator(np.outer(y, x))


def hs_inner(K, L) -> float:
    K, L = _as_matrix(K), _as_matrix(L)
    if K.shape != L.shape:
        raise ValueError(f"shape mismatch {K.shape} vs {L.shape}")
    return float(np.sum(K * L))


def hs_norm(K) -> float:
    return float(np.linalg.norm(_as_matrix(K), "fro"))


def nuclear_norm(K) -> float:
    return float(np.sum(np.linalg.svd(_as_matrix(K), compute_uv=False)))


def _power_norm(K: np.ndarray) -> float:
    G = K.T @ K
    v = np.random.default_rng(0).standard_normal(G.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(POWER_ITERATIONS):
        w = G @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(nw - lam) <= POWER_TOL * nw:
            lam = nw
            break
        lam = nw
    return float(np.sqrt(lam))


def op_norm(K) -> float:
    """Largest singular value.

    Full SVD up to dimension 64, a fixed-seed power iteration on ``K^T K``
    above that.
    """
    K = _as_matrix(K)
    if not np.all(np.isfinite(K)):
        raise ValueError("operator entries must be finite")
    if max(K.shape) <= SVD_MAX_DIM:
        return float(np.linalg.svd(K, compute_uv=False)[0])
    return _power_norm(K)


def compose(L, K) -> OrthoOperator:
    """The product ``L K`` (apply ``K`` first)."""
    L, K = _as_matrix(L), _as_matrix(K)
    if L.shape[1] != K.shape[0]:
        raise ValueError(f"cannot compose {L.shape} after {K.shape}")
    return OrthoOperator(L @ K)


def trace_p(Q, p: int) -> float:
    """Sum of ``lambda_i ** p`` over the eigenvalues of a symmetric PSD ``Q``."""
    if int(p) != p or p < 1:
        raise ValueError("p must be a positive integer")
    S = Q.entries if isinstance(Q, SymPsdOperator) else clamp_psd(Q)
    w = np.clip(np.linalg.eigvalsh(S), 0.0, None)
    return float(np.sum(w ** int(p)))


def psd_sqrt(Q) -> SymPsdOperator:
    """Unique positive square root of a symmetric PSD operator."""
    S = Q.entries if isinstance(Q, SymPsdOperator) else clamp_psd(Q)
    return SymPsdOperator(psd_sqrt_matrix(S))


def psd_sqrt_matrix(S: np.ndarray) -> np.ndarray:
    # caller guarantees S symmetric
    w, V = np.linalg.eigh(S)
    R = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    return 0.5 * (R + R.T)


def matrix_exp(A, t: float = 1.0) -> OrthoOperator:
    A = _as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix_exp needs a square matrix, got {A.shape}")
    if t == 0.0:
        return OrthoOperator(np.eye(A.shape[0]))
    return OrthoOperator(scipy.linalg.expm(t * A))
