"""Hilbert-space backends: plain coordinates and a grid version of H_beta.

``FilipovicSpace`` represents forward curves by their values at the nodes
``0 = x_0 < ... < x_m``, interpolated linearly and extended as a constant
beyond ``x_m``.  The inner product

    <h, g> = h(0) g(0) + sum_j h'_j g'_j exp(beta * xbar_j) dx_j

uses forward differences ``h'_j`` on cell ``j`` and the cell midpoint
``xbar_j``.  The Cholesky factor of its Gram matrix maps nodal values to
orthonormal coordinates, where the generic operator algebra applies.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .opalg import OrthoOperator, SymPsdOperator

GRAM_COND_MAX = 1e12


@dataclass(frozen=True)
class CoordSpace:
    """R^dim with the Euclidean inner product."""

    dim: int

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("dimension must be positive")

    def gram(self) -> np.ndarray:
        return np.eye(self.dim)

    def to_ortho(self, values) -> np.ndarray:
        return np.asarray(values, dtype=float)

    def from_ortho(self, coords) -> np.ndarray:
        return np.asarray(coords, dtype=float)


@dataclass(frozen=True)
class GridFunction:
    """Nodal values ``h(x_j)`` of a forward curve."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


def _values(h) -> np.ndarray:
    if isinstance(h, GridFunction):
        return h.values
    return np.asarray(h, dtype=float)


@dataclass(frozen=True, eq=False)
class FilipovicSpace:
    """Grid discretisation of the forward-curve space H_beta."""

    beta: float
    grid: np.ndarray
    _chol: np.ndarray = field(init=False, repr=False)
    _chol_inv_t: np.ndarray = field(init=False, repr=False)
    _gram: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x = np.array(self.grid, dtype=float).ravel()
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if x.size < 3:
            raise ValueError("grid needs at least 3 nodes (m >= 2)")
        if x[0] != 0.0:
            raise ValueError("grid must start at 0")
        if np.any(np.diff(x) <= 0):
            raise ValueError("grid must be strictly increasing")
        x.setflags(write=False)
        object.__setattr__(self, "grid", x)
        G = self._build_gram()
        cond = np.linalg.cond(G)
        if not np.isfinite(cond) or cond > GRAM_COND_MAX:
            raise ValueError(f"Gram matrix is numerically singular (condition number {cond:.3e})")
        C = np.linalg.cholesky(G)
        Cinv_t = scipy.linalg.solve_triangular(C.T, np.eye(x.size), lower=False)
        for name, arr in (("_gram", G), ("_chol", C), ("_chol_inv_t", Cinv_t)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def uniform(cls, beta: float = 0.5, x_max: float = 5.0, m: int = 64) -> "FilipovicSpace":
        return cls(beta, np.linspace(0.0, x_max, m + 1))

    @property
    def m(self) -> int:
        return self.grid.size - 1

    @property
    def dim(self) -> int:
        return self.grid.size

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.grid)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.grid[1:] + self.grid[:-1])

    def cell_weights(self) -> np.ndarray:
        """exp(beta * xbar_j) / dx_j, the weight of a squared nodal difference."""
        return np.exp(self.beta * self.midpoints) / self.spacing

    def difference_matrix(self) -> np.ndarray:
        m = self.m
        D = np.zeros((m, m + 1))
        idx = np.arange(m)
        D[idx, idx] = -1.0
        D[idx, idx + 1] = 1.0
        return D

    def _build_gram(self) -> np.ndarray:
        D = self.difference_matrix()
        G = D.T @ (self.cell_weights()[:, None] * D)
        G[0, 0] += 1.0
        return 0.5 * (G + G.T)

    @property
    def chol(self) -> np.ndarray:
        return self._chol

    def gram(self) -> np.ndarray:
        return self._gram

    def to_ortho(self, h) -> np.ndarray:
        """Orthonormal coordinates ``C^T h`` (works on the last axis)."""
        return _values(h) @ self._chol

    def from_ortho(self, coords) -> np.ndarray:
        return np.asarray(coords, dtype=float) @ self._chol_inv_t.T

    def operator_to_ortho(self, N) -> np.ndarray:
        """Matrix in orthonormal coordinates of a nodal-to-nodal operator ``N``."""
        return self._chol.T @ np.asarray(N, dtype=float) @ self._chol_inv_t

    def operator_from_ortho(self, K) -> np.ndarray:
        return self._chol_inv_t @ np.asarray(K, dtype=float) @ self._chol.T

    def check_same_grid(self, *hs):
        for h in hs:
            if _values(h).shape[-1] != self.dim:
                raise ValueError(f"grid function of length {_values(h).shape[-1]} on a grid with {self.dim} nodes")

    def interpolate(self, h, points) -> np.ndarray:
        """Piecewise-linear interpolation with constant extension past ``x_m``."""
        return np.interp(points, self.grid, _values(h))

    def shift_matrix(self, t: float) -> np.ndarray:
        """Nodal matrix of ``h -> h(. + t)`` under linear interpolation."""
        if t < 0:
            raise ValueError("shift must be non-negative")
        n = self.dim
        if t == 0.0:
            return np.eye(n)
        x = self.grid
        y = x + t
        P = np.zeros((n, n))
        beyond = y >= x[-1]
        P[beyond, -1] = 1.0
        rows = np.nonzero(~beyond)[0]
        k = np.searchsorted(x, y[rows], side="right") - 1
        w = (y[rows] - x[k]) / (x[k + 1] - x[k])
        P[rows, k] = 1.0 - w
        P[rows, k + 1] += w
        return P


def inner_beta(space: FilipovicSpace, h, g) -> float:
    hv, gv = _values(h), _values(g)
    space.check_same_grid(hv, gv)
    dh, dg = np.diff(hv), np.diff(gv)
    return float(hv[0] * gv[0] + np.sum(dh * dg * space.cell_weights()))


def norm_beta(space: FilipovicSpace, h) -> float:
    return float(np.sqrt(inner_beta(space, h, h)))


def gram_cholesky(space) -> tuple[SymPsdOperator, OrthoOperator]:
    """Gram matrix of the nodal basis and its lower Cholesky factor."""
    if isinstance(space, CoordSpace):
        eye = np.eye(space.dim)
        return SymPsdOperator(eye), OrthoOperator(eye)
    return SymPsdOperator(space.gram()), OrthoOperator(space.chol)


def pointwise_mul(h, g) -> GridFunction:
    hv, gv = _values(h), _values(g)
    if hv.shape != gv.shape:
        raise ValueError(f"grid mismatch: {hv.shape} vs {gv.shape}")
    return GridFunction(hv * gv)


def orthonormal_modes(space: FilipovicSpace, count: int) -> np.ndarray:
    """Nodal values of ``count`` smooth H_beta-orthonormal functions.

    Gram-Schmidt in the beta inner product applied to
    ``1, cos(pi x / x_m), cos(2 pi x / x_m), ...``.
    """
    x = space.grid
    raw = np.array([np.cos(k * np.pi * x / x[-1]) for k in range(count)])
    coords = space.to_ortho(raw)
    q, r = np.linalg.qr(coords.T)
    q = q * np.sign(np.diag(r))
    return space.from_ortho(q.T)


def write_grid_function_csv(space: FilipovicSpace, h, fh=None) -> str:
    """Header line of node positions, then one row of values."""
    buf = io.StringIO()
    buf.write(",".join(repr(float(v)) for v in space.grid) + "\n")
    buf.write(",".join(repr(float(v)) for v in _values(h)) + "\n")
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def read_grid_function_csv(text: str) -> tuple[np.ndarray, GridFunction]:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if len(lines) != 2:
        raise ValueError("grid function CSV needs exactly a header row and a value row")
    grid = np.array([float(v) for v in lines[0].split(",")])
    vals = np.array([float(v) for v in lines[1].split(",")])
    if grid.size != vals.size:
        raise ValueError(f"header has {grid.size} nodes but value row has {vals.size}")
    return grid, GridFunction(vals)
