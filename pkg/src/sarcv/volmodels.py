"""Volatility processes and their paths on a fine time grid.

Models
------
ConstantVol
    A fixed operator sigma: U -> H.
BnsOu
    sigma_t = Sigma_t^{1/2} where Sigma is an operator-valued OU process
    driven by a compound Poisson subordinator on the PSD cone, sampled
    exactly at its jump times.
RoughExp
    sigma_t h = exp(Y_t) h on the forward-curve grid, with Y_t a finite
    sum of fractional Brownian motions times smooth H_beta modes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .noise import SpectralQ, make_rng, sample_jumps
from .opalg import OrthoOperator, _as_matrix, clamp_psd, op_norm, psd_sqrt_matrix
from .spaces import FilipovicSpace, GridFunction, _values, orthonormal_modes


class VolPath:
    """Operators ``sigma_{t_j}`` at the nodes of a fine grid.

    ``ops`` is either ``(N+1, d_H, d_U)`` or a single ``(d_H, d_U)``
    matrix shared by every node.
    """

    def __init__(self, times, ops, psd: bool = False):
        times = np.asarray(times, dtype=float).ravel()
        ops = np.asarray(ops, dtype=float)
        if times.size < 1:
            raise ValueError("volatility path needs at least one node")
        if np.any(np.diff(times) <= 0):
            raise ValueError("volatility times must be strictly increasing")
        if ops.ndim == 2:
            self.constant = True
        elif ops.ndim == 3 and ops.shape[0] == times.size:
            self.constant = False
        else:
            raise ValueError(f"ops of shape {ops.shape} do not match {times.size} time nodes")
        if not np.all(np.isfinite(ops)):
            raise ValueError("volatility operators must be finite")
        self.times = times
        self.ops = ops
        self.psd = psd

    def __len__(self):
        return self.times.size

    @property
    def out_dim(self) -> int:
        return self.ops.shape[-2]

    @property
    def in_dim(self) -> int:
        return self.ops.shape[-1]

    def op(self, j: int) -> np.ndarray:
        return self.ops if self.constant else self.ops[j]

    def node_indices(self, T: float | None = None, stride: int = 1) -> list[int]:
        if self.constant:
            return [0]
        idx = np.arange(0, len(self), max(1, int(stride)))
        if T is not None:
            idx = idx[self.times[idx] <= T * (1 + 1e-12)]
        return idx.tolist()

    def subsample(self, stride: int) -> "VolPath":
        if stride == 1:
            return self
        return VolPath(self.times[::stride], self.ops if self.constant else self.ops[::stride], self.psd)

    def apply_increments(self, dW: np.ndarray) -> np.ndarray:
        """Left-point products ``sigma_{t_{j-1}} dW_j`` for ``dW`` of shape (N, d_U)."""
        dW = np.asarray(dW, dtype=float)
        if self.constant:
            return dW @ self.ops.T
        return np.einsum("jab,jb->ja", self.ops[: dW.shape[0]], dW)

    def covariances(self, Q: SpectralQ, count: int | None = None) -> np.ndarray:
        """``sigma_j Q sigma_j^*`` for the first ``count`` nodes (or once, if constant)."""
        F = Q.sqrt_factor()
        if self.constant:
            B = self.ops @ F
            return (B @ B.T)[None]
        count = len(self) if count is None else count
        B = self.ops[:count] @ F
        return B @ np.transpose(B, (0, 2, 1))


class MultiplicationVolPath(VolPath):
    """Path of multiplication operators ``h -> e_j * h`` on an H_beta grid."""

    def __init__(self, times, multipliers, space: FilipovicSpace):
        times = np.asarray(times, dtype=float).ravel()
        mult = np.asarray(multipliers, dtype=float)
        if mult.shape != (times.size, space.dim):
            raise ValueError(f"multipliers of shape {mult.shape} for {times.size} nodes on {space.dim} grid points")
        if np.any(np.diff(times) <= 0):
            raise ValueError("volatility times must be strictly increasing")
        if not np.all(np.isfinite(mult)):
            raise ValueError("multipliers must be finite")
        self.times = times
        self.multipliers = mult
        self.space = space
        self.constant = False
        self.psd = False

    @property
    def out_dim(self) -> int:
        return self.space.dim

    @property
    def in_dim(self) -> int:
        return self.space.dim

    def op(self, j: int) -> np.ndarray:
        return self.space.operator_to_ortho(np.diag(self.multipliers[j]))

    def subsample(self, stride: int) -> "MultiplicationVolPath":
        if stride == 1:
            return self
        return MultiplicationVolPath(self.times[::stride], self.multipliers[::stride], self.space)

    def apply_increments(self, dW: np.ndarray) -> np.ndarray:
        nodal = self.space.from_ortho(dW)
        return self.space.to_ortho(nodal * self.multipliers[: nodal.shape[0]])

    def covariances(self, Q: SpectralQ, count: int | None = None) -> np.ndarray:
        count = len(self) if count is None else count
        F = Q.sqrt_factor()
        out = np.empty((count, self.space.dim, self.space.dim))
        for j in range(count):
            B = self.op(j) @ F
            out[j] = B @ B.T
        return out


@dataclass(frozen=True)
class ConstantVol:
    sigma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sigma", np.array(_as_matrix(self.sigma), dtype=float))


@dataclass(frozen=True)
class BnsOu:
    """Operator OU volatility ``dSigma = B Sigma dt + dL``, ``sigma = Sigma^{1/2}``.

    ``generator`` acts on row-major vectorised ``dim x dim`` matrices; when
    omitted it is ``-kappa`` times the identity.
    """

    sigma0: np.ndarray
    rate: float
    jump_scale: float
    kappa: float = 1.0
    generator: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "sigma0", clamp_psd(self.sigma0))
        if self.generator is not None:
            B = np.array(_as_matrix(self.generator), dtype=float)
            d2 = self.dim ** 2
            if B.shape != (d2, d2):
                raise ValueError(f"generator must be {d2}x{d2} on vectorised operators, got {B.shape}")
            object.__setattr__(self, "generator", B)
        if self.rate < 0:
            raise ValueError("jump rate must be non-negative")

    @property
    def dim(self) -> int:
        return self.sigma0.shape[0]

    def generator_matrix(self) -> np.ndarray:
        if self.generator is None:
            return -self.kappa * np.eye(self.dim ** 2)
        return self.generator

    def generator_norm(self) -> float:
        return abs(self.kappa) if self.generator is None else op_norm(self.generator)


@dataclass(frozen=True)
class RoughExp:
    space: FilipovicSpace
    hurst: float
    amplitudes: np.ndarray = field(default_factory=lambda: np.array([0.3, 0.2, 0.1]))

    def __post_init__(self):
        if not 0.0 < self.hurst < 1.0:
            raise ValueError("Holder exponent must lie in (0, 1)")
        amp = np.array(self.amplitudes, dtype=float).ravel()
        if not np.all(np.isfinite(amp)):
            raise ValueError("amplitudes must be finite")
        object.__setattr__(self, "amplitudes", amp)

    @property
    def modes(self) -> int:
        return self.amplitudes.size


def _check_times(times) -> np.ndarray:
    times = np.asarray(times, dtype=float).ravel()
    if times.size < 1 or np.any(np.diff(times) <= 0) or times[0] < 0:
        raise ValueError("time grid must be non-negative and strictly increasing")
    return times


def bns_exact_path(model: BnsOu, times, seed: int) -> np.ndarray:
    """Sigma at every grid time, exact given the sampled jumps.

    Sigma_t = e^{tB} Sigma_0 + sum_{u_j <= t} e^{(t - u_j) B} J_j; with a
    compound Poisson driver the stochastic convolution is a finite sum.
    Raises :class:`~sarcv.opalg.PsdViolation` if the generator pushes a
    state out of the PSD cone beyond tolerance.
    """
    times = _check_times(times)
    d = model.dim
    rng = make_rng(seed, 11)
    jump_times, jumps = sample_jumps(model.rate, model.jump_scale, d, float(times[-1]), rng)
    out = np.empty((times.size, d, d))
    scalar = model.generator is None
    B = None if scalar else model.generator_matrix()

    def flow(X, h):
        if h == 0.0:
            return X
        if scalar:
            return np.exp(-model.kappa * h) * X
        return (scipy.linalg.expm(h * B) @ X.ravel()).reshape(d, d)

    state = flow(model.sigma0, float(times[0]))
    # jumps at or before the first node
    first = np.searchsorted(jump_times, times[0], side="right")
    for u, J in zip(jump_times[:first], jumps[:first]):
        state = state + flow(J, float(times[0] - u))
    out[0] = clamp_psd(state)
    k = first
    for i in range(1, times.size):
        state = flow(state, float(times[i] - times[i - 1]))
        stop = np.searchsorted(jump_times, times[i], side="right")
        for u, J in zip(jump_times[k:stop], jumps[k:stop]):
            state = state + flow(J, float(times[i] - u))
        k = stop
        out[i] = clamp_psd(state)
    return out


def bns_lipschitz_constant(model: BnsOu, T: float) -> float:
    """Constant L with E||Sigma_t - Sigma_s||_HS^2 <= L^2 (t - s) for t - s <= 1.

    L = U ||Sigma_0||_HS + e^{||B|| T} Tr(Q_L)^{1/2} (1 + U), U = e^{||B|| T} ||B||,
    with Tr(Q_L) the per-unit-time second moment of the subordinator.
    """
    from .noise import jump_second_moment

    b = model.generator_norm()
    growth = np.exp(b * T)
    U = growth * b
    trql = jump_second_moment(model.rate, model.jump_scale, model.dim)
    return float(U * np.linalg.norm(model.sigma0) + growth * np.sqrt(trql) * (1.0 + U))


def bns_moment_bound(model: BnsOu, T: float) -> float:
    """Bound on sup_t E[||Sigma_t||_HS^2]^{1/2} over [0, T]."""
    b = model.generator_norm()
    d = model.dim
    second = T * model.rate * 2.0 * model.jump_scale ** 2 + (T * model.rate * model.jump_scale) ** 2 / d
    return float(np.exp(b * T) * (np.linalg.norm(model.sigma0) + np.sqrt(second)))


def fbm_cholesky(times, hurst: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent fBm paths on ``times`` (first time may be 0)."""
    times = _check_times(times)
    out = np.zeros((count, times.size))
    pos = times > 0
    t = times[pos]
    if t.size == 0:
        return out
    h2 = 2.0 * hurst
    cov = 0.5 * (t[:, None] ** h2 + t[None, :] ** h2 - np.abs(t[:, None] - t[None, :]) ** h2)
    L = np.linalg.cholesky(cov)
    out[:, pos] = rng.standard_normal((count, t.size)) @ L.T
    return out


def rough_driver(model: RoughExp, times, seed: int) -> np.ndarray:
    """Nodal values of Y_t = sum_k a_k B^H_k(t) phi_k, shape (len(times), m+1)."""
    rng = make_rng(seed, 13)
    paths = fbm_cholesky(times, model.hurst, model.modes, rng)
    phi = orthonormal_modes(model.space, model.modes)
    return (paths * model.amplitudes[:, None]).T @ phi


def simulate_vol_path(model, times, seed: int) -> VolPath:
    times = _check_times(times)
    if isinstance(model, ConstantVol):
        return VolPath(times, model.sigma)
    if isinstance(model, BnsOu):
        Sig = bns_exact_path(model, times, seed)
        ops = np.array([psd_sqrt_matrix(S) for S in Sig])
        return VolPath(times, ops, psd=True)
    if isinstance(model, RoughExp):
        Y = rough_driver(model, times, seed)
        return MultiplicationVolPath(times, np.exp(Y), model.space)
    raise TypeError(f"unknown volatility model {type(model).__name__}")


def build_filipovic_volatility(space: FilipovicSpace, f, p, c: float) -> OrthoOperator:
    """Matrix in orthonormal coordinates of

        h -> c h(0) + h(0) f(x) + int_0^inf q(x, z) h'(z) dz,
        q(x, z) = int_0^x p(y, z) exp(beta z / 2 - y) dy.

    ``p`` holds kernel samples ``p(x_i, x_l)`` on grid x grid; ``q`` is
    built by cumulative trapezoid quadrature in ``y`` at cell midpoints
    ``z``, and ``h'(z) dz`` is the nodal difference on each cell.
    """
    fv = _values(f)
    space.check_same_grid(fv)
    if abs(fv[0]) > 1e-14:
        raise ValueError("f must vanish at 0")
    p = np.asarray(p, dtype=float)
    n = space.dim
    if p.shape != (n, n):
        raise ValueError(f"kernel samples must be {n}x{n}, got {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("kernel samples must be finite")
    x = space.grid
    zbar = space.midpoints
    p_mid = 0.5 * (p[:, :-1] + p[:, 1:])  # p(x_i, zbar_k)
    integrand = p_mid * np.exp(0.5 * space.beta * zbar[None, :] - x[:, None])
    dy = space.spacing[:, None]
    q = np.zeros((n, n - 1))
    q[1:] = np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * dy, axis=0)
    N = np.zeros((n, n))
    N[:, 0] += c + fv
    N += q @ space.difference_matrix()
    return OrthoOperator(space.operator_to_ortho(N))


def gaussian_bump_kernel(space: FilipovicSpace, amplitude: float = 1.0, centre=(1.0, 1.0), width: float = 0.5) -> np.ndarray:
    x = space.grid
    return amplitude * np.exp(-((x[:, None] - centre[0]) ** 2 + (x[None, :] - centre[1]) ** 2) / (2 * width ** 2))


def smooth_kernel_volatility(space: FilipovicSpace, c: float = 0.5, f_scale: float = 0.5, amplitude: float = 1.0, width: float = 0.5) -> OrthoOperator:
    """Smooth (gamma = 1) example: f(x) = f_scale x e^{-x} and a Gaussian-bump kernel."""
    x = space.grid
    f = GridFunction(f_scale * x * np.exp(-x))
    return build_filipovic_volatility(space, f, gaussian_bump_kernel(space, amplitude, width=width), c)


def mode_volatility(space: FilipovicSpace, modes: int, amplitude: float = 1.0) -> np.ndarray:
    """sigma: R^modes -> H_beta with column k the curve a sin(k pi x / x_m) e^{-x/2}.

    Every column vanishes at the grid end, as the no-arbitrage drift needs.
    """
    x = space.grid
    cols = np.array([amplitude * np.sin((k + 1) * np.pi * x / x[-1]) * np.exp(-0.5 * x) for k in range(modes)])
    cols[:, -1] = 0.0
    return space.to_ortho(cols).T
