"""Semigroup-adjusted realised covariation and its target.

Given observations Y_{t_0}, ..., Y_{t_n} and the semigroup S, the adjusted
increments are Y_{t_i} - S(delta_n) Y_{t_{i-1}} and the SARCV at time t is
the sum of their tensor squares up to ``floor(t / delta_n)``.  It estimates
the integrated covariance int_0^t sigma_s Q sigma_s^* ds.
"""
from __future__ import annotations

import io

import numpy as np

from . import kernels
from .noise import SpectralQ
from .semigroup import Semigroup
from .simulate import Trajectory, observation_count
from .volmodels import VolPath


class OperatorPath:
    """One operator per observation time."""

    def __init__(self, times, ops):
        self.times = np.asarray(times, dtype=float).ravel()
        self.ops = np.asarray(ops, dtype=float)
        if self.ops.ndim != 3 or self.ops.shape[0] != self.times.size:
            raise ValueError(f"ops of shape {self.ops.shape} do not match {self.times.size} times")
        if np.any(np.diff(self.times) < 0):
            raise ValueError("operator path times must be nondecreasing")

    def __len__(self):
        return self.times.size

    def at(self, i: int) -> np.ndarray:
        return self.ops[i]

    def final(self) -> np.ndarray:
        return self.ops[-1]


def _check_grid(traj: Trajectory, delta_n: float | None) -> float:
    dn = traj.delta_n if delta_n is None else float(delta_n)
    if abs(dn - traj.delta_n) > 1e-12 * max(1.0, dn):
        raise ValueError(f"trajectory sampled at delta_n={traj.delta_n}, asked for {dn}")
    expected = np.arange(traj.obs_times.size) * dn
    if np.max(np.abs(traj.obs_times - expected)) > 1e-9 * max(1.0, expected[-1]):
        raise ValueError("observation times are not the uniform grid i * delta_n")
    return dn


def adjusted_increments(traj: Trajectory, S: Semigroup, delta_n: float | None = None) -> np.ndarray:
    """Y_{t_i} - S(delta_n) Y_{t_{i-1}}, shape (n, d)."""
    dn = _check_grid(traj, delta_n)
    if S.dim != traj.dim:
        raise ValueError(f"semigroup on dimension {S.dim}, trajectory in dimension {traj.dim}")
    Y = traj.states
    return Y[1:] - S.apply(dn, Y[:-1])


def sarcv(traj: Trajectory, S: Semigroup, delta_n: float | None = None) -> OperatorPath:
    x = adjusted_increments(traj, S, delta_n)
    d = x.shape[1]
    ops = np.zeros((x.shape[0] + 1, d, d))
    np.cumsum(x[:, :, None] * x[:, None, :], axis=0, out=ops[1:])
    return OperatorPath(traj.obs_times, ops)


def qv_increments(vol: VolPath, Q: SpectralQ, delta_n: float, T: float, R: int) -> np.ndarray:
    """Left-point quadrature of int sigma Q sigma^* over each observation interval.

    Shape ``(n, d, d)``, or ``(1, d, d)`` when the volatility is constant.
    """
    n = observation_count(delta_n, T)
    if len(vol) == 0:
        raise ValueError("empty volatility path")
    if vol.constant:
        return delta_n * vol.covariances(Q)
    N = n * R
    if len(vol) < N + 1:
        raise ValueError(f"volatility path has {len(vol)} nodes, need {N + 1}")
    dt = np.diff(vol.times[: N + 1])
    c = vol.covariances(Q, N) * dt[:, None, None]
    return c.reshape(n, R, *c.shape[1:]).sum(axis=1)


def true_qv(vol: VolPath, Q: SpectralQ, delta_n: float, T: float, R: int) -> OperatorPath:
    n = observation_count(delta_n, T)
    q = qv_increments(vol, Q, delta_n, T, R)
    d = q.shape[1]
    ops = np.zeros((n + 1, d, d))
    if q.shape[0] == 1:
        ops[1:] = np.arange(1, n + 1)[:, None, None] * q[0]
    else:
        np.cumsum(q, axis=0, out=ops[1:])
    return OperatorPath(np.arange(n + 1) * delta_n, ops)


def sup_hs_error(est: OperatorPath, target: OperatorPath) -> float:
    if est.times.shape != target.times.shape or np.max(np.abs(est.times - target.times), initial=0.0) > 1e-12:
        raise ValueError("operator paths live on different time grids")
    diff = est.ops - target.ops
    return float(np.sqrt(np.einsum("iab,iab->i", diff, diff)).max())


def sarcv_sup_error(
    traj: Trajectory,
    S: Semigroup,
    vol: VolPath,
    Q: SpectralQ,
    R: int,
    backend: str | None = None,
) -> float:
    """sup_t ||SARCV_t - <<Y>>_t||_HS without materialising either path."""
    x = adjusted_increments(traj, S)
    T = traj.obs_times[-1]
    q = qv_increments(vol, Q, traj.delta_n, T, R)
    return kernels.sarcv_sup_error(x, q, backend=backend)


def write_operator_path_csv(path: OperatorPath, fh=None) -> str:
    d1, d2 = path.ops.shape[1:]
    buf = io.StringIO()
    cols = ["t"] + [f"m_{a}_{b}" for a in range(d1) for b in range(d2)]
    buf.write(",".join(cols) + "\n")
    for t, op in zip(path.times, path.ops):
        buf.write(",".join([repr(float(t))] + [repr(float(v)) for v in op.ravel()]) + "\n")
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def read_operator_path_csv(text: str) -> OperatorPath:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split(",")
    if header[0] != "t":
        raise ValueError("operator path CSV header must start with 't'")
    last = header[-1].split("_")
    d1, d2 = int(last[1]) + 1, int(last[2]) + 1
    arr = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    if arr.shape[1] != 1 + d1 * d2:
        raise ValueError("operator path rows do not match the header")
    return OperatorPath(arr[:, 0], arr[:, 1:].reshape(-1, d1, d2))
