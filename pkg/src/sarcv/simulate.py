"""Mild solutions Y_t = S(t)h + int S(t-s) alpha_s ds + int S(t-s) sigma_s dW_s.

Each observation interval of length ``delta_n`` is split into ``R`` fine
substeps of length ``delta = delta_n / R``.  Drift and volatility are
frozen at the left end of each substep and carried to the next
observation time by ``S(t_i - s_{j-1})``:

    Y_{t_i} = S(delta_n) Y_{t_{i-1}}
              + sum_{j=1}^{R} S(t_i - s_{j-1}) (alpha_{s_{j-1}} delta + sigma_{s_{j-1}} dW_j).
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .noise import SpectralQ, make_rng, wiener_from_normals
from .semigroup import Semigroup
from .spaces import FilipovicSpace
from .volmodels import VolPath


@dataclass
class Trajectory:
    """States at the observation times ``t_i = i * delta_n``.

    ``interval_sums[i-1]`` is the simulator's own stochastic (plus drift)
    contribution on ``(t_{i-1}, t_i]``; adjusted increments recover it.
    """

    obs_times: np.ndarray
    states: np.ndarray
    delta_n: float
    meta: dict = field(default_factory=dict)
    interval_sums: np.ndarray | None = None

    def __post_init__(self):
        self.obs_times = np.asarray(self.obs_times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim != 2 or self.states.shape[0] != self.obs_times.size:
            raise ValueError("states must have one row per observation time")
        if not np.all(np.isfinite(self.states)):
            raise ValueError("trajectory has non-finite entries")

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def n(self) -> int:
        return self.obs_times.size - 1


def observation_count(delta_n: float, T: float) -> int:
    if not delta_n > 0 or not T > 0:
        raise ValueError("delta_n and T must be positive")
    return int(math.floor(T / delta_n + 1e-9))


def fine_grid(delta_n: float, T: float, R: int) -> np.ndarray:
    n = observation_count(delta_n, T)
    return np.arange(n * R + 1) * (delta_n / R)


def sample_fine_normals(Q: SpectralQ, steps: int, seed: int, replication: int = 0) -> np.ndarray:
    return make_rng(seed, replication).standard_normal((steps, Q.rank))


def aggregate_increments(dW: np.ndarray, factor: int) -> np.ndarray:
    """Sum consecutive blocks of ``factor`` fine increments (matched noise)."""
    if factor == 1:
        return dW
    N, d = dW.shape
    if N % factor:
        raise ValueError(f"{N} fine increments cannot be grouped by {factor}")
    return dW.reshape(N // factor, factor, d).sum(axis=1)


def _drift_values(drift, N: int, dim: int) -> np.ndarray | None:
    if drift is None:
        return None
    a = np.asarray(drift, dtype=float)
    if a.ndim == 1:
        if a.size != dim:
            raise ValueError(f"drift of dimension {a.size} for a state of dimension {dim}")
        return np.broadcast_to(a, (N, dim))
    if a.ndim == 2 and a.shape[0] >= N and a.shape[1] == dim:
        return a[:N]
    raise ValueError(f"drift of shape {a.shape} does not cover {N} substeps in dimension {dim}")


def substep_sums(S: Semigroup, v: np.ndarray, n: int, R: int, delta: float) -> np.ndarray:
    """sum_r S((R - r) delta) v[i, r] (r = 0..R-1) for each observation interval i."""
    blocks = v.reshape(n, R, v.shape[1])
    out = np.zeros((n, v.shape[1]))
    for r in range(R):
        out += S.apply((R - r) * delta, blocks[:, r, :])
    return out


def simulate_mild_path(
    S: Semigroup,
    vol: VolPath,
    Q: SpectralQ,
    h0=None,
    delta_n: float = 1 / 64,
    T: float = 1.0,
    R: int = 8,
    seed: int = 0,
    drift=None,
    noise: np.ndarray | None = None,
    backend: str | None = None,
) -> Trajectory:
    """Simulate the mild solution at the observation times.

    ``noise`` may supply the fine Wiener increments (shape ``(n R, d_U)``)
    instead of drawing them from ``seed``; matched-noise studies pass
    aggregated finest-level increments this way.  ``drift`` is ``None``,
    a constant vector, or one vector per fine node (orthonormal
    coordinates).
    """
    if int(R) < 1:
        raise ValueError("refinement R must be at least 1")
    n = observation_count(delta_n, T)
    N = n * R
    delta = delta_n / R
    if vol.out_dim != S.dim:
        raise ValueError(f"volatility maps into dimension {vol.out_dim}, semigroup acts on {S.dim}")
    if vol.in_dim != Q.dim:
        raise ValueError(f"volatility takes dimension {vol.in_dim}, noise lives in {Q.dim}")
    if not vol.constant:
        if len(vol) < N + 1:
            raise ValueError(f"volatility path has {len(vol)} nodes, need {N + 1} for delta_n={delta_n}, R={R}")
        expected = np.arange(N + 1) * delta
        if np.max(np.abs(vol.times[: N + 1] - expected)) > 1e-9 * max(1.0, T):
            raise ValueError("volatility grid does not match the fine grid delta_n / R")
    if noise is None:
        xi = sample_fine_normals(Q, N, seed)
        dW = wiener_from_normals(Q, delta, xi)
    else:
        dW = np.asarray(noise, dtype=float)
        if dW.shape != (N, Q.dim):
            raise ValueError(f"noise of shape {dW.shape}, expected {(N, Q.dim)}")
    v = vol.apply_increments(dW)
    a = _drift_values(drift, N, S.dim)
    if a is not None:
        v = v + a * delta
    inc = substep_sums(S, v, n, R, delta)
    y0 = np.zeros(S.dim) if h0 is None else np.asarray(h0, dtype=float)
    states = kernels.mild_recursion(S.matrix(delta_n), inc, y0, backend=backend)
    meta = {"d": S.dim, "delta_n": delta_n, "T": T, "R": int(R), "seed": int(seed), "semigroup": S.describe()}
    return Trajectory(np.arange(n + 1) * delta_n, states, float(delta_n), meta, inc)


def hjm_drift(vol: VolPath, Q: SpectralQ, space: FilipovicSpace, up_to: int | None = None, tol: float = 1e-6) -> np.ndarray:
    """No-arbitrage drift alpha_t = sum_j sigma^j_t Sigma^j_t at the path nodes.

    ``sigma^j_t = sqrt(lambda_j) sigma_t(e_j)`` as a curve and
    ``Sigma^j_t = int_0^t sigma^j_s ds`` by left-point quadrature; products
    are nodewise.  Returns nodal values, shape ``(nodes, m + 1)``.  Every
    ``sigma^j`` must vanish at the last grid node to within ``tol``.
    """
    if vol.out_dim != space.dim:
        raise ValueError("volatility does not map into the forward-curve grid")
    count = len(vol) if up_to is None else int(up_to) + 1
    times = vol.times[:count]
    F = Q.sqrt_factor()
    steps = np.diff(times)
    out = np.empty((count, space.dim))
    integral = np.zeros((Q.rank, space.dim))
    for j in range(count):
        curves = space.from_ortho((vol.op(j) @ F).T)  # (rank, m+1)
        if j == 0 or not vol.constant:
            scale = max(1.0, float(np.max(np.abs(curves))))
            if np.max(np.abs(curves[:, -1])) > tol * scale:
                raise ValueError(f"volatility does not vanish at the grid end (node {j})")
        out[j] = np.sum(curves * integral, axis=0)
        if j < count - 1:
            integral = integral + curves * steps[j]
    return out


def write_trajectory_csv(traj: Trajectory, fh=None) -> str:
    meta = {"d": traj.dim, "delta_n": traj.delta_n, "seed": traj.meta.get("seed")}
    meta.update({k: v for k, v in traj.meta.items() if k not in meta})
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    buf.write(",".join(["t"] + [f"y{k}" for k in range(traj.dim)]) + "\n")
    for t, row in zip(traj.obs_times, traj.states):
        buf.write(",".join([repr(float(t))] + [repr(float(v)) for v in row]) + "\n")
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def read_trajectory_csv(text: str) -> Trajectory:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError("trajectory CSV must start with a '# {json}' metadata line")
    meta = json.loads(lines[0][1:])
    header = lines[1].split(",")
    if header[0] != "t":
        raise ValueError("second line must be the column header starting with 't'")
    rows = [[float(v) for v in ln.split(",")] for ln in lines[2:] if ln.strip()]
    arr = np.array(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != len(header):
        raise ValueError("ragged trajectory rows")
    if int(meta["d"]) != arr.shape[1] - 1:
        raise ValueError(f"metadata says d={meta['d']} but rows carry {arr.shape[1] - 1} coordinates")
    return Trajectory(arr[:, 0], arr[:, 1:], float(meta["delta_n"]), meta)
