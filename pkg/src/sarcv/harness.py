"""Monte Carlo studies of the SARCV error, b_n and noise moments.

Replications are independent cells seeded from ``(seed, replication)``
through :func:`sarcv.noise.make_rng`; results are gathered into arrays
indexed by replication and reduced in index order, so the output does not
depend on the number of worker threads.
"""
from __future__ import annotations

import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from . import kernels
from .config import Model, build_model, resolve
from .estimator import adjusted_increments, qv_increments
from .noise import SpectralQ, fourth_moment_theoretical, make_rng, second_moment_theoretical, wiener_from_normals
from .opalg import compose, hs_norm, matrix_exp, op_norm, psd_sqrt, trace_p
from .semigroup import (
    MatrixExpSemigroup,
    bn_bound_uniform_squared,
    bn_refinement_delta,
    estimate_bn,
    global_bound,
)
from .simulate import aggregate_increments, hjm_drift, simulate_mild_path
from .volmodels import ConstantVol, VolPath, simulate_vol_path


class StudyCellError(RuntimeError):
    """A module error raised inside one (n, replication) cell."""


def derive_seed(seed: int, *key: int) -> int:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def slope_fit(pairs) -> tuple[float, float, float]:
    """OLS of log(error) on log(delta): (slope, intercept, slope stderr)."""
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
        raise ValueError("slope_fit needs at least 3 (delta, error) pairs")
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise ValueError("slope_fit needs finite positive values")
    fit = scipy.stats.linregress(np.log(arr[:, 0]), np.log(arr[:, 1]))
    return float(fit.slope), float(fit.intercept), float(fit.stderr)


@dataclass
class StudyResult:
    n_list: list
    delta_n: list
    mean_err: list
    stderr: list
    bn_hat: list
    seconds: list
    slope: float | None
    intercept: float | None
    slope_stderr: float | None
    frac_decreasing: float
    envelope_ratio: float | None
    config: dict
    errors: np.ndarray = field(repr=False, default=None)
    flags: dict = field(default_factory=dict)

    def csv(self) -> str:
        buf = io.StringIO()
        buf.write("n,delta_n,mean_err,stderr,bn_hat\n")
        for row in zip(self.n_list, self.delta_n, self.mean_err, self.stderr, self.bn_hat):
            buf.write(",".join([str(row[0])] + [repr(float(v)) for v in row[1:]]) + "\n")
        return buf.getvalue()

    def timings_csv(self) -> str:
        buf = io.StringIO()
        buf.write("n,seconds\n")
        for n, s in zip(self.n_list, self.seconds):
            buf.write(f"{n},{s:.6f}\n")
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "slope_stderr": self.slope_stderr,
            "frac_decreasing": self.frac_decreasing,
            "envelope_ratio": self.envelope_ratio,
            "pass": self.flags,
            "config": self.config,
        }

    def json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2) + "\n"


def _level_drift(cfg: dict, model: Model, vol: VolPath) -> np.ndarray | None:
    kind = cfg["drift"]["kind"]
    if kind == "none":
        return None
    if kind == "constant":
        return np.asarray(cfg["drift"]["vector"], dtype=float)
    return model.space.to_ortho(hjm_drift(vol, model.Q, model.space))


def _fine_times(cfg: dict) -> np.ndarray:
    N = cfg["n_list"][-1] * cfg["refine"]
    return np.arange(N + 1) * (cfg["T"] / N)


def _replication(cfg: dict, model: Model, r: int, with_drift_off: bool = False):
    """Errors per level for replication ``r`` (plus drift-off companions)."""
    n_list, R, T = cfg["n_list"], cfg["refine"], cfg["T"]
    n_max = n_list[-1]
    times = _fine_times(cfg)
    N = times.size - 1
    vol_f = simulate_vol_path(model.vol_model, times, derive_seed(cfg["seed"], r, 1))
    xi = make_rng(cfg["seed"], r, 0).standard_normal((N, model.Q.rank))
    dW_f = wiener_from_normals(model.Q, T / N, xi)
    errs = np.empty(len(n_list))
    off = np.empty(len(n_list))
    gap = np.empty(len(n_list))
    secs = np.empty(len(n_list))
    S = model.semigroup
    for k, n in enumerate(n_list):
        t0 = time.perf_counter()
        stride = n_max // n
        try:
            vol = vol_f.subsample(stride)
            dW = aggregate_increments(dW_f, stride)
            dn = T / n
            drift = _level_drift(cfg, model, vol)
            q = qv_increments(vol, model.Q, dn, T, R)
            traj = simulate_mild_path(S, vol, model.Q, None, dn, T, R, noise=dW, drift=drift)
            x_on = adjusted_increments(traj, S)
            errs[k] = kernels.sarcv_sup_error(x_on, q)
            if not np.isfinite(errs[k]):
                raise FloatingPointError("sup error overflowed")
            if with_drift_off:
                traj0 = simulate_mild_path(S, vol, model.Q, None, dn, T, R, noise=dW, drift=None)
                x_off = adjusted_increments(traj0, S)
                off[k] = kernels.sarcv_sup_error(x_off, q)
                # sup_t || SARCV_on - SARCV_off ||_HS
                diff = x_on[:, :, None] * x_on[:, None, :] - x_off[:, :, None] * x_off[:, None, :]
                run = np.cumsum(diff, axis=0)
                gap[k] = float(np.sqrt(np.einsum("iab,iab->i", run, run)).max())
        except Exception as exc:
            raise StudyCellError(f"cell (n={n}, replication={r}): {type(exc).__name__}: {exc}") from exc
        secs[k] = time.perf_counter() - t0
    return errs, off, gap, secs


def _run_replications(cfg, model, threads: int, with_drift_off: bool = False):
    M = cfg["replications"]
    work = lambda r: _replication(cfg, model, r, with_drift_off)  # noqa: E731
    if threads <= 1:
        out = [work(r) for r in range(M)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(work, range(M)))
    errs = np.array([o[0] for o in out])
    off = np.array([o[1] for o in out])
    gap = np.array([o[2] for o in out])
    secs = np.array([o[3] for o in out]).sum(axis=0)
    return errs, off, gap, secs


def bn_paths(cfg: dict, model: Model) -> list[VolPath]:
    """Volatility paths used for b_n: one if constant, else ``bn_paths`` replications."""
    times = _fine_times(cfg)
    count = 1 if isinstance(model.vol_model, ConstantVol) else cfg["bn_paths"]
    return [simulate_vol_path(model.vol_model, times, derive_seed(cfg["seed"], r, 1)) for r in range(count)]


def bn_estimates(cfg: dict, model: Model, deltas) -> list[float]:
    paths = bn_paths(cfg, model)
    stride = max(1, cfg["refine"] * cfg["n_list"][-1] // cfg["n_list"][0])
    return [estimate_bn(model.semigroup, paths, model.Q, dn, cfg["T"], cfg["subgrid"], stride) for dn in deltas]


def convergence_study(cfg: dict | None = None, threads: int = 1, preset: str | None = None) -> StudyResult:
    """Mean sup-HS SARCV error per n over matched-noise replications."""
    cfg = resolve(cfg, preset)
    model = build_model(cfg)
    errs, _, _, secs = _run_replications(cfg, model, threads)
    M = errs.shape[0]
    mean = errs.mean(axis=0)
    se = errs.std(axis=0, ddof=1) / math.sqrt(M)
    deltas = [cfg["T"] / n for n in cfg["n_list"]]
    bn = bn_estimates(cfg, model, deltas)
    slope = intercept = slope_se = None
    if len(deltas) >= 3 and np.all(mean > 0):
        slope, intercept, slope_se = slope_fit(list(zip(deltas, mean)))
    if errs.shape[1] > 1:
        frac = float(np.mean(errs[:, 1:] <= errs[:, :-1]))
    else:
        frac = float("nan")
    env = None
    if np.all(mean > 0):
        ratio = mean / (np.asarray(deltas) ** cfg["holder_alpha"] + np.sqrt(bn))
        env = float(ratio.max() / ratio.min())
    flags = {"strictly_decreasing": bool(np.all(np.diff(mean) < 0))}
    if cfg["slope_band"] is not None:
        lo, hi = cfg["slope_band"]
        flags["slope_in_band"] = slope is not None and lo <= slope <= hi
    if cfg["bn_slope_min"] is not None:
        bn_slope = bn_slope_value(deltas, bn)
        flags["bn_slope_ok"] = bn_slope is not None and bn_slope >= cfg["bn_slope_min"]
    return StudyResult(
        list(cfg["n_list"]), deltas, mean.tolist(), se.tolist(), bn, secs.tolist(),
        slope, intercept, slope_se, frac, env, cfg, errs, flags,
    )


def bn_slope_value(deltas, bn) -> float | None:
    bn = np.asarray(bn, dtype=float)
    if len(deltas) < 3 or np.any(bn <= 0):
        return None
    return slope_fit(list(zip(deltas, bn)))[0]


@dataclass
class DriftStudyResult:
    n_list: list
    delta_n: list
    gap_mean: list
    gap_stderr: list
    err_on: list
    err_off: list
    envelope: list
    slope: float | None
    config: dict

    def csv(self) -> str:
        buf = io.StringIO()
        buf.write("n,delta_n,gap_mean,gap_stderr,err_on,err_off,envelope\n")
        for row in zip(self.n_list, self.delta_n, self.gap_mean, self.gap_stderr, self.err_on, self.err_off, self.envelope):
            buf.write(",".join([str(row[0])] + [repr(float(v)) for v in row[1:]]) + "\n")
        return buf.getvalue()


def drift_study(cfg: dict | None = None, threads: int = 1, preset: str | None = "hjm") -> DriftStudyResult:
    """Compare drift-on and drift-off SARCV on the same noise.

    ``gap`` is sup_t ||SARCV_on - SARCV_off||_HS, which bounds the change in
    the sup error.  ``envelope`` is M(T)^2 T sup_r ||alpha_r||^2 delta_n.
    """
    cfg = resolve(cfg, preset)
    if cfg["drift"]["kind"] == "none":
        raise ValueError("drift study needs a drift")
    model = build_model(cfg)
    errs, off, gap, _ = _run_replications(cfg, model, threads, with_drift_off=True)
    M = errs.shape[0]
    deltas = [cfg["T"] / n for n in cfg["n_list"]]
    vol = bn_paths(cfg, model)[0]
    alpha = _level_drift(cfg, model, vol)
    a2 = float(np.max(np.sum(np.atleast_2d(alpha) ** 2, axis=-1)))
    MT = global_bound(model.semigroup, cfg["T"])
    envelope = [MT ** 2 * cfg["T"] * a2 * dn for dn in deltas]
    gmean = gap.mean(axis=0)
    slope = slope_fit(list(zip(deltas, gmean)))[0] if len(deltas) >= 3 and np.all(gmean > 0) else None
    return DriftStudyResult(
        list(cfg["n_list"]), deltas, gmean.tolist(), (gap.std(axis=0, ddof=1) / math.sqrt(M)).tolist(),
        errs.mean(axis=0).tolist(), off.mean(axis=0).tolist(), envelope, slope, cfg,
    )


def bn_sweep(cfg: dict | None = None, preset: str | None = None) -> list[dict]:
    """b_n estimate, subgrid-refinement delta and (for exp(tA)) the uniform bound."""
    cfg = resolve(cfg, preset)
    model = build_model(cfg)
    paths = bn_paths(cfg, model)
    stride = max(1, cfg["refine"] * cfg["n_list"][-1] // cfg["n_list"][0])
    F = model.Q.sqrt_factor()
    hs2 = max(float(np.mean([hs_norm(p.op(j) @ F) ** 2 for p in paths])) for j in paths[0].node_indices(cfg["T"], stride))
    rows = []
    for dn in cfg["delta_list"]:
        S = model.semigroup
        row = {
            "delta_n": dn,
            "bn_hat": estimate_bn(S, paths, model.Q, dn, cfg["T"], cfg["subgrid"], stride),
            "refinement_delta": bn_refinement_delta(S, paths, model.Q, dn, cfg["T"], cfg["subgrid"], stride),
        }
        if isinstance(S, MatrixExpSemigroup):
            row["bound"] = bn_bound_uniform_squared(S.generator, dn, hs2)
        rows.append(row)
    return rows


def moment_check(Q: SpectralQ, delta: float, samples: int = 10 ** 6, seed: int = 0, chunk: int = 200_000) -> dict:
    """Sample second and fourth moments of ||dW|| against their closed forms."""
    if samples < 10 ** 4:
        raise ValueError("moment_check needs at least 10^4 samples")
    rng = make_rng(seed, 3)
    s2 = np.empty(samples)
    done = 0
    while done < samples:
        k = min(chunk, samples - done)
        dW = wiener_from_normals(Q, delta, rng.standard_normal((k, Q.rank)))
        s2[done: done + k] = np.einsum("ij,ij->i", dW, dW)
        done += k
    s4 = s2 ** 2
    report = {}
    for name, vals, theory in (
        ("second", s2, second_moment_theoretical(Q, delta)),
        ("fourth", s4, fourth_moment_theoretical(Q, delta)),
    ):
        mean = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(samples))
        report[name] = {
            "sample": mean,
            "stderr": se,
            "theory": theory,
            "rel_err": abs(mean - theory) / theory,
            "pass_3se": abs(mean - theory) <= 3 * se,
        }
    return report


def operator_algebra_suite(pairs: int = 1000, max_dim: int = 16, seed: int = 0) -> dict:
    """Randomised checks of the HS/operator-norm inequalities and friends."""
    rng = make_rng(seed, 5)
    t0 = time.perf_counter()
    chain = 0
    op_le_hs = 0
    for _ in range(pairs):
        a, b, c = rng.integers(1, max_dim + 1, size=3)
        L = rng.standard_normal((a, b)) * rng.exponential()
        K = rng.standard_normal((b, c)) * rng.exponential()
        lk = hs_norm(compose(L, K))
        lop, lhs, khs = op_norm(L), hs_norm(L), hs_norm(K)
        tol = 1e-12 * max(1.0, lhs * khs)
        if not (lk <= lop * khs + tol and lop * khs <= lhs * khs + tol):
            chain += 1
        if lop > lhs + 1e-12 * max(1.0, lhs):
            op_le_hs += 1
    psd_bad = 0
    exp_bad = 0
    trace_bad = 0
    for _ in range(50):
        d = int(rng.integers(1, max_dim + 1))
        X = rng.standard_normal((d, d))
        P = X @ X.T
        R = psd_sqrt(P).entries
        scale = 1.0 + hs_norm(P)
        if hs_norm(R @ R - P) > 1e-10 * scale or hs_norm(R @ P - P @ R) > 1e-9 * scale:
            psd_bad += 1
        A = rng.standard_normal((d, d)) / math.sqrt(d)
        s, t = rng.uniform(0, 1, size=2)
        lhs_m = matrix_exp(A, s + t).entries
        rhs_m = matrix_exp(A, s).entries @ matrix_exp(A, t).entries
        if op_norm(lhs_m - rhs_m) > 1e-9:
            exp_bad += 1
        lam_max = float(np.linalg.eigvalsh(P)[-1])
        for p in (2, 3):
            if trace_p(P, p) > lam_max ** (p - 1) * trace_p(P, 1) * (1 + 1e-12):
                trace_bad += 1
    elapsed = time.perf_counter() - t0
    return {
        "pairs": pairs,
        "chain_violations": chain,
        "op_le_hs_violations": op_le_hs,
        "psd_sqrt_failures": psd_bad,
        "semigroup_law_failures": exp_bad,
        "trace_p_bound_failures": trace_bad,
        "seconds": elapsed,
        "pass": chain == op_le_hs == psd_bad == exp_bad == trace_bad == 0,
    }
