"""Acceptance criteria, each at its stated size and tolerance.

Every test prints one ``[PASS]`` / ``[FAIL]`` line; the lines are also
collected into the pytest terminal summary.
"""
import json
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from sarcv.cli import main
from sarcv.config import build_model, resolve
from sarcv.estimator import sarcv
from sarcv.harness import bn_slope_value, bn_sweep, convergence_study, drift_study, moment_check, operator_algebra_suite
from sarcv.noise import SpectralQ
from sarcv.opalg import hs_norm
from sarcv.semigroup import MatrixExpSemigroup
from sarcv.simulate import simulate_mild_path
from sarcv.volmodels import VolPath, bns_exact_path, bns_lipschitz_constant

pytestmark = pytest.mark.slow


def report(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_c1_operator_algebra():
    t0 = time.perf_counter()
    rep = operator_algebra_suite(pairs=1000, max_dim=16, seed=0)
    secs = time.perf_counter() - t0
    ok = rep["chain_violations"] == 0 and rep["op_le_hs_violations"] == 0 and secs < 5
    report(1, "HS/op norm chain on 1000 pairs", ok, f"violations={rep['chain_violations']}, {secs:.2f}s < 5s")


def test_c2_fourth_moment():
    t0 = time.perf_counter()
    rep = moment_check(SpectralQ.diagonal([0.5, 0.25]), 0.1, samples=10 ** 6, seed=0)
    secs = time.perf_counter() - t0
    sample = rep["fourth"]["sample"]
    rel = abs(sample - 0.011875) / 0.011875
    report(2, "fourth moment of dW", rel <= 0.02 and secs < 30, f"sample={sample:.6g}, rel err={rel:.3%} <= 2%, {secs:.2f}s < 30s")


def test_c3_martingale_rate():
    t0 = time.perf_counter()
    res = convergence_study(preset="martingale")
    secs = time.perf_counter() - t0
    assert res.config["replications"] == 200 and res.config["n_list"] == [16, 32, 64, 128, 256, 512, 1024]
    dec = all(b < a for a, b in zip(res.mean_err, res.mean_err[1:]))
    ok = dec and 0.40 <= res.slope <= 0.60 and secs < 600
    report(3, "martingale LLN rate", ok, f"slope={res.slope:.3f} in [0.40, 0.60], strictly decreasing={dec}, {secs:.1f}s")


def test_c4_uniform_case():
    rows = bn_sweep(preset="uniform")
    below = all(r["bn_hat"] <= r["bound"] for r in rows)
    res = convergence_study(preset="uniform")
    A = build_model(res.config).semigroup.generator
    assert abs(np.linalg.norm(A, 2) - 1.0) < 1e-12
    ok = below and res.slope >= 0.40
    worst = max(r["bn_hat"] / r["bound"] for r in rows)
    report(4, "uniformly continuous semigroup", ok, f"max bn/bound={worst:.3f} <= 1 over {len(rows)} deltas, slope={res.slope:.3f} >= 0.40")


def test_c5_shift_bn_slope():
    t0 = time.perf_counter()
    cfg = resolve(None, "shift")
    assert cfg["subgrid"] == 16 and cfg["delta_list"] == [2.0 ** -k for k in range(4, 11)]
    assert cfg["semigroup"]["m"] == 64
    rows = bn_sweep(cfg)
    slope = bn_slope_value([r["delta_n"] for r in rows], [r["bn_hat"] for r in rows])
    secs = time.perf_counter() - t0
    report(5, "shift semigroup b_n slope", slope >= 1.8 and secs < 300, f"slope={slope:.3f} >= 1.8, {secs:.1f}s < 300s")


def test_c6_drift_second_order():
    res = drift_study(preset="hjm")
    report(6, "drift contribution is O(delta_n)", res.slope >= 0.9, f"gap slope={res.slope:.3f} >= 0.9")


def test_c7_bns_holder():
    model = build_model(resolve(None, "bns")).vol_model
    T = 1.0
    L = bns_lipschitz_constant(model, T)
    s = np.linspace(0.0, 0.5, 20)
    h = np.geomspace(0.01, 0.5, 20)
    grid = np.unique(np.concatenate([s, s + h]))
    M = 2000
    sq = np.empty((M, 20))
    for r in range(M):
        P = bns_exact_path(model, grid, seed=r)
        for k in range(20):
            a, b = np.searchsorted(grid, s[k]), np.searchsorted(grid, s[k] + h[k])
            sq[r, k] = hs_norm(P[b] - P[a]) ** 2
    mean = sq.mean(axis=0)
    se = sq.std(axis=0, ddof=1) / math.sqrt(M)
    ok = bool(np.all(mean + 3 * se <= L ** 2 * h))
    worst = float(np.max((mean + 3 * se) / (L ** 2 * h)))
    report(7, "BNS mean-square Holder bound", ok, f"20 pairs, max (mean+3se)/(L^2 (t-s))={worst:.4f} <= 1")


def _brute_expm(A, t, terms=60):
    d = len(A)
    out = [[1.0 if i == j else 0.0 for j in range(d)] for i in range(d)]
    term = [row[:] for row in out]
    for k in range(1, terms):
        term = [[sum(term[i][m] * A[m][j] for m in range(d)) * t / k for j in range(d)] for i in range(d)]
        out = [[out[i][j] + term[i][j] for j in range(d)] for i in range(d)]
    return out


def test_c8_oracle_equivalence():
    A = [[-0.4, 0.3], [0.1, -0.2]]
    S = MatrixExpSemigroup(np.array(A))
    vol = VolPath([0.0], np.array([[1.0, 0.2], [0.0, 0.7]]))
    traj = simulate_mild_path(S, vol, SpectralQ.diagonal([1.0, 0.5]), np.array([0.3, -0.1]), 0.25, 1.0, 3, seed=17)
    lib = sarcv(traj, S).ops
    Y = traj.states.tolist()
    E = _brute_expm(A, 0.25)
    acc = [[0.0, 0.0], [0.0, 0.0]]
    worst = max(abs(v) for v in lib[0].ravel())
    for i in range(1, 5):
        inc = [Y[i][a] - (E[a][0] * Y[i - 1][0] + E[a][1] * Y[i - 1][1]) for a in range(2)]
        for a in range(2):
            for b in range(2):
                acc[a][b] += inc[a] * inc[b]
                worst = max(worst, abs(acc[a][b] - lib[i][a, b]))
    report(8, "SARCV vs brute-force oracle (d=2, n=4)", worst <= 1e-12, f"max entry diff={worst:.2e} <= 1e-12")


def test_c9_determinism(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"replications": 50, "semigroup": {"kind": "matrix_exp", "op_norm": 1.0}}))
    outputs = []
    for run, threads in enumerate([1, 8, 1, 8]):
        out = tmp_path / f"run{run}"
        assert main(["converge", "--config", str(cfg), "--seed", "99", "--threads", str(threads), "--out", str(out)]) == 0
        outputs.append(((out / "study.csv").read_bytes(), (out / "study.json").read_bytes()))
    ok = all(o == outputs[0] for o in outputs)
    report(9, "converge byte-identical across runs and thread counts", ok, "threads 1, 8, 1, 8")
