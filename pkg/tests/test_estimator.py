import numpy as np
import pytest

from sarcv.estimator import (
    OperatorPath,
    adjusted_increments,
    qv_increments,
    read_operator_path_csv,
    sarcv,
    sarcv_sup_error,
    sup_hs_error,
    true_qv,
    write_operator_path_csv,
)
from sarcv.noise import SpectralQ
from sarcv.semigroup import IdentitySemigroup, MatrixExpSemigroup, ShiftSemigroup
from sarcv.simulate import Trajectory, simulate_mild_path
from sarcv.spaces import FilipovicSpace
from sarcv.volmodels import VolPath


def make_traj(states, dn):
    states = np.asarray(states, dtype=float)
    return Trajectory(np.arange(states.shape[0]) * dn, states, dn)


def test_identity_plain_increments(rng):
    Y = rng.standard_normal((5, 3))
    np.testing.assert_allclose(adjusted_increments(make_traj(Y, 0.25), IdentitySemigroup(3)), np.diff(Y, axis=0))


def test_flow_removed(rng):
    S = MatrixExpSemigroup(rng.standard_normal((3, 3)))
    h0 = rng.standard_normal(3)
    Y = np.array([S.apply(0.25 * i, h0) for i in range(5)])
    np.testing.assert_allclose(adjusted_increments(make_traj(Y, 0.25), S), 0.0, atol=1e-12)


def test_shift_increment_oracle(rng):
    sp = FilipovicSpace.uniform(0.5, 2.0, 16)
    S = ShiftSemigroup(sp)
    dn = sp.grid[2] - sp.grid[0]  # two grid cells
    curves = rng.standard_normal((4, sp.dim))
    traj = make_traj(sp.to_ortho(curves), dn)
    adj = sp.from_ortho(adjusted_increments(traj, S))
    for i in range(1, 4):
        prev = curves[i - 1]
        shifted = np.array([prev[min(k + 2, sp.m)] for k in range(sp.dim)])
        np.testing.assert_allclose(adj[i - 1], curves[i] - shifted, atol=1e-9)


def test_grid_checks(rng):
    traj = make_traj(rng.standard_normal((4, 2)), 0.25)
    with pytest.raises(ValueError):
        adjusted_increments(traj, IdentitySemigroup(2), 0.5)
    with pytest.raises(ValueError):
        adjusted_increments(traj, IdentitySemigroup(3))
    bad = Trajectory([0.0, 0.2, 0.5], rng.standard_normal((3, 2)), 0.25)
    with pytest.raises(ValueError):
        adjusted_increments(bad, IdentitySemigroup(2))


def test_sarcv_zero_and_single(rng):
    path = sarcv(make_traj(np.zeros((5, 2)), 0.25), IdentitySemigroup(2))
    assert not np.any(path.ops)
    x = rng.standard_normal(3)
    one = sarcv(make_traj(np.vstack([np.zeros(3), x]), 1.0), IdentitySemigroup(3))
    np.testing.assert_allclose(one.at(1), np.outer(x, x))
    np.testing.assert_array_equal(one.at(0), 0.0)


def test_sarcv_trace_identity(rng):
    S = MatrixExpSemigroup(rng.standard_normal((4, 4)) * 0.3)
    traj = make_traj(rng.standard_normal((9, 4)), 0.125)
    x = adjusted_increments(traj, S)
    assert np.trace(sarcv(traj, S).final()) == pytest.approx(np.sum(x ** 2), rel=1e-12)


def test_true_qv_constant():
    Q = SpectralQ.diagonal([0.5, 0.25])
    qv = true_qv(VolPath([0.0], np.eye(2)), Q, 0.125, 1.0, 4)
    np.testing.assert_allclose(qv.final(), np.diag([0.5, 0.25]), rtol=1e-13)
    sigma = np.array([[1.0, 2.0], [0.0, 1.0]])
    qv = true_qv(VolPath([0.0], sigma), Q, 0.125, 1.0, 4)
    np.testing.assert_allclose(qv.at(4), 0.5 * sigma @ Q.matrix() @ sigma.T, rtol=1e-13)


def test_true_qv_time_varying():
    errs = []
    for R in (8, 16, 32):
        n = 16
        times = np.linspace(0, 1, n * R + 1)
        vol = VolPath(times, times[:, None, None] * np.eye(2))
        qv = true_qv(vol, SpectralQ.diagonal([1.0, 1.0]), 1 / n, 1.0, R)
        errs.append(abs(qv.final()[0, 0] - 1 / 3))
    assert errs[-1] < 2e-3
    assert errs[0] / errs[-1] == pytest.approx(4.0, rel=0.05)


def test_qv_requires_long_path():
    vol = VolPath(np.linspace(0, 1, 5), np.stack([np.eye(2)] * 5))
    with pytest.raises(ValueError):
        qv_increments(vol, SpectralQ.diagonal([1.0, 1.0]), 0.25, 1.0, 4)


def test_sup_hs_error(rng):
    ops = rng.standard_normal((6, 3, 3))
    t = np.arange(6.0)
    a = OperatorPath(t, ops)
    assert sup_hs_error(a, a) == 0.0
    c = np.full((3, 3), 2.0)
    assert sup_hs_error(OperatorPath(t, np.broadcast_to(c, (6, 3, 3))), OperatorPath(t, np.zeros((6, 3, 3)))) == pytest.approx(6.0)
    b = OperatorPath(t, rng.standard_normal((6, 3, 3)))
    ref = max(np.sqrt(np.sum((ops[i] - b.ops[i]) ** 2)) for i in range(6))
    assert sup_hs_error(a, b) == pytest.approx(ref, rel=1e-14)
    with pytest.raises(ValueError):
        sup_hs_error(a, OperatorPath(t[:5], ops[:5]))


def test_fused_error_matches_paths():
    Q = SpectralQ.geometric(3, 0.5)
    S = MatrixExpSemigroup(np.diag([-0.5, 0.1, 0.3]))
    times = np.linspace(0, 1, 65)
    vol = VolPath(times, np.stack([np.eye(3) * (1 + t) for t in times]))
    traj = simulate_mild_path(S, vol, Q, None, 1 / 16, 1.0, 4, seed=3)
    direct = sup_hs_error(sarcv(traj, S), true_qv(vol, Q, 1 / 16, 1.0, 4))
    for backend in ("python", None):
        assert sarcv_sup_error(traj, S, vol, Q, 4, backend=backend) == pytest.approx(direct, rel=1e-12)


def test_operator_path_csv_round_trip(rng):
    p = OperatorPath(np.arange(4) * 0.25, rng.standard_normal((4, 2, 3)))
    back = read_operator_path_csv(write_operator_path_csv(p))
    np.testing.assert_array_equal(back.ops, p.ops)
    np.testing.assert_array_equal(back.times, p.times)
    with pytest.raises(ValueError):
        read_operator_path_csv("x,m_0_0\n0,1\n")
