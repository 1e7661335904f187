import numpy as np
import pytest

from sarcv.noise import SpectralQ, make_rng, wiener_from_normals
from sarcv.semigroup import IdentitySemigroup, MatrixExpSemigroup, ShiftSemigroup
from sarcv.simulate import (
    Trajectory,
    aggregate_increments,
    fine_grid,
    hjm_drift,
    observation_count,
    read_trajectory_csv,
    simulate_mild_path,
    write_trajectory_csv,
)
from sarcv.spaces import FilipovicSpace
from sarcv.volmodels import VolPath, mode_volatility

Q3 = SpectralQ.geometric(3, 0.5)


def test_observation_count():
    assert observation_count(1 / 64, 1.0) == 64
    assert observation_count(0.3, 1.0) == 3
    with pytest.raises(ValueError):
        observation_count(0.0, 1.0)
    assert fine_grid(0.25, 1.0, 2).size == 9


def test_identity_path_is_wiener_sum():
    n, R, dn = 16, 4, 1 / 16
    traj = simulate_mild_path(IdentitySemigroup(3), VolPath([0.0], np.eye(3)), Q3, None, dn, 1.0, R, seed=5)
    xi = make_rng(5, 0).standard_normal((n * R, 3))
    dW = wiener_from_normals(Q3, dn / R, xi)
    ref = np.vstack([np.zeros(3), np.cumsum(dW, axis=0)[R - 1:: R]])
    np.testing.assert_allclose(traj.states, ref, rtol=1e-12, atol=1e-14)


def test_deterministic_flow(rng):
    A = rng.standard_normal((3, 3))
    S = MatrixExpSemigroup(A)
    h0 = rng.standard_normal(3)
    traj = simulate_mild_path(S, VolPath([0.0], np.zeros((3, 3))), Q3, h0, 0.125, 1.0, 2, seed=0)
    for t, y in zip(traj.obs_times, traj.states):
        np.testing.assert_allclose(y, S.apply(t, h0), rtol=1e-9, atol=1e-12)


def test_scalar_ode_drift():
    S = MatrixExpSemigroup([[-1.0]])
    Q = SpectralQ.diagonal([1.0])
    zero = VolPath([0.0], np.zeros((1, 1)))
    errs = []
    for R in (4, 8, 16, 32):
        traj = simulate_mild_path(S, zero, Q, None, 0.125, 1.0, R, drift=np.array([2.0]))
        errs.append(abs(traj.states[-1, 0] - 2.0 * (1 - np.exp(-1.0))))
    errs = np.array(errs)
    # left-point Riemann error: O(delta) and halving with R
    assert errs[-1] < 1e-2
    np.testing.assert_allclose(errs[:-1] / errs[1:], 2.0, rtol=0.05)


def test_interval_sums_recovered_r1(rng):
    sp = FilipovicSpace.uniform(0.5, 2.0, 16)
    S = ShiftSemigroup(sp)
    sigma = rng.standard_normal((sp.dim, 2))
    Q = SpectralQ.diagonal([1.0, 0.3])
    traj = simulate_mild_path(S, VolPath([0.0], sigma), Q, None, 0.125, 1.0, 1, seed=2)
    adj = traj.states[1:] - S.apply(0.125, traj.states[:-1])
    np.testing.assert_allclose(adj, traj.interval_sums, atol=1e-12)


def test_refinement_consistency_matched_noise():
    S = MatrixExpSemigroup(np.array([[-0.5, 0.2], [0.0, -0.3]]))
    Q = SpectralQ.diagonal([1.0, 0.5])
    n, T = 8, 1.0
    Rmax = 256
    times = np.linspace(0, T, n * Rmax + 1)
    vol_f = VolPath(times, np.stack([np.eye(2) * (1 + 0.5 * np.sin(3 * t)) for t in times]))
    dW_f = wiener_from_normals(Q, T / (n * Rmax), make_rng(3, 0).standard_normal((n * Rmax, 2)))
    ref = simulate_mild_path(S, vol_f, Q, None, T / n, T, Rmax, noise=dW_f).states
    pairs = []
    for R in (4, 8, 16, 32):
        k = Rmax // R
        traj = simulate_mild_path(S, vol_f.subsample(k), Q, None, T / n, T, R, noise=aggregate_increments(dW_f, k))
        pairs.append((T / (n * R), np.max(np.linalg.norm(traj.states - ref, axis=1))))
    pairs = np.array(pairs)
    slope = np.polyfit(np.log(pairs[:, 0]), np.log(pairs[:, 1]), 1)[0]
    assert slope >= 0.4


def test_aggregate_increments(rng):
    dW = rng.standard_normal((8, 2))
    np.testing.assert_allclose(aggregate_increments(dW, 4), [dW[:4].sum(0), dW[4:].sum(0)])
    assert aggregate_increments(dW, 1) is dW
    with pytest.raises(ValueError):
        aggregate_increments(dW, 3)


def test_simulate_validation():
    S = IdentitySemigroup(3)
    with pytest.raises(ValueError):
        simulate_mild_path(S, VolPath([0.0], np.eye(2)), Q3, None, 0.25, 1.0, 2)
    with pytest.raises(ValueError):
        simulate_mild_path(S, VolPath([0.0], np.eye(3)), Q3, None, 0.25, 1.0, 0)
    short = VolPath(np.linspace(0, 1, 5), np.stack([np.eye(3)] * 5))
    with pytest.raises(ValueError):
        simulate_mild_path(S, short, Q3, None, 0.25, 1.0, 2)
    with pytest.raises(ValueError):
        simulate_mild_path(S, VolPath([0.0], np.eye(3)), Q3, None, 0.25, 1.0, 2, noise=np.zeros((3, 3)))
    with pytest.raises(ValueError):
        simulate_mild_path(S, VolPath([0.0], np.eye(3)), Q3, None, 0.25, 1.0, 2, drift=np.ones(2))


SP = FilipovicSpace.uniform(0.5, 5.0, 32)


def test_hjm_drift_zero_vol():
    vol = VolPath(np.linspace(0, 1, 5), np.zeros((SP.dim, 2)))
    np.testing.assert_array_equal(hjm_drift(vol, SpectralQ.diagonal([1.0, 0.5]), SP), 0.0)


def test_hjm_drift_single_mode():
    x = SP.grid
    c = 0.7
    g = np.sin(np.pi * x / x[-1])
    g[-1] = 0.0
    sigma = SP.to_ortho(c * g)[:, None]
    times = np.linspace(0, 1, 9)
    alpha = hjm_drift(VolPath(times, sigma), SpectralQ.diagonal([1.0]), SP)
    for t, a in zip(times, alpha):
        np.testing.assert_allclose(a, t * c ** 2 * g * g, atol=1e-10)


def test_hjm_drift_additive():
    times = np.linspace(0, 1, 9)
    sig = mode_volatility(SP, 2)
    Q = SpectralQ.diagonal([1.0, 0.25])
    both = hjm_drift(VolPath(times, sig), Q, SP)
    one = hjm_drift(VolPath(times, sig[:, :1]), SpectralQ.diagonal([1.0]), SP)
    two = hjm_drift(VolPath(times, sig[:, 1:] * 0.5), SpectralQ.diagonal([1.0]), SP)
    np.testing.assert_allclose(both, one + two, atol=1e-10)


def test_hjm_drift_requires_vanishing():
    sigma = SP.to_ortho(np.ones(SP.dim))[:, None]
    with pytest.raises(ValueError):
        hjm_drift(VolPath([0.0, 1.0], sigma), SpectralQ.diagonal([1.0]), SP)


def test_trajectory_csv_round_trip():
    traj = simulate_mild_path(IdentitySemigroup(3), VolPath([0.0], np.eye(3)), Q3, None, 0.25, 1.0, 2, seed=1)
    back = read_trajectory_csv(write_trajectory_csv(traj))
    np.testing.assert_array_equal(back.states, traj.states)
    np.testing.assert_array_equal(back.obs_times, traj.obs_times)
    assert back.delta_n == traj.delta_n
    assert back.meta["semigroup"]["kind"] == "identity"


def test_trajectory_csv_errors():
    with pytest.raises(ValueError):
        read_trajectory_csv("t,y0\n0.0,1.0\n")
    with pytest.raises(ValueError):
        read_trajectory_csv('# {"d": 2, "delta_n": 0.5}\nt,y0\n0.0,1.0\n')


def test_trajectory_rejects_nan():
    with pytest.raises(ValueError):
        Trajectory([0.0, 1.0], [[0.0], [np.nan]], 1.0)
