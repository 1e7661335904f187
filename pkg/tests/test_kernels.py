import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sarcv import kernels

BACKENDS = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])


def naive_recursion(S, inc, y0):
    out = [np.array(y0, dtype=float)]
    for row in inc:
        prev = out[-1]
        out.append(np.array([sum(S[a, b] * prev[b] for b in range(len(prev))) for a in range(len(prev))]) + row)
    return np.array(out)


def naive_sup_error(x, q):
    d = x.shape[1]
    run = np.zeros((d, d))
    best = 0.0
    for i in range(x.shape[0]):
        qi = q[0] if q.shape[0] == 1 else q[i]
        for a in range(d):
            for b in range(d):
                run[a, b] += x[i, a] * x[i, b] - qi[a, b]
        best = max(best, float(np.sqrt(np.sum(run ** 2))))
    return best


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@pytest.mark.parametrize("backend", BACKENDS)
def test_mild_recursion_oracle(backend, rng):
    S = rng.standard_normal((4, 4)) * 0.5
    inc = rng.standard_normal((7, 4))
    y0 = rng.standard_normal(4)
    np.testing.assert_allclose(kernels.mild_recursion(S, inc, y0, backend=backend), naive_recursion(S, inc, y0), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_mild_recursion_identity_is_cumsum(backend, rng):
    inc = rng.standard_normal((9, 3))
    out = kernels.mild_recursion(np.eye(3), inc, np.zeros(3), backend=backend)
    np.testing.assert_allclose(out[1:], np.cumsum(inc, axis=0), rtol=1e-13, atol=1e-14)


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("shared", [True, False])
def test_sup_error_oracle(backend, shared, rng):
    x = rng.standard_normal((11, 3))
    q = rng.standard_normal((1 if shared else 11, 3, 3))
    assert kernels.sarcv_sup_error(x, q, backend=backend) == pytest.approx(naive_sup_error(x, q), rel=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_sup_error_zero(backend):
    assert kernels.sarcv_sup_error(np.zeros((5, 2)), np.zeros((1, 2, 2)), backend=backend) == 0.0


@given(st.integers(1, 6), st.integers(1, 20), st.integers(0, 2 ** 31))
def test_backends_agree(d, n, seed):
    r = np.random.default_rng(seed)
    S = r.standard_normal((d, d)) / d
    inc = r.standard_normal((n, d))
    q = r.standard_normal((n, d, d))
    ref = kernels.mild_recursion(S, inc, np.zeros(d), backend="python")
    e_ref = kernels.sarcv_sup_error(inc, q, backend="python")
    for b in BACKENDS:
        np.testing.assert_allclose(kernels.mild_recursion(S, inc, np.zeros(d), backend=b), ref, rtol=1e-12, atol=1e-12)
        assert kernels.sarcv_sup_error(inc, q, backend=b) == pytest.approx(e_ref, rel=1e-12)


def test_shape_checks():
    with pytest.raises(ValueError):
        kernels.mild_recursion(np.eye(2), np.zeros((3, 3)), np.zeros(2))
    with pytest.raises(ValueError):
        kernels.sarcv_sup_error(np.zeros((3, 2)), np.zeros((2, 2, 2)))
