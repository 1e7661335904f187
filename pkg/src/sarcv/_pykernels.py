"""NumPy versions of the inner loops in ``_ckernels.pyx``."""
import numpy as np


def mild_recursion(S, inc, y0):
    """states[0] = y0, states[i] = S @ states[i-1] + inc[i-1]."""
    S = np.ascontiguousarray(S, dtype=float)
    inc = np.ascontiguousarray(inc, dtype=float)
    n, d = inc.shape
    if S.shape != (d, d) or np.shape(y0) != (d,):
        raise ValueError("dimension mismatch in mild_recursion")
    out = np.empty((n + 1, d))
    out[0] = y0
    if np.array_equal(S, np.eye(d)):
        np.cumsum(inc, axis=0, out=out[1:])
        out[1:] += out[0]
        return out
    for i in range(1, n + 1):
        out[i] = S @ out[i - 1] + inc[i - 1]
    return out


def sarcv_sup_error(x, q):
    """max_i || sum_{l<=i} (x_l x_l^T - q_l) ||_F over i = 0..n."""
    x = np.asarray(x, dtype=float)
    q = np.asarray(q, dtype=float)
    n, d = x.shape
    if q.shape[1:] != (d, d) or q.shape[0] not in (1, n):
        raise ValueError("dimension mismatch in sarcv_sup_error")
    terms = x[:, :, None] * x[:, None, :] - q
    running = np.cumsum(terms, axis=0)
    norms = np.sqrt(np.einsum("iab,iab->i", running, running))
    return float(max(0.0, norms.max())) if n else 0.0
