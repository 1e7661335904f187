"""Backend selection for the hot loops.

The compiled extension ``sarcv._ckernels`` is used when it imports; set
``SARCV_PURE_PYTHON=1`` to force the NumPy fallback.
"""
import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels
if os.environ.get("SARCV_PURE_PYTHON", "") != "1":
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels


def get_backend(name: str | None = None):
    """Kernel module by name (``"cython"`` or ``"python"``); default: the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


def mild_recursion(S, inc, y0, backend=None):
    mod = get_backend(backend)
    return mod.mild_recursion(
        np.ascontiguousarray(S, dtype=float),
        np.ascontiguousarray(inc, dtype=float),
        np.ascontiguousarray(y0, dtype=float),
    )


def sarcv_sup_error(x, q, backend=None):
    mod = get_backend(backend)
    q = np.asarray(q, dtype=float)
    if q.ndim == 2:
        q = q[None]
    return float(mod.sarcv_sup_error(np.ascontiguousarray(x, dtype=float), np.ascontiguousarray(q)))
