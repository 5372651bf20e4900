"""Hot loop kernels with a compiled core and a numpy fallback.

The compiled module is used when it imports; set ``DEEPGA_KERNELS=python`` to force
the fallback. ``use_backend`` switches at runtime (tests and the benchmark use it).
"""

import contextlib
import os

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

if os.environ.get("DEEPGA_KERNELS", "").lower() == "python" or _ckernels is None:
    _impl = _pykernels
else:
    _impl = _ckernels


def available_backends():
    return sorted(_BACKENDS)


def backend_name():
    return "cython" if _impl is _ckernels and _ckernels is not None else "python"


def get_backend(name):
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} not available; have {available_backends()}")


def set_backend(name):
    global _impl
    _impl = get_backend(name)


@contextlib.contextmanager
def use_backend(name):
    global _impl
    prev = _impl
    _impl = get_backend(name)
    try:
        yield
    finally:
        _impl = prev


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def euler_paths(x0, dW, dt, drift_rate, diff_scale, state_diag):
    return _impl.euler_paths(_c(x0), _c(dW), _c(dt), float(drift_rate), float(diff_scale),
                             bool(state_diag))


def bsde_forward(y0, s, q, dt, kind, coeffs):
    return _impl.bsde_forward(_c(np.atleast_1d(y0)), _c(s), _c(q), _c(dt), int(kind), _c(coeffs))


def bsde_adjoint(y, dyN, q, dt, kind, coeffs):
    return _impl.bsde_adjoint(_c(y), _c(dyN), _c(q), _c(dt), int(kind), _c(coeffs))


def hjb_g_samples(rng, x0, horizon, n):
    return _impl.hjb_g_samples(rng, _c(x0), float(horizon), int(n))
