"""Stepping-kernel backend selection.

The compiled extension (`_fastcore`, Cython) is preferred; the numpy
reference (`_ref`) is used when the extension is missing or when the
environment variable GAPSOL_PURE_PYTHON is set to a non-empty value.
Both expose the same entry points and implement the same arithmetic, so
results agree to floating-point roundoff (see tests/test_kernels.py and
benchmarks/bench_kernels.py).
"""

import os

from . import _ref

if os.environ.get("GAPSOL_PURE_PYTHON"):
    _impl = _ref
else:
    try:
        from . import _fastcore as _impl
    except ImportError:
        _impl = _ref

BACKEND = _impl.BACKEND
make_plan = _impl.make_plan
gpe_strang_steps = _impl.gpe_strang_steps
pair_strang_steps = _impl.pair_strang_steps


def backend_name():
    return BACKEND


def get_backend(name):
    """Return a specific backend module ('cython' or 'numpy'); for benchmarks."""
    if name == "numpy":
        return _ref
    if name == "cython":
        from . import _fastcore

        return _fastcore
    raise ValueError(f"unknown kernel backend {name!r}")
