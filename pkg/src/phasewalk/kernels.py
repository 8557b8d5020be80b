"""Kernel backend selection.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``PHASEWALK_PURE_PYTHON=1`` is set, the pure-Python
reference kernels are used.  ``BACKEND`` names the active one.
"""
import os

from . import _kernels_py

_compiled = None
if os.environ.get("PHASEWALK_PURE_PYTHON") != "1":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

_impl = _compiled if _compiled is not None else _kernels_py

BACKEND: str = _impl.BACKEND
rk4_path = _impl.rk4_path
dp_sweep = _impl.dp_sweep
region_rollout = _impl.region_rollout

# scalar helpers are always Python; they define the shared arithmetic
stage_step = _kernels_py.stage_step
snap_index = _kernels_py.snap_index


def backends() -> dict:
    """All importable backends by name, for benchmarks and parity tests."""
    out = {"python": _kernels_py}
    if _compiled is not None:
        out["cython"] = _compiled
    else:
        try:
            from . import _kernels

            out["cython"] = _kernels
        except ImportError:
            pass
    return out
