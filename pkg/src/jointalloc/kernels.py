"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
reference is used.  Set ``JOINTALLOC_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("JOINTALLOC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py

rate_exponent = _impl.rate_exponent
min_bandwidth = _impl.min_bandwidth
inv_min_bandwidth = _impl.inv_min_bandwidth
psi_inverse = _impl.psi_inverse
solve_single_source = _impl.solve_single_source

__all__ = [
    "BACKEND",
    "rate_exponent",
    "min_bandwidth",
    "inv_min_bandwidth",
    "psi_inverse",
    "solve_single_source",
]
