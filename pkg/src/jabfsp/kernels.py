"""Backend selection for the subspace-pursuit hot loop.

The compiled extension is used when it was built; set ``JABFSP_PURE_PYTHON=1``
to force the NumPy fallback.
"""
from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("JABFSP_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND: str = _impl.BACKEND
block_energies = _impl.block_energies
find_top = _impl.find_top
solve_support = _impl.solve_support
asp = _impl.asp


def backends() -> dict:
    """Every importable backend module, keyed by name."""
    found = {"python": _pykernels}
    try:
        from . import _kernels

        found["cython"] = _kernels
    except ImportError:
        pass
    return found
