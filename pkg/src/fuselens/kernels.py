"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy
fallback. Setting ``FUSELENS_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _fallback

BACKENDS = {"python": _fallback}

try:
    from . import _kernels
except ImportError:  # extension not built
    _kernels = None
else:
    BACKENDS["cython"] = _kernels

if _kernels is not None and not os.environ.get("FUSELENS_PURE_PYTHON"):
    BACKEND = "cython"
else:
    BACKEND = "python"

_impl = BACKENDS[BACKEND]
sl_pairwise = _impl.sl_pairwise
mef_patch_terms = _impl.mef_patch_terms


def get_backend(name=None):
    """Kernel module by name (``"cython"`` or ``"python"``); default is the active one."""
    name = name or BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
