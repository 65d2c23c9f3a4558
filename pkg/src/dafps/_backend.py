"""Select the compiled kernels when available, else the numpy fallback.

Set ``DAFPS_BACKEND=python`` to force the fallback.
"""

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

AVAILABLE = {"python": _kernels_py}
if _compiled is not None:
    AVAILABLE["cython"] = _compiled


def get_backend(name=None):
    """Return the kernel module registered under ``name`` (default: best)."""
    if name is None:
        name = os.environ.get("DAFPS_BACKEND") or ("cython" if "cython" in AVAILABLE else "python")
    try:
        return AVAILABLE[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available; have {sorted(AVAILABLE)}") from None


kernels = get_backend()
BACKEND = "cython" if kernels is _compiled and _compiled is not None else "python"
