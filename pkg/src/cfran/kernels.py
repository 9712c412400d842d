"""Backend selection for the graph-coloring kernels.

The compiled extension is used when it imports; set ``CFRAN_PURE_PYTHON=1`` to
force the numpy fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("CFRAN_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # pragma: no cover - depends on the build
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

dsatur = _impl.dsatur
tabucol = _impl.tabucol
