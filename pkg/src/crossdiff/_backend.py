"""Pick the compiled face kernels when available.

Set ``CROSSDIFF_PURE_PYTHON=1`` to force the NumPy fallback.
"""
import os

from . import _kernels_py

kernels = _kernels_py
BACKEND = "python"

if not os.environ.get("CROSSDIFF_PURE_PYTHON"):
    try:
        from . import _kernels as kernels  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass

__all__ = ["kernels", "BACKEND", "_kernels_py"]
