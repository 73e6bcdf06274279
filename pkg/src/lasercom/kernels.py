"""Kernel selection: compiled extension when importable, pure Python otherwise.

Set ``LASERCOM_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
if os.environ.get("LASERCOM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
else:
    _impl = _kernels_py

ar1_filter = _impl.ar1_filter
span_linear_means = _impl.span_linear_means

__all__ = ["BACKEND", "ar1_filter", "span_linear_means"]
