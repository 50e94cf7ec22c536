"""Support-scan backend selection.

The compiled extension is preferred; set QKCALC_PURE=1 to force the numpy
fallback.
"""

import os

from . import _support_py

BACKEND = "python"
max_support_distance = _support_py.max_support_distance

if os.environ.get("QKCALC_PURE") != "1":
    try:
        from . import _support_c
    except ImportError:
        pass
    else:
        max_support_distance = _support_c.max_support_distance
        BACKEND = "cython"

__all__ = ["BACKEND", "max_support_distance"]
