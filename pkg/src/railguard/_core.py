"""Kernel backend selection.

The compiled extension is used when it imports; set ``RAILGUARD_PURE_PYTHON=1``
to force the pure-Python kernels.
"""
import os

from . import _kernels_py

BACKEND = "python"
pair_gaps = _kernels_py.pair_gaps
enumerate_optimum = _kernels_py.enumerate_optimum

if os.environ.get("RAILGUARD_PURE_PYTHON", "").strip().lower() not in ("1", "true", "yes"):
    try:
        from . import _kernels
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        pair_gaps = _kernels.pair_gaps
        enumerate_optimum = _kernels.enumerate_optimum
