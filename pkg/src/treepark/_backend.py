"""Kernel backend selection.

Imports the compiled Cython kernels when available and falls back to the
pure-Python reference implementation otherwise.  Set ``TREEPARK_PURE=1``
to force the fallback (used by the benchmark and the equivalence tests).
Both backends expose the same functions and return bit-identical results.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("TREEPARK_PURE", "").strip() in ("1", "true", "yes"):
    kernels = _kernels_py
    BACKEND_NAME = "python"
else:
    try:
        from . import _kernels  # type: ignore[attr-defined]

        kernels = _kernels
        BACKEND_NAME = "cython"
    except ImportError:
        kernels = _kernels_py
        BACKEND_NAME = "python"


def backend_name() -> str:
    """Name of the active kernel backend: 'cython' or 'python'."""
    return BACKEND_NAME


def get_kernels(pure: bool = False):
    """Return the kernel module (optionally forcing the pure fallback)."""
    return _kernels_py if pure else kernels
