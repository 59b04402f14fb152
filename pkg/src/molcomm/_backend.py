"""Kernel selection.

The compiled extension is used when it imports; set ``MOLCOMM_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

from . import _pure

if os.environ.get("MOLCOMM_PURE_PYTHON", "").strip() not in ("", "0"):
    kernels = _pure
    BACKEND = "python"
else:
    try:
        from . import _speedups as kernels
    except ImportError:
        kernels = _pure
        BACKEND = "python"
    else:
        BACKEND = "cython"


def available():
    """All kernel modules that import on this machine, compiled first."""
    found = []
    try:
        from . import _speedups
    except ImportError:
        pass
    else:
        found.append(_speedups)
    found.append(_pure)
    return found


__all__ = ["BACKEND", "available", "kernels"]
