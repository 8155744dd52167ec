"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; the pure-Python
twin is the fallback.  ``RRNN_PURE_PYTHON=1`` forces the fallback, and
``select()`` lets benchmarks and tests switch explicitly at runtime.
"""

import os

from . import _core_py

try:
    from . import _core as _compiled
except ImportError:
    _compiled = None

kernels = _core_py
name = "python"

if os.environ.get("RRNN_PURE_PYTHON") != "1" and _compiled is not None:
    kernels = _compiled
    name = "compiled"


def available():
    backs = ["python"]
    if _compiled is not None:
        backs.append("compiled")
    return backs


def select(backend):
    """Switch the active kernel set; returns the previously active name."""
    global kernels, name
    previous = name
    if backend == "python":
        kernels = _core_py
    elif backend == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available in this build")
        kernels = _compiled
    else:
        raise ValueError(f"unknown backend {backend!r}")
    name = backend
    return previous
