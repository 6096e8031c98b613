"""Execution backends for the stepping kernel.

The compiled Cython core is selected at import when available; the numpy
twin implements the same tape semantics and is used as a fallback (or when
``TORUSFLOW_BACKEND=python`` is set).  ``make_workspace`` is the only entry
point the flow engine uses.
"""

import os

from . import numpy_backend

try:
    from . import _core
except ImportError:
    _core = None

STATUS_OK = 0
STATUS_TABLE_RANGE = 2


def compiled_available():
    return _core is not None


def default_backend():
    forced = os.environ.get("TORUSFLOW_BACKEND", "").strip().lower()
    if forced in ("python", "numpy"):
        return "python"
    if forced == "compiled":
        if _core is None:
            raise RuntimeError("TORUSFLOW_BACKEND=compiled but the extension is not built")
        return "compiled"
    return "compiled" if _core is not None else "python"


def make_workspace(stencil, mode, tape, backend=None):
    """Build an execution workspace: .rhs(u, out) and .advance(u, n, dt)."""
    name = backend or default_backend()
    if name in ("python", "numpy"):
        return numpy_backend.NumpyWorkspace(stencil, mode, tape)
    if name == "compiled":
        if _core is None:
            raise RuntimeError("compiled backend requested but the extension is not built")
        return _core.CompiledWorkspace(stencil, mode, tape)
    raise ValueError(f"unknown backend {name!r}; use 'compiled' or 'python'")
