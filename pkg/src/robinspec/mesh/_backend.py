"""Select the triangulation kernel: the compiled extension when present, else the same source interpreted.

Set ``ROBINSPEC_PURE_PYTHON=1`` to force the interpreted kernel.
"""

from __future__ import annotations

import importlib
import importlib.util
import os
import sys
from pathlib import Path

_SOURCE = Path(__file__).with_name("_delaunay.py")


def load_python_kernel():
    """Import ``_delaunay.py`` as plain Python even if a compiled module sits next to it."""
    name = "robinspec.mesh._delaunay_py"
    if name in sys.modules:
        return sys.modules[name]
    spec = importlib.util.spec_from_file_location(name, _SOURCE)
    mod = importlib.util.module_from_spec(spec)
    sys.modules[name] = mod
    spec.loader.exec_module(mod)
    return mod


def load_kernel():
    if os.environ.get("ROBINSPEC_PURE_PYTHON", "").strip() not in ("", "0"):
        return load_python_kernel(), "python"
    try:
        mod = importlib.import_module("robinspec.mesh._delaunay")
    except ImportError:  # pragma: no cover - source is always shipped
        return load_python_kernel(), "python"
    backend = "compiled" if not str(getattr(mod, "__file__", "")).endswith(".py") else "python"
    return mod, backend


kernel, KERNEL_BACKEND = load_kernel()
