"""Triangulations with tagged boundary edges.

The Delaunay refinement kernel is compiled with Cython when available; the
identical pure-Python source is used otherwise (``KERNEL_BACKEND`` tells which).
"""

from ._backend import KERNEL_BACKEND, load_python_kernel
from .core import (
    DEFAULT_BC,
    DIRICHLET,
    NEUMANN,
    NO_GRADING,
    ROBIN,
    TAG_NAMES,
    Grading,
    Mesh,
    SizingField,
    load_mesh,
    refine,
    save_mesh,
    set_default_cache_dir,
    sizing_field,
    tag_code,
    triangulate,
    validate,
)

__all__ = [
    "KERNEL_BACKEND", "load_python_kernel", "DEFAULT_BC", "DIRICHLET", "NEUMANN", "NO_GRADING", "ROBIN",
    "TAG_NAMES", "Grading", "Mesh", "SizingField", "load_mesh", "refine", "save_mesh", "set_default_cache_dir", "sizing_field",
    "tag_code", "triangulate", "validate",
]
