"""Eigenvalues of Robin Laplacians with large parameter on (curvilinear) polygons."""

__version__ = "0.1.0"

from . import errors  # noqa: E402,F401
