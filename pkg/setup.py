"""Build configuration for the optional compiled mesh kernel.

The kernel source is a pure-Python-mode Cython file; if Cython or a C compiler
is unavailable the package still installs and uses the interpreted kernel.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "robinspec.mesh._delaunay",
                ["src/robinspec/mesh/_delaunay.py"],
                extra_compile_args=["-O2", "-ffp-contract=off"],
                optional=True,
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )

setup(ext_modules=ext_modules)
