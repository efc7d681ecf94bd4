"""Build the optional Cython alignment kernel.

The package works without it: usfkit.alignment falls back to the pure-Python
implementation when usfkit._speedups is not importable.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("usfkit._speedups", ["src/usfkit/_speedups.pyx"])],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
