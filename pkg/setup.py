"""Build hook for the optional compiled pixel kernels.

The package works without the extension (a numpy fallback is selected at
import time); the Cython build is best-effort so `pip install` never fails
on a machine without a compiler.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "densigraph._ckernels",
                sources=["src/densigraph/_ckernels.pyx"],
            )
        ],
        language_level="3",
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
