"""Build hook for the optional compiled kernels.

The package works without a C compiler; ``phasewalk.kernels`` falls back to
the pure-Python implementations when the extension is missing.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("PHASEWALK_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "phasewalk._kernels",
                    ["src/phasewalk/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    # keep IEEE semantics identical to the Python fallback
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
