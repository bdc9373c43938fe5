"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure numpy fallback is selected
at import time); building it just makes training loops much faster. If
Cython or a C compiler is missing, installation proceeds without it.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "gflowlab._ckernels",
                ["src/gflowlab/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
        compiler_directives={"boundscheck": False, "wraparound": False, "cdivision": True},
    )
except ImportError as exc:
    print(f"gflowlab: compiled kernels skipped ({exc}); using pure-python fallback", file=sys.stderr)

setup(ext_modules=ext_modules)
