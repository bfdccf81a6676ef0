"""Build script: compiles the optional Cython kernel core.

The package works without the extension (numpy fallback is selected at
import time), so a failed compile only costs speed. `pip install -e .
--no-build-isolation` builds it in place when Cython and a C compiler
are available.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "acsnet.kernels._core",
                sources=["src/acsnet/kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    sys.stderr.write(f"acsnet: skipping compiled kernels ({exc}); "
                     "falling back to pure numpy backend\n")

setup(ext_modules=ext_modules)
