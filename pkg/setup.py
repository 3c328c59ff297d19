"""Build script: compiles the Cython simulation kernels.

If Cython or a C compiler is unavailable the extension is skipped and the
package falls back to the pure-Python kernels at import time (much slower,
same results bit for bit).
"""

import sys

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "treepark._kernels",
                ["src/treepark/_kernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    print("warning: Cython not available, building without compiled kernels", file=sys.stderr)
    ext_modules = []

setup(ext_modules=ext_modules)
