"""Build script: compiles the optional fast-kernel extension.

Set AINET_SKIP_EXT=1 to install without the compiled backend; the package
then runs on the pure-numpy kernels selected at import time.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("AINET_SKIP_EXT", "0") != "1":
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "ainet._backend._ckernels",
                ["src/ainet/_backend/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
