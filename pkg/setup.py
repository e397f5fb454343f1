import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # fallback kernels only
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("PATHGAMES_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "pathgames._kernels._core",
                ["src/pathgames/_kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
