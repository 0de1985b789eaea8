import os

from setuptools import setup

ext_modules = []
if os.environ.get("MESHSAL_SKIP_EXT") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension
        import numpy as np

        ext_modules = cythonize(
            [
                Extension(
                    "meshsal._kernels._core",
                    ["src/meshsal/_kernels/_core.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ]
        )
    except ImportError:
        # No Cython available: install pure-Python only, the kernel
        # dispatcher falls back at import time.
        ext_modules = []

setup(ext_modules=ext_modules)
