"""Build script for the optional compiled kernels.

The package works without them: ``molcomm._backend`` falls back to the
pure-numpy implementations when ``molcomm._speedups`` cannot be imported.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("MOLCOMM_NO_EXTENSIONS"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "molcomm._speedups",
                    ["src/molcomm/_speedups.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
