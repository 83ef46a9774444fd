"""Builds the optional compiled kernel extension.

The package is fully functional without it (the numpy backend is selected
at import time when the extension is absent), so a failed compile only
costs the compiled-kernel benchmark lane.
"""
import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "posemetric.nn._ckernels",
        ["src/posemetric/nn/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
)
