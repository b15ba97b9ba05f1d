"""Build script for the optional compiled kernel backend.

The package is fully functional without the extension (a pure numpy
backend is selected at import time); the extension accelerates the
likelihood/residual recursions that dominate calibration runtime.
"""

from setuptools import setup
from setuptools.extension import Extension

import numpy as np

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "hawkeslob.backends.native",
                ["src/hawkeslob/backends/native.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_9_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
