"""Build hook for the optional compiled trellis kernel.

The package works without the extension (a NumPy fallback is selected at
import time); building it just makes the message recursions much faster.
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize

    _common = dict(
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize(
        [
            Extension("bcjrnet._kernels_c", ["src/bcjrnet/_kernels_c.pyx"], **_common),
            Extension("bcjrnet._mlp_fused_c", ["src/bcjrnet/_mlp_fused_c.pyx"], **_common),
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
