"""Build script: compiles the optional Cython kernel.

The package is fully functional without the extension (a vectorized numpy
fallback with bit-identical output is selected at import time), so a failed
compile downgrades to a warning instead of aborting the install.
"""

import sys

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "krick._kernel",
                ["src/krick/_kernel.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    sys.stderr.write(f"krick: skipping Cython kernel build ({exc}); "
                     "pure-Python backend will be used\n")
    extensions = []

setup(ext_modules=extensions)
