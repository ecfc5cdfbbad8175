"""Build script: compiles the optional native kernel extension.

The package works without the extension (a numpy fallback is selected at
import time), so any build failure here downgrades to a pure build rather
than aborting the install.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "duosonar.kernels._native",
                ["src/duosonar/kernels/_native.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # noqa: BLE001 - extension is optional
    import sys

    print(f"duosonar: skipping native kernel build ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
