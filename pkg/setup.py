"""Build script: compiles the optional accelerator extension.

The package works without the extension (a NumPy fallback is selected at
import time), so any failure to build it is non-fatal.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "floodstream._accel",
                ["src/floodstream/_accel.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"floodstream: skipping accelerator extension build ({exc})")

setup(ext_modules=ext_modules)
