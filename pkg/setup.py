"""Build script for the optional compiled kernels.

The package works without them; ``eulersynth.kernels`` falls back to numpy
when the extension is missing.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("EULERSYNTH_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "eulersynth._ckernels",
                    ["src/eulersynth/_ckernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    # no FMA contraction: keeps results bit-identical to the numpy fallback
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
