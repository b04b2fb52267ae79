import warnings

import numpy as np
from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "roughvol._kernels._core",
                ["src/roughvol/_kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                # -ffp-contract=off keeps the compiled kernels bit-compatible
                # with the numpy fallback (no fused multiply-add).
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level="3",
    )
except ImportError:
    warnings.warn(
        "Cython not available; building roughvol with the pure-numpy kernels only."
    )

setup(ext_modules=ext_modules)
