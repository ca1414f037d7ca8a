import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "iwakf.kernels._ckernel",
                ["src/iwakf/kernels/_ckernel.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # No Cython: the pure-Python kernel fallback is used at runtime.
    extensions = []

setup(ext_modules=extensions)
