import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

setup(
    ext_modules=cythonize(
        [
            Extension(
                "chfdist._kernels",
                ["src/chfdist/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-funroll-loops"],
            )
        ],
        compiler_directives={"language_level": 3},
    ),
)
