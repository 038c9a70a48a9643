import numpy
from setuptools import Extension, setup

# The compiled kernel is optional: the package falls back to the pure numpy
# implementation in dropggm._kernels._pykernels when the extension is absent.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "dropggm._kernels._ckernels",
                ["src/dropggm/_kernels/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
