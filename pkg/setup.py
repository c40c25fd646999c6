import os

from setuptools import setup

ext_modules = []
if not os.environ.get("GUESSGAME_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    name="guessgame._ckernels",
                    sources=["src/guessgame/_ckernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        # no Cython/numpy at build time: install pure-python, kernels fall back
        ext_modules = []

setup(ext_modules=ext_modules)
