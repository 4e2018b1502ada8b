import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("KRYLOVLAB_NO_EXT", "") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [Extension("krylovlab._ckernels", ["src/krylovlab/_ckernels.pyx"],
                       include_dirs=[numpy.get_include()])],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
