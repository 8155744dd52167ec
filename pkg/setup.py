import os

from setuptools import Extension, setup

# The compiled kernels are optional: if Cython or a C compiler is missing the
# package falls back to the pure-Python kernels at import time.
extensions = []
if os.environ.get("RRNN_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        extensions = cythonize(
            [Extension("rrnn._core", ["src/rrnn/_core.pyx"])],
            compiler_directives={"language_level": "3"},
        )
        for ext in extensions:
            ext.optional = True
    except ImportError:
        extensions = []

setup(ext_modules=extensions)
