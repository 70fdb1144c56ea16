import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = [
    Extension(
        "kanforge.kernels._ckernels",
        ["src/kanforge/kernels/_ckernels.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
    )
]

if cythonize is not None:
    # The compiled kernels are optional: kanforge.kernels falls back to the
    # numpy implementations when the extension is absent.
    setup(
        ext_modules=cythonize(
            extensions,
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    )
else:
    setup()
