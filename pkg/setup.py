import os

from Cython.Build import cythonize
from setuptools import Extension, setup

# Reduction vectorization needs reassociation; results stay bit-stable for a given build.
compile_args = [
    "-O3",
    "-fno-math-errno",
    "-fassociative-math",
    "-fno-signed-zeros",
    "-fno-trapping-math",
]
if not os.environ.get("FUSELENS_PORTABLE"):
    compile_args.append("-march=native")

extensions = [
    Extension(
        "fuselens._kernels",
        ["src/fuselens/_kernels.pyx"],
        extra_compile_args=compile_args,
        optional=True,
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
)
