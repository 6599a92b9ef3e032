from setuptools import Extension, setup
from Cython.Build import cythonize

# -ffp-contract=off keeps float results bit-identical to the pure-Python
# backend (no FMA contraction of projection dot products).
extensions = [
    Extension(
        "percdrift._ckern",
        ["src/percdrift/_ckern.pyx"],
        language="c++",
        extra_compile_args=["-O3", "-std=c++11", "-ffp-contract=off"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
    )
)
