import os

from setuptools import Extension, setup

# RELPIMC_PURE=1 skips the compiled core; the package then runs on _pycore.
ext_modules = []
if not os.environ.get("RELPIMC_PURE"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "relpimc._core",
                    ["src/relpimc/_core.pyx"],
                    # no -ffast-math: the core must round exactly like _pycore
                    extra_compile_args=["-O3"],
                    libraries=["m"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
