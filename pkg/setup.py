"""Build script: compiles the optional fast kernels.

The extension is a pure accelerator. If it fails to build (no compiler,
no Cython), the install proceeds and `conjoint` falls back to the numpy
kernels at import time.
"""

import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Allow the install to survive a failed extension build."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - depends on toolchain
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            f"warning: building the conjoint._kernels._fast extension failed ({exc}); "
            "falling back to the pure numpy kernels",
            file=sys.stderr,
        )


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:  # pragma: no cover
        return []
    from setuptools import Extension

    ext = Extension(
        "conjoint._kernels._fast",
        sources=["src/conjoint/_kernels/_fast.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": 3, "embedsignature": True})


setup(
    ext_modules=_extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
