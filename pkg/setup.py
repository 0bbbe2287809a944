"""Build script: compiles the optional assignment-DP kernel.

The compiled extension is a pure speed-up; if Cython or a C compiler is
unavailable the package installs anyway and falls back to the Python
kernel at import time. Set UTTDIAR_NO_EXT=1 to skip the extension build.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Never fail the install because the extension would not compile."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"warning: skipping compiled kernel ({exc}); "
                  "the pure-Python fallback will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: could not build {ext.name} ({exc}); "
                  "the pure-Python fallback will be used")


def extensions():
    if os.environ.get("UTTDIAR_NO_EXT") == "1":
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    return cythonize(
        [Extension("uttdiar._dpcore", ["src/uttdiar/_dpcore.pyx"])],
        compiler_directives={"language_level": "3"},
    )


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
