"""Build hook for the optional Cython kernel.

Project metadata lives in pyproject.toml. If Cython or a C compiler is
missing, the package still installs and falls back to pure Python.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing or broken
            print(f"warning: compiled kernels not built ({exc}); using pure Python")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: failed to build {ext.name} ({exc}); using pure Python")


try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                f"pllab._kernels._{name}_ext",
                [f"src/pllab/_kernels/_{name}_ext.pyx"],
                extra_compile_args=["-O3"],
            )
            for name in ("lz", "nn")
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
