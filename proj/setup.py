import os
import shutil
import subprocess
from glob import glob
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    """Drives the project's CMake build and drops the compiled module where
    setuptools expects the extension for the requested (editable or wheel)
    layout."""

    def build_extension(self, ext):
        extdir = Path(self.get_ext_fullpath(ext.name)).parent.resolve()
        build_temp = Path(self.build_temp).resolve()
        build_temp.mkdir(parents=True, exist_ok=True)
        source = Path(__file__).parent.resolve()
        subprocess.run(
            [
                "cmake",
                "-S",
                str(source),
                "-B",
                str(build_temp),
                "-DCMAKE_BUILD_TYPE=Release",
                "-DRICCI_MMP_BUILD_TESTS=OFF",
            ],
            check=True,
        )
        subprocess.run(
            ["cmake", "--build", str(build_temp), "--target", "_core",
             f"-j{os.cpu_count() or 2}"],
            check=True,
        )
        built = [
            f
            for f in glob(str(build_temp / "python" / "ricci_mmp" / "_core*"))
            if f.endswith((".so", ".pyd", ".dylib"))
        ]
        if not built:
            raise RuntimeError("compiled _core module not found after the CMake build")
        extdir.mkdir(parents=True, exist_ok=True)
        for f in built:
            shutil.copy2(f, extdir)


setup(
    ext_modules=[CMakeExtension("ricci_mmp._core")],
    cmdclass={"build_ext": CMakeBuild},
)
