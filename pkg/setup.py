"""Build script: compiles the walk kernel when Cython and a C compiler are available.

Set AGX_SKIP_EXTENSION=1 to force the pure-Python kernel (the package falls
back to it automatically whenever the extension is missing).
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("AGX_SKIP_EXTENSION") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [Extension("agx.kernels._walk_c", ["src/agx/kernels/_walk_c.pyx"])],
            language_level="3",
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
