"""Build the optional compiled kernel module.

The package works without it: ``dualproj._backend`` falls back to the numpy
kernels when the extension is missing. Set DUALPROJ_NO_EXT=1 to skip the build.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("DUALPROJ_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "dualproj._kernels",
                    ["src/dualproj/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    # keep a*b+c unfused so results match the numpy fallback bit for bit
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
