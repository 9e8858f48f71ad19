"""Kernel backend selection.

The compiled extension is used when importable; setting ``FFD_PURE_PYTHON=1``
forces the numpy fallback.
"""

import os

from . import _kernels_py as python_backend

compiled_backend = None
if not os.environ.get("FFD_PURE_PYTHON"):
    try:
        from . import _kernels as compiled_backend
    except ImportError:
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if _active is compiled_backend else "numpy"

score_triples = _active.score_triples
accumulate_grads = _active.accumulate_grads
