"""Kernel backend selection.

At import time this module binds `forward`/`backward` either to the
compiled extension (built from _kernels.pyx) or to the numpy reference
implementation. Set TDLAB_BACKEND=numpy or TDLAB_BACKEND=cython to force
one; the default prefers the extension and silently falls back.
"""

from __future__ import annotations

import os

_requested = os.environ.get("TDLAB_BACKEND", "auto").strip().lower()

if _requested in ("auto", ""):
    try:
        from . import _kernels as _impl

        backend_name = "cython"
    except ImportError:
        from . import _kernels_py as _impl

        backend_name = "numpy"
elif _requested == "cython":
    from . import _kernels as _impl

    backend_name = "cython"
elif _requested in ("numpy", "python"):
    from . import _kernels_py as _impl

    backend_name = "numpy"
else:
    raise RuntimeError(
        f"TDLAB_BACKEND={_requested!r} not recognized; use 'auto', 'cython', or 'numpy'"
    )

forward = _impl.forward
backward = _impl.backward
