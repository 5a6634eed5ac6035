"""Selects the compiled kernel module at import, falling back to pure Python.

Set ``ZONOFD_PURE_PYTHON=1`` to force the fallback (used by the benchmark and
by the backend-parity tests).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("ZONOFD_PURE_PYTHON"):
    impl = _kernels_py
else:
    try:
        from . import _kernels as impl  # type: ignore[attr-defined]
    except ImportError:
        impl = _kernels_py

BACKEND_NAME: str = impl.BACKEND_NAME
HAVE_COMPILED: bool = impl.BACKEND_NAME == "cython"

# status codes are identical across backends
OK = _kernels_py.OK
MAX_ITER = _kernels_py.MAX_ITER
COLLAPSED = _kernels_py.COLLAPSED
PRUNED_LB = _kernels_py.PRUNED_LB
SIGN_UB = _kernels_py.SIGN_UB

chol_quad_min = impl.chol_quad_min
psd_gamma_upper = impl.psd_gamma_upper
dinkelbach_bisect = impl.dinkelbach_bisect
admm_qp = impl.admm_qp
