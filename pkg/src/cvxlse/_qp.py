"""Backend dispatch for the convex least squares QP kernel.

The compiled Cython kernel is preferred; the pure NumPy implementation is
the fallback.  ``CVXLSE_QP_BACKEND=python`` forces the fallback (useful for
benchmarking the two against each other).
"""

import os

_forced = os.environ.get("CVXLSE_QP_BACKEND", "").lower()

if _forced == "python":
    from ._qp_py import solve_convex_lsq

    BACKEND = "python"
else:
    try:
        from ._qpcore import solve_convex_lsq  # noqa: F401

        BACKEND = "cython"
    except ImportError:
        if _forced == "cython":
            raise
        from ._qp_py import solve_convex_lsq  # noqa: F401

        BACKEND = "python"


def qp_backend() -> str:
    """Name of the QP backend selected at import: 'cython' or 'python'."""
    return BACKEND
