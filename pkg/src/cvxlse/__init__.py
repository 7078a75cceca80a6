"""Convex least squares estimation toolkit.

Density and regression LSEs over the convex cone, the invelope limit
process of the scaled estimation error on linear regions, Monte Carlo
critical values and the linearity test built on them, plus a seeded
experiment harness.
"""

from .pwl import CLAMP_RIGHT, EXTEND, PiecewiseLinearFn, PiecewisePoly, StepFn, sup_diff

__version__ = "0.1.0"

__all__ = [
    "CLAMP_RIGHT",
    "EXTEND",
    "PiecewiseLinearFn",
    "PiecewisePoly",
    "StepFn",
    "sup_diff",
    "__version__",
]
