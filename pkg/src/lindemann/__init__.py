"""Slow-manifold and phase-plane toolkit for the nondimensional Lindemann mechanism

    x' = -x^2 + eps x y,    y' = x^2 - (1 + eps x) y.
"""

from __future__ import annotations

from .core import Params, PhasePoint, nondimensionalize, vector_field
from .errors import LindemannError
from .integrate import IntegratorConfig, integrate_planar, integrate_scalar
from .manifold import SlowManifold, compute_backward, compute_bisection
from .series import infinity_coeffs, lambert_w, origin_coeffs

__all__ = [
    "IntegratorConfig",
    "LindemannError",
    "Params",
    "PhasePoint",
    "SlowManifold",
    "compute_backward",
    "compute_bisection",
    "infinity_coeffs",
    "integrate_planar",
    "integrate_scalar",
    "lambert_w",
    "nondimensionalize",
    "origin_coeffs",
    "vector_field",
]
__version__ = "0.1.0"
