"""Bounds on the drift and potential: w0, w1, kappa and the accretivity shift."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import KappaZero
from .grid import CoefficientField
from .semigroup import divergence


@dataclass
class LowerOrderBounds:
    omega0: float
    omega1: float
    kappa_max: float  # math.inf when c vanishes identically
    omega: float
    argmin: int  # node attaining kappa_max (-1 without drift)
    window_limited: bool = False

    @property
    def conditions(self) -> dict:
        return {
            "c0_lower": bool(np.isfinite(self.omega0)),
            "divc_upper": bool(np.isfinite(self.omega1)),
            "matrix_order": bool(self.kappa_max > 0),
        }

    def as_dict(self) -> dict:
        k = self.kappa_max
        return {
            "omega0": self.omega0,
            "omega1": self.omega1,
            "kappa_max": k if math.isfinite(k) else "inf",
            "omega": self.omega,
            "sigma_min": accretivity_shift(self) if self.kappa_max > 0 else None,
            "conditions": self.conditions,
            "window_limited": self.window_limited,
        }


def kappa_field(field_: CoefficientField) -> np.ndarray:
    """Nodewise ``1 / (c^T C^-1 c)``; ``inf`` where c vanishes."""
    y = np.linalg.solve(field_.C, field_.c[..., None])[..., 0]
    q = np.einsum("nk,nk->n", field_.c, y)
    with np.errstate(divide="ignore"):
        return np.where(q > 0, 1.0 / np.where(q > 0, q, 1.0), np.inf)


def compute_bounds(field_: CoefficientField) -> LowerOrderBounds:
    omega0 = float(np.min(field_.c0))
    omega1 = float(np.max(divergence(field_))) if field_.has_drift else 0.0
    kap = kappa_field(field_)
    i = int(np.argmin(kap)) if field_.has_drift else -1
    kmax = float(kap[i]) if i >= 0 else math.inf
    return LowerOrderBounds(omega0, omega1, kmax, omega0 - 0.5 * omega1, i, field_.grid.spec.unbounded)


def accretivity_shift(bounds: LowerOrderBounds) -> float:
    """``sigma_min = max(0, (4 kappa)^-1 - omega)``."""
    if not bounds.kappa_max > 0:
        raise KappaZero("no kappa > 0 with C >= kappa c c^T; the matrix-order condition fails")
    inv = 0.0 if math.isinf(bounds.kappa_max) else 1.0 / (4 * bounds.kappa_max)
    return max(0.0, inv - bounds.omega)


def caccioppoli_gamma(bounds: LowerOrderBounds) -> float:
    """``1 + (4 kappa)^-1``; equals 1 without drift."""
    return 1.0 if math.isinf(bounds.kappa_max) else 1.0 + 1.0 / (4 * bounds.kappa_max)
