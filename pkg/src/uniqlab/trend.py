"""Refinement-trace classification shared by capacity, C_A and mass-gap traces.

A trace is a list of (scale, value) pairs with scale -> 0 under refinement
(collar width k*h, time step, 1/n, ...).  ``classify_decay`` decides whether the
values vanish in the limit, stabilise at a positive level, or neither.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class DecayFit:
    verdict: str  # zero | positive | inconclusive
    slope: float  # log-log slope of value against scale
    limit: float  # affine extrapolation to scale 0
    log_rate: float  # b in 1/v = a + b log(1/scale)
    detail: str

    def as_dict(self) -> dict:
        return {k: (v if not isinstance(v, float) or np.isfinite(v) else str(v)) for k, v in self.__dict__.items()}


def _rss(X: np.ndarray, y: np.ndarray):
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = X @ coef - y
    return coef, float(r @ r)


def classify_decay(scales, values, tol: float = 1e-2, stable_spread: float = 0.05,
                   min_slope: float = 0.25) -> DecayFit:
    s = np.asarray(scales, dtype=float)
    v = np.asarray(values, dtype=float)
    if s.size != v.size or s.size == 0:
        raise ValueError("scales and values must be non-empty and of equal length")
    if np.all(np.abs(v) <= tol * 1e-3):
        return DecayFit("zero", np.nan, 0.0, np.nan, "all trace values negligible")
    if s.size < 2 or np.ptp(s) == 0:
        return DecayFit("inconclusive", np.nan, np.nan, np.nan, "need at least two distinct scales")

    ones = np.ones_like(s)
    coef, rss_aff = _rss(np.column_stack([ones, s]), v)
    v_inf = float(coef[0])
    spread = float(np.ptp(v) / np.max(np.abs(v)))

    pos = v > 0
    slope = np.nan
    if pos.sum() >= 2:
        slope = float(np.polyfit(np.log(s[pos]), np.log(v[pos]), 1)[0])

    log_b = np.nan
    rss_log = np.inf
    if pos.all():
        c, r = _rss(np.column_stack([ones, np.log(1 / s)]), 1 / v)
        log_b = float(c[1])
        # compare in value space so both models are judged on the same residual
        fitted = 1 / (c[0] + c[1] * np.log(1 / s))
        rss_log = float(np.sum((fitted - v) ** 2)) if np.all(np.isfinite(fitted)) else np.inf

    if spread < stable_spread and np.mean(v) > tol:
        return DecayFit("positive", slope, v_inf, log_b, f"trace stable within {spread:.1%}")
    if v.min() <= tol and np.isfinite(slope) and slope >= min_slope:
        return DecayFit("zero", slope, v_inf, log_b, f"power-law decay, slope {slope:.2f}")
    if np.isfinite(log_b) and log_b > 0 and rss_log < 0.25 * rss_aff:
        return DecayFit("zero", slope, v_inf, log_b, "logarithmic decay 1/v ~ log(1/scale)")
    if v_inf > tol and (not np.isfinite(slope) or slope < min_slope):
        return DecayFit("positive", slope, v_inf, log_b, f"extrapolated limit {v_inf:.4g} > {tol:g}")
    return DecayFit("inconclusive", slope, v_inf, log_b, "trace neither stabilises nor decays clearly")
