"""Independent reference values.  Nothing here imports uniqlab."""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate


def distance_1d(c11, a: float, b: float) -> float:
    """Metric length of [a, b] for the line element ds / sqrt(c11(s))."""
    lo, hi = min(a, b), max(a, b)
    val, _ = integrate.quad(lambda s: 1.0 / math.sqrt(c11(s)), lo, hi, limit=200)
    return val


def dirichlet_heat_content(t: float, terms: int = 99) -> float:
    """Mass of exp(t d^2/dx^2) 1 on (0,1) with zero boundary values."""
    s = 0.0
    for n in range(1, terms + 1, 2):
        s += math.exp(-n * n * math.pi**2 * t) / (n * n)
    return 8.0 / math.pi**2 * s


def dirichlet_gap(t: float, terms: int = 99) -> float:
    return 1.0 - dirichlet_heat_content(t, terms)


def dirichlet_gap_square(t: float, terms: int = 99) -> float:
    """The unit square separates: its heat content is the square of the interval's."""
    return 1.0 - dirichlet_heat_content(t, terms) ** 2


def defect_energy(t: float, terms: int = 99) -> float:
    """||exp(-tH_D) 1 - 1||_2^2 on (0,1) from the sine expansion of 1."""
    m = dirichlet_heat_content(t, terms)
    e = 0.0
    for n in range(1, terms + 1, 2):
        e += math.exp(-2 * n * n * math.pi**2 * t) / (n * n)
    return 1.0 - 2.0 * m + 8.0 / math.pi**2 * e


def cosh_capacity() -> float:
    """min int_0^1 psi'^2 + psi^2 with psi(0) = 1, free right end: tanh(1)."""
    return math.tanh(1.0)


def log_cutoff_energy(eps: float) -> float:
    """Form value of psi = log(x)/log(eps) on (eps, 1), psi = 1 below, for c = x^2.

    An admissible competitor, so it bounds the capacity of {0} from above;
    it tends to 0 as eps -> 0.
    """
    L = math.log(eps)
    grad = (1.0 - eps) / L**2
    mass = eps + integrate.quad(lambda x: (math.log(x) / L) ** 2, eps, 1.0)[0]
    return grad + mass


def ca_lower_bound_dense(n: int, lams=None) -> float:
    """Brute-force bound for C_A with c = 1 on (0,1), A = (0,1), probe 1.

    Builds the interval stiffness matrix by hand on ``n`` interior nodes and
    scans the scalarised problem min a + lam b^2 densely.  Any eta with
    a <= d and b <= d has a + lam b^2 <= d + lam d^2, so d is bounded below
    by the positive root of lam d^2 + d = m(lam).
    """
    h = 1.0 / (n + 1)
    inner = n - 2  # eta is pinned to 0 on the first and last node
    K = (np.diag(np.full(inner, 2.0)) - np.diag(np.ones(inner - 1), 1) - np.diag(np.ones(inner - 1), -1)) / h
    lams = np.logspace(-2, 6, 81) if lams is None else lams
    best = 0.0
    for lam in lams:
        # mass of (1 - eta)^2 counts the two pinned nodes too
        Mfree = lam * h * np.eye(inner)
        eta = np.linalg.solve(K + Mfree, lam * h * np.ones(inner))
        m = eta @ K @ eta + lam * h * (np.sum((1 - eta) ** 2) + 2.0)
        d = (-1 + math.sqrt(1 + 4 * lam * m)) / (2 * lam)
        best = max(best, d)
    return best


def disk_area(r: float) -> float:
    return math.pi * r * r
