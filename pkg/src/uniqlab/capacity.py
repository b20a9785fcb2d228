"""Capacity of boundary pieces, cutoff sequences and the approximation condition C_A.

The open neighbourhood of the target set is discretised as the collar of ``k``
cells around it.  The capacity at one (h, k) is the minimum of the Neumann graph
norm squared over functions equal to 1 on that collar; a refinement trace over
k and h decides whether the limit vanishes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import EmptySequence, MaximumPrincipleViolated, NegativeInput, SolverFailure
from .forms import FieldFunction, assemble_form, gamma, gamma_matrix
from .grid import CoefficientField, Grid, Problem
from .metric import DistanceField
from .trend import DecayFit, classify_decay

log = logging.getLogger(__name__)

TOL_CAP = 1e-2
TOL_LIN = 1e-9


def target_mask(grid: Grid, target) -> np.ndarray | None:
    """Resolve a target descriptor to a boolean mask over the full lattice.

    ``None`` or ``"boundary"`` means the whole true boundary; a sequence of
    points selects the exterior nodes next to them; a callable is applied to
    the grid.
    """
    if target is None or (isinstance(target, str) and target == "boundary"):
        return None
    if callable(target):
        return np.asarray(target(grid), dtype=bool)
    return grid.exterior_near(target)


def _describe(target) -> str:
    if target is None or isinstance(target, str):
        return target or "boundary"
    if callable(target):
        return getattr(target, "__name__", "custom")
    return "near " + ", ".join(str(tuple(map(float, p))) for p in np.atleast_2d(np.asarray(target, dtype=float)))


@dataclass
class CapacityPoint:
    h: float
    k: int
    resolution: int
    value: float

    def as_dict(self) -> dict:
        return dict(h=self.h, k=self.k, resolution=self.resolution, value=self.value)


@dataclass(eq=False)
class CapacityEstimate:
    target: str
    k: int
    resolution: int
    value: float
    minimizer: FieldFunction | None = None
    trace: list = field(default_factory=list)
    verdict: str = "inconclusive"
    fit: DecayFit | None = None

    def as_dict(self) -> dict:
        return {
            "target": self.target,
            "value": self.value,
            "trace": [p.as_dict() for p in self.trace],
            "verdict": self.verdict,
            "fit": self.fit.as_dict() if self.fit else None,
        }


def boundary_capacity(field_: CoefficientField, k: int = 1, target=None) -> CapacityEstimate:
    """Minimise ``psi^T (A_N + M) psi`` with ``psi = 1`` on collar(k) of the target."""
    if k < 1:
        raise ValueError("collar width must be >= 1")
    grid = field_.grid
    fixed = grid.collar(k, target_mask(grid, target))
    res = max(grid.shape)
    psi = np.zeros(grid.n)
    if not fixed.any():
        # empty neighbourhood: psi = 0 is admissible
        return CapacityEstimate(_describe(target), k, res, 0.0, FieldFunction(field_, psi))
    form = assemble_form(field_, "neumann")
    Q = (form.A + sp.diags(form.mass)).tocsr()
    free = ~fixed
    psi[fixed] = 1.0
    if free.any():
        Qff = Q[free][:, free].tocsc()
        rhs = -(Q[free][:, fixed] @ psi[fixed])
        sol = spsolve(Qff, rhs)
        resid = np.linalg.norm(Qff @ sol - rhs)
        if not np.all(np.isfinite(sol)) or resid > TOL_LIN * max(1.0, np.linalg.norm(rhs)):
            raise SolverFailure(f"capacity solve residual {resid:.3g}")
        psi[free] = sol
    if psi.min() < -1e-10 or psi.max() > 1 + 1e-10:
        raise MaximumPrincipleViolated(
            f"capacity minimiser leaves [0,1]: range [{psi.min():.3g}, {psi.max():.3g}]")
    value = float(psi @ (Q @ psi))
    return CapacityEstimate(_describe(target), k, res, value, FieldFunction(field_, psi))


def capacity_trace(problem: Problem, resolutions: Sequence[int], ks: Sequence[int] = (3, 2, 1),
                   target=None, tol: float = TOL_CAP) -> CapacityEstimate:
    """Capacities over all (resolution, k) pairs, classified against the scale ``k*h``."""
    if len(resolutions) < 1:
        raise ValueError("need at least one resolution")
    trace, last = [], None
    for res in resolutions:
        fld = problem.discretize(res)
        for k in ks:
            est = boundary_capacity(fld, k, target)
            trace.append(CapacityPoint(fld.grid.hmax, k, res, est.value))
            last = est
    scales = [p.k * p.h for p in trace]
    fit = classify_decay(scales, [p.value for p in trace], tol)
    last.trace = trace
    last.fit = fit
    last.verdict = fit.verdict
    return last


# --------------------------------------------------------------------------
# cutoffs


def mazya_truncation(phi: FieldFunction, lam: float) -> FieldFunction:
    """``phi_lam = min(phi, lam) / lam``; equals 1 exactly where ``phi >= lam``."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if np.any(phi.values < 0):
        raise NegativeInput("Maz'ya truncation needs a nonnegative function")
    vals = np.minimum(phi.values, lam) / lam
    return FieldFunction(phi.field, vals, phi.zero_extended)


def _step_down(t: np.ndarray, a: float, b: float) -> np.ndarray:
    """C^1 cubic going from 1 (t <= a) to 0 (t >= b); max slope 1.5/(b-a)."""
    u = np.clip((t - a) / (b - a), 0.0, 1.0)
    return 1.0 - u * u * (3.0 - 2.0 * u)


PROFILES: dict[str, tuple[float, float, float]] = {
    # name: (flat until, zero from, slope bound)
    "theta": (1.5, 2.0, 3.0),
    "tau": (1.0, 2.0, 2.0),
}


def profile(name: str, t) -> np.ndarray:
    a, b, _ = PROFILES[name]
    return _step_down(np.asarray(t, dtype=float), a, b)


def radial_cutoff(dist: DistanceField, r: float, kind: str = "theta") -> FieldFunction:
    """``profile(rho / r)``; unreached nodes get 0."""
    if r <= 0:
        raise ValueError("radius must be positive")
    rho = np.where(dist.reached, dist.values, np.inf)
    vals = profile(kind, rho / r)
    vals[~np.isfinite(rho)] = 0.0
    zero_ext = not np.any(vals[dist.grid.collar(1)])
    return FieldFunction(dist.field, vals, zero_ext)


@dataclass(eq=False)
class CutoffSequence:
    functions: list
    rule: str = "user"
    scales: list | None = None

    def __len__(self):
        return len(self.functions)


def clamp_sequence(seq: CutoffSequence) -> CutoffSequence:
    """Apply ``(0 v eta) ^ 1`` to every member; the form value never increases."""
    out = []
    for eta in seq.functions:
        clamped = FieldFunction(eta.field, np.clip(eta.values, 0.0, 1.0), eta.zero_extended)
        form = assemble_form(eta.field, "dirichlet" if eta.zero_extended else "neumann")
        before, after = form.value(eta.values), form.value(clamped.values)
        if after > before * (1 + 1e-12) + 1e-14:
            raise AssertionError(f"unit contraction increased the form: {after} > {before}")
        out.append(clamped)
    return CutoffSequence(out, seq.rule, seq.scales)


def constant_probe(field_: CoefficientField) -> np.ndarray:
    return np.ones(field_.grid.n)


def gamma_probe(field_: CoefficientField, phi) -> np.ndarray:
    """``Gamma(phi)^(1/2)`` for a node array or a callable of the node points."""
    vals = phi(field_.grid.points) if callable(phi) else np.asarray(phi, dtype=float)
    return np.sqrt(gamma(field_, vals))


@dataclass(eq=False)
class CAReport:
    a: np.ndarray
    b: dict
    scales: np.ndarray
    verdict: str
    fit: DecayFit | None
    detail: str = ""
    lower_bound: float | None = None

    def as_dict(self) -> dict:
        return {
            "a": self.a.tolist(),
            "b": {k: v.tolist() for k, v in self.b.items()},
            "scales": self.scales.tolist(),
            "verdict": self.verdict,
            "fit": self.fit.as_dict() if self.fit else None,
            "detail": self.detail,
            "lower_bound": self.lower_bound,
        }

    def rows(self):
        """(n, a_n, b_n) with b_n the largest over probes."""
        bmax = np.max(np.stack(list(self.b.values())), axis=0) if self.b else np.zeros_like(self.a)
        return [(i, float(a), float(b)) for i, (a, b) in enumerate(zip(self.a, bmax))]


def verify_condition_CA(A, seq: CutoffSequence, probes: dict | None = None, tol: float = TOL_CAP,
                        lower_bound: float | None = None) -> CAReport:
    """Evaluate ``a_n = ||1_A Gamma(eta_n)||_1`` and ``b_n = ||1_A (1-eta_n) phi||_2``.

    ``A`` is a boolean node mask, or a callable ``grid -> mask`` when the
    sequence lives on several grids.  ``probes`` maps names to callables
    ``field -> node values`` (default: the constant 1 on the window).
    ``satisfied`` needs the combined trace ``a_n + max b_n^2`` to vanish;
    ``failed`` needs an external lower bound (``lower_bound > tol``).
    """
    if len(seq) == 0:
        raise EmptySequence("C_A needs at least one cutoff")
    probes = probes or {"one": constant_probe}
    a = np.empty(len(seq))
    b = {name: np.empty(len(seq)) for name in probes}
    for n, eta in enumerate(seq.functions):
        if not eta.zero_extended:
            raise ValueError(f"cutoff {n} is not a Dirichlet-domain surrogate")
        grid = eta.grid
        ind = np.asarray(A(grid) if callable(A) else A, dtype=bool)
        a[n] = grid.vol * np.sum(gamma(eta.field, eta.values)[ind])
        for name, probe in probes.items():
            phi = probe(eta.field)
            b[name][n] = np.sqrt(grid.vol * np.sum(((1 - eta.values) * phi)[ind] ** 2))
    scales = np.asarray(seq.scales if seq.scales is not None else 1.0 / np.arange(1, len(seq) + 1), dtype=float)
    s = a + np.max(np.stack(list(b.values())), axis=0) ** 2

    if lower_bound is not None and lower_bound > tol:
        return CAReport(a, b, scales, "failed", None,
                        f"every cutoff has max(a, b) >= {lower_bound:.4g} (variational lower bound)", lower_bound)
    if np.all(s <= tol * 1e-3):
        return CAReport(a, b, scales, "satisfied", None, "a_n and b_n vanish", lower_bound)
    if len(seq) < 2:
        return CAReport(a, b, scales, "inconclusive", None, "single cutoff with nonzero defect", lower_bound)
    fit = classify_decay(scales, s, tol)
    verdict = "satisfied" if fit.verdict == "zero" else "inconclusive"
    return CAReport(a, b, scales, verdict, fit, fit.detail, lower_bound)


def ca_lower_bound(field_: CoefficientField, A: np.ndarray | None = None,
                   lams: np.ndarray | None = None) -> float:
    """Lower bound on ``inf max(a(eta), b(eta))`` over all eta vanishing on collar(1).

    For each lambda the quadratic minimum ``m = min a + lambda b^2`` is exact
    (one sparse solve); ``max(a, b) <= d`` forces ``d + lambda d^2 >= m``.
    Only the probe ``phi = 1`` is used.
    """
    grid = field_.grid
    ind = np.ones(grid.n, dtype=bool) if A is None else np.asarray(A, dtype=bool)
    lams = np.logspace(-2, 6, 49) if lams is None else np.asarray(lams, dtype=float)
    free = ~grid.collar(1)
    if not free.any():
        return float("nan")
    G = gamma_matrix(field_, ind.astype(float))[free][:, free].tocsc()
    w = grid.vol * ind[free].astype(float)
    best = 0.0
    for lam in lams:
        # minimise eta^T G eta + lam * sum w (1 - eta)^2
        eta = spsolve((G + sp.diags(lam * w)).tocsc(), lam * w)
        m = float(eta @ (G @ eta) + lam * np.sum(w * (1 - eta) ** 2))
        d = (-1 + np.sqrt(1 + 4 * lam * max(m, 0.0))) / (2 * lam)
        best = max(best, d)
    return best


def ca_sequence_from_capacity(problem: Problem, resolutions: Sequence[int], ks: Sequence[int] = (3, 2, 1),
                              target=None) -> CutoffSequence:
    """``eta = 1 - psi`` for the capacity minimisers psi over the refinement schedule."""
    funcs, scales = [], []
    for res in resolutions:
        fld = problem.discretize(res)
        for k in ks:
            psi = boundary_capacity(fld, k, target).minimizer.values
            funcs.append(FieldFunction(fld, 1.0 - psi, zero_extended=True))
            scales.append(k * fld.grid.hmax)
    return CutoffSequence(funcs, "capacity-complement", scales)
