"""Discrete heat semigroups for H_D, H_N and K_D and the diagnostics built on them.

The semi-discrete equation is ``M psi' = -A psi``.  Implicit Euler is applied
after pulling out the constant shift ``w0 = min c0`` exactly:

    psi_{n+1} = exp(-w0 dt) (M + dt (A - w0 M))^-1 M psi_n

so the bound ``||psi_t||_inf <= exp(-w0 t) ||psi_0||_inf`` holds without a
time-step error term.  For the symmetric generators ``w0 = 0`` and the scheme is
plain implicit Euler.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import trapezoid
from scipy.sparse.linalg import splu

from .errors import MissingSnapshots, PositivityLost, SolverFailure
from .forms import assemble_form, gradient_operators, upwind_gradient
from .grid import CoefficientField, Problem
from .metric import DistanceField, field_stencil_error
from .trend import classify_decay

log = logging.getLogger(__name__)

GENERATORS = ("H_D", "H_N", "K_D", "K_D-adjoint")
SCHEMES = ("implicit-euler", "crank-nicolson")
ALIASES = {"hd": "H_D", "hn": "H_N", "kd": "K_D", "kd-adjoint": "K_D-adjoint", "kda": "K_D-adjoint"}


def divergence(field_: CoefficientField, c: np.ndarray | None = None) -> np.ndarray:
    """Centred-difference ``div c`` (one-sided at mask edges)."""
    c = field_.c if c is None else c
    ops = gradient_operators(field_.grid)
    return sum(D @ c[:, k] for k, D in enumerate(ops))


def advection_matrix(field_: CoefficientField, c: np.ndarray) -> sp.csr_matrix:
    """Upwind ``vol * sum c_k d_k``; missing upwind neighbours count as zero."""
    grid = field_.grid
    n = grid.n
    rows = np.arange(n)
    R, Cc, V = [], [], []
    for k in range(grid.dim):
        ck = c[:, k]
        e = np.zeros(grid.dim, dtype=int)
        e[k] = 1
        for sign, sel in ((-1, ck > 0), (1, ck < 0)):
            # c > 0 uses the backward difference, c < 0 the forward one
            flat = grid.neighbours(sign * e)
            tgt = np.where(flat >= 0, grid.index.flat[np.maximum(flat, 0)], -1)
            coef = grid.vol * np.abs(ck[sel]) / grid.h[k]
            R.append(rows[sel]); Cc.append(rows[sel]); V.append(coef)
            ok = tgt[sel] >= 0
            R.append(rows[sel][ok]); Cc.append(tgt[sel][ok]); V.append(-coef[ok])
    return sp.csr_matrix((np.concatenate(V), (np.concatenate(R), np.concatenate(Cc))), shape=(n, n))


@dataclass(eq=False)
class Generator:
    A: sp.csr_matrix
    mass: np.ndarray
    which: str
    field: CoefficientField
    shift: float = 0.0  # constant part of the potential, handled exactly in time

    @property
    def n(self) -> int:
        return self.A.shape[0]


def assemble_generator(field_: CoefficientField, which: str = "H_D") -> Generator:
    which = ALIASES.get(which.lower(), which)
    if which not in GENERATORS:
        raise ValueError(f"generator must be one of {GENERATORS}")
    flavor = "neumann" if which == "H_N" else "dirichlet"
    form = assemble_form(field_, flavor)
    if which in ("H_D", "H_N"):
        return Generator(form.A, form.mass, which, field_)
    c, c0 = field_.c, field_.c0
    if which == "K_D-adjoint":
        c0 = c0 - divergence(field_)
        c = -c
    A = form.A + advection_matrix(field_, c) + sp.diags(form.mass * c0)
    return Generator(A.tocsr(), form.mass, which, field_, float(np.min(c0)))


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (snapshots, n) or (snapshots, n, batch)
    generator: str
    scheme: str
    dt: float

    def at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise MissingSnapshots(f"no snapshot at t={t}")
        return self.states[i]


def evolve(gen: Generator, psi0: np.ndarray, t_end: float, dt: float,
           snapshots: Sequence[float] | None = None, scheme: str = "implicit-euler",
           every: int | None = None, check_positivity: bool = True) -> Trajectory:
    """March ``psi0`` to ``t_end``; ``psi0`` may carry a trailing batch axis.

    Snapshots are recorded at the requested times (rounded to the step grid),
    or every ``every`` steps, always including t = 0 and ``t_end``.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}")
    if dt <= 0 or t_end < dt:
        raise ValueError("need dt > 0 and t_end >= dt")
    nsteps = int(round(t_end / dt))
    dt = t_end / nsteps
    want = {0, nsteps}
    if snapshots is not None:
        want |= {int(round(t / dt)) for t in snapshots if 0 <= t <= t_end * (1 + 1e-12)}
    if every:
        want |= set(range(0, nsteps + 1, every))

    M = sp.diags(gen.mass)
    A = gen.A - gen.shift * M
    theta = 1.0 if scheme == "implicit-euler" else 0.5
    lhs = (M + theta * dt * A).tocsc()
    rhs_op = (M - (1 - theta) * dt * A).tocsr()
    try:
        lu = splu(lhs)
    except RuntimeError as exc:
        raise SolverFailure(f"factorisation failed: {exc}") from None
    decay = math.exp(-gen.shift * dt)

    psi = np.array(psi0, dtype=float)
    positive = check_positivity and scheme == "implicit-euler" and np.all(psi >= 0)
    times, states = [0.0], [psi.copy()]
    for step in range(1, nsteps + 1):
        psi = decay * lu.solve(rhs_op @ psi)
        if positive:
            lo = psi.min()
            if lo < -1e-12 * max(1.0, np.abs(psi).max()):
                raise PositivityLost(f"negative value {lo:.3g} at t={step * dt:.6g}")
            np.maximum(psi, 0.0, out=psi)
        if step in want:
            if not np.all(np.isfinite(psi)):
                raise SolverFailure(f"non-finite state at t={step * dt:.6g}")
            times.append(step * dt)
            states.append(psi.copy())
    return Trajectory(np.array(times), np.array(states), gen.which, scheme, dt)


def fourier_mass(t: float, terms: int = 99) -> float:
    """Dirichlet heat content on (0,1) from psi_0 = 1: (8/pi^2) sum_odd exp(-n^2 pi^2 t)/n^2."""
    n = np.arange(1, terms + 1, 2)
    return float(8 / np.pi**2 * np.sum(np.exp(-(n**2) * np.pi**2 * t) / n**2))


def mass_conservation_gap(field_: CoefficientField, t: float, dt: float,
                          generators: Sequence[str] = ("H_D", "H_N")) -> dict:
    """``1 - <M 1, psi_t> / <M 1, 1>`` with ``psi_0 = 1`` for each generator."""
    out = {}
    for which in generators:
        gen = assemble_generator(field_, which)
        if t <= 0:
            out[which] = 0.0
            continue
        traj = evolve(gen, np.ones(gen.n), t, min(dt, t))
        total = gen.mass.sum()
        out[which] = float(1 - gen.mass @ traj.states[-1] / total)
    return out


@dataclass
class GapTrace:
    t: float
    h: list
    gaps: list
    verdict: str
    fit: object = None

    def as_dict(self) -> dict:
        return {"t": self.t, "h": self.h, "gap": self.gaps, "verdict": self.verdict,
                "fit": self.fit.as_dict() if self.fit else None}


def mass_gap_trace(problem: Problem, resolutions: Sequence[int], t: float = 0.1,
                   steps: int = 200, tol: float = 1e-2) -> GapTrace:
    """H_D mass gap over refinement; ``vanishing`` or ``stable`` (positive)."""
    hs, gaps = [], []
    for res in resolutions:
        fld = problem.discretize(res)
        gaps.append(mass_conservation_gap(fld, t, t / steps, ("H_D",))["H_D"])
        hs.append(fld.grid.hmax)
    fit = classify_decay(hs, gaps, tol)
    verdict = {"zero": "vanishing", "positive": "stable"}.get(fit.verdict, "inconclusive")
    return GapTrace(t, hs, gaps, verdict, fit)


def extension_discrepancy(field_: CoefficientField, phi: np.ndarray, t: float, dt: float) -> float:
    """``||(exp(-t H_D) - exp(-t H_N)) phi||_2``."""
    phi = np.asarray(phi, dtype=float)
    d = evolve(assemble_generator(field_, "H_D"), phi, t, dt, check_positivity=False).states[-1]
    nn = evolve(assemble_generator(field_, "H_N"), phi, t, dt, check_positivity=False).states[-1]
    return float(np.sqrt(field_.grid.vol * np.sum((d - nn) ** 2)))


def fourier_discrepancy_sq(t: float, terms: int = 99) -> float:
    """``||exp(-tH_D)1 - 1||^2`` on (0,1), c = 1 (Neumann keeps 1 fixed)."""
    n = np.arange(1, terms + 1, 2)
    energy = float(8 / np.pi**2 * np.sum(np.exp(-2 * n**2 * np.pi**2 * t) / n**2))
    return 1 - 2 * fourier_mass(t, terms) + energy


# --------------------------------------------------------------------------
# weighted energy (Caccioppoli) check


@dataclass
class CaccioppoliReport:
    premise_ok: bool
    premise_worst: float
    lhs: float
    rhs: float
    residual: float
    allowance: float
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def ball_distance(dist: DistanceField, r: float) -> np.ndarray:
    """Distance to B(r); in a length space this is ``max(rho - r, 0)``."""
    return np.maximum(dist.values - r, 0.0)


def _weight_gamma(dist: DistanceField, rho_r: np.ndarray) -> np.ndarray:
    g = upwind_gradient(dist.grid, rho_r)
    return np.einsum("nk,nkl,nl->n", g, dist.field.C, g)


def check_weight_premise(dist: DistanceField, r: float, nu: float, gamma_const: float,
                         s: float, times: np.ndarray, tol: float = 0.15) -> tuple[bool, float]:
    """Test ``xi_t' + (4 nu)^-1 Gamma(xi_t) <= 0`` nodewise for ``xi = nu rho_r^2/(t-s)``.

    With ``nu = (8 gamma)^-1`` the implemented inequality is
    ``xi' + 2 gamma Gamma(xi) <= 0``.  The relative slack is ``tol`` or the
    squared metric stencil error, whichever is larger, since that error enters
    ``Gamma(rho_r)``.  Returns (ok, worst normalised excess).
    """
    eps = field_stencil_error(dist.field, dist.order)
    tol = max(tol, (1 + eps) ** 2 - 1)
    rho_r = ball_distance(dist, r)
    fin = np.isfinite(rho_r) & (rho_r > 0)
    rr = rho_r[fin]
    g_rho = _weight_gamma(dist, np.where(np.isfinite(rho_r), rho_r, 1e300))[fin]
    worst = -np.inf
    for t in times:
        dxi = -nu * rr**2 / (t - s) ** 2
        g_xi = (2 * nu * rr / (t - s)) ** 2 * g_rho
        excess = (dxi + 2 * gamma_const * g_xi) / np.abs(dxi)
        worst = max(worst, float(excess.max(initial=-np.inf)))
    return worst <= tol, worst


def verify_caccioppoli(dist: DistanceField, traj: Trajectory, r: float, delta: float,
                       gamma_const: float = 1.0, nu: float | None = None, premise_tol: float = 0.15,
                       tol: float = 1e-3, c_alloc: float = 1.0) -> CaccioppoliReport:
    """Weighted energy inequality on ``[tau - delta, tau]`` with ``tau`` the last snapshot.

    ``||eta e^xi psi||^2 (tau) <= ||eta e^xi psi||^2 (tau - delta)
    + 2 gamma int (e^xi psi, Gamma(eta) e^xi psi) dt`` with ``eta = theta_r``,
    ``xi_t = nu rho_r^2 / (t - s)``, ``s = tau + delta``.
    """
    from .capacity import radial_cutoff
    from .forms import gamma

    nu = 1.0 / (8 * gamma_const) if nu is None else nu
    tau = float(traj.times[-1])
    t0 = tau - delta
    sel = traj.times >= t0 - 1e-12
    if sel.sum() < 2 or abs(traj.times[sel][0] - t0) > 1e-9 * max(1, tau):
        raise MissingSnapshots("trajectory lacks snapshots covering [tau - delta, tau]")
    times = traj.times[sel]
    states = traj.states[sel]
    s = tau + delta

    ok, worst = check_weight_premise(dist, r, nu, gamma_const, s, times, premise_tol)
    eta = radial_cutoff(dist, r, "theta").values
    g_eta = gamma(dist.field, eta)
    rho_r = ball_distance(dist, r)
    vol = dist.grid.vol

    def weighted(t, psi):
        w = np.exp(nu * rho_r**2 / (t - s))  # xi <= 0, so w in (0, 1]
        return w * psi

    def sq(x):
        return vol * float(np.sum(x * x))

    lhs = sq(eta * weighted(times[-1], states[-1]))
    start = sq(eta * weighted(times[0], states[0]))
    integrand = np.array([vol * float(np.sum(g_eta * weighted(t, p) ** 2)) for t, p in zip(times, states)])
    rhs = start + 2 * gamma_const * float(trapezoid(integrand, times))
    allowance = c_alloc * (dist.grid.hmax + traj.dt) * max(abs(rhs), 1e-300)
    resid = lhs - rhs
    passed = ok and resid <= tol * (abs(lhs) + abs(rhs)) + allowance
    detail = "premise holds" if ok else f"weight premise fails (worst excess {worst:.3g})"
    return CaccioppoliReport(ok, worst, lhs, rhs, resid, allowance, passed, detail)
