"""Hypothesis records, verdict logic and report emission.

Every hypothesis is evaluated over the refinement schedule of the config and
mapped to a three-valued status.  Conclusions list the hypotheses they consume
and are derived by fixed rules:

* Markov uniqueness is certified when the boundary capacity vanishes, the
  approximation condition C_A holds and the Dirichlet mass gap vanishes; it is
  refuted by a refinement-stable positive capacity or mass gap.
* L1-uniqueness of H is certified when balls are bounded, the volume growth
  condition holds and H is Markov unique; it is refuted only through a refuted
  Markov uniqueness (a failed growth condition is never a refutation).
* L1-uniqueness of K additionally needs the three lower-order conditions;
  when K differs from H only by a constant potential it inherits the H verdict.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

from .capacity import (CutoffSequence, ca_lower_bound, ca_sequence_from_capacity, capacity_trace,
                       constant_probe, gamma_probe, profile, verify_condition_CA)
from .config import Config
from .errors import UniqlabError
from .forms import FieldFunction
from .grid import Grid
from .lower_order import accretivity_shift, caccioppoli_gamma, compute_bounds
from .metric import (ball_volume_curve, balls_bounded, riemannian_distance, tacklind_test)
from .semigroup import assemble_generator, evolve, mass_gap_trace, verify_caccioppoli
from .trend import classify_decay

log = logging.getLogger(__name__)

SCHEMA_VERSION = "uniqlab-report/1"
STATUSES = ("certified", "refuted", "inconclusive")
HYPOTHESES = ("balls_bounded", "tacklind", "capacity", "condition_CA", "mass_gap", "markov_unique", "lower_order")
CONCLUSIONS = ("markov_uniqueness", "l1_uniqueness_H", "l1_uniqueness_K")
MARKS = {"certified": "✓", "refuted": "✗", "inconclusive": "?"}


def _plain(obj):
    """Convert numpy scalars/arrays and non-finite floats to JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


@dataclass
class Hypothesis:
    name: str
    status: str = "inconclusive"
    verdict: str = "not-run"
    evidence: dict = field(default_factory=dict)
    diagnostic: str = ""

    def to_dict(self) -> dict:
        return {"status": self.status, "verdict": self.verdict, "evidence": _plain(self.evidence),
                "diagnostic": self.diagnostic}


@dataclass
class Conclusion:
    name: str
    status: str = "inconclusive"
    consumes: list = field(default_factory=list)
    reason: str = ""

    def to_dict(self) -> dict:
        return {"status": self.status, "consumes": list(self.consumes), "reason": self.reason}


@dataclass
class UniquenessReport:
    scenario: str
    resolutions: list = field(default_factory=list)
    hypotheses: dict = field(default_factory=dict)
    conclusions: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)
    tables: dict = field(default_factory=dict, repr=False)  # CSV artefacts, not serialised

    def __post_init__(self):
        for name in HYPOTHESES:
            self.hypotheses.setdefault(name, Hypothesis(name))
        for name in CONCLUSIONS:
            self.conclusions.setdefault(name, Conclusion(name))
        self.flags.setdefault("witness_disagreement", False)
        self.flags.setdefault("refinement_inconsistency", False)
        self.flags.setdefault("window_limited", False)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "scenario": self.scenario,
            "resolutions": _plain(self.resolutions),
            "hypotheses": {k: self.hypotheses[k].to_dict() for k in HYPOTHESES},
            "conclusions": {k: self.conclusions[k].to_dict() for k in CONCLUSIONS},
            "flags": _plain(self.flags),
            "checks": _plain(self.checks),
            "diagnostics": list(self.diagnostics),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UniquenessReport":
        if data.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {data.get('schema')!r}")
        hyp = {k: Hypothesis(k, **v) for k, v in data["hypotheses"].items()}
        con = {k: Conclusion(k, **v) for k, v in data["conclusions"].items()}
        return cls(data["scenario"], data["resolutions"], hyp, con, dict(data["flags"]),
                   dict(data.get("checks", {})), list(data.get("diagnostics", [])))


# --------------------------------------------------------------------------
# helpers


def _guard(report: UniquenessReport, name: str, fn: Callable[[], None]) -> None:
    """Run one hypothesis computation; module errors become inconclusive records."""
    try:
        fn()
    except (UniqlabError, np.linalg.LinAlgError, ValueError, RuntimeError) as exc:
        msg = f"{type(exc).__name__}: {exc}"
        log.warning("%s: %s", name, msg)
        if name in report.hypotheses:
            h = report.hypotheses[name]
            h.status, h.verdict, h.diagnostic = "inconclusive", "error", msg
        else:
            report.checks[name] = {"passed": False, "diagnostic": msg}
        report.diagnostics.append(f"{name}: {msg}")


def boundary_divergence(hs, values) -> tuple[str, float]:
    """Does the boundary distance diverge under refinement?

    Returns ("diverging" | "converging" | "inconclusive", extrapolated limit).
    A logarithmic blow-up adds a roughly constant amount per halving of h; a
    finite limit shows geometrically shrinking increments.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2 or not np.all(np.isfinite(v)):
        return "inconclusive", math.nan
    inc = np.diff(v)
    if v.size >= 3:
        ratio = inc[-1] / inc[-2] if inc[-2] > 0 else (0.0 if inc[-1] <= 0 else math.inf)
        if ratio >= 0.85:
            return "diverging", math.inf
        if ratio <= 0.75:
            q = max(ratio, 0.0)
            return "converging", float(v[-1] + inc[-1] * q / (1 - q))
        return "inconclusive", math.nan
    if abs(inc[0]) < 0.05 * abs(v[-1]):
        return "converging", float(v[-1])
    return "inconclusive", math.nan


def component_anchor(point) -> Callable[[Grid], np.ndarray]:
    """Target selector: the true-exterior component nearest ``point`` on any grid."""
    p = np.asarray(point, dtype=float)

    def select(grid: Grid) -> np.ndarray:
        labels, _ = ndimage.label(grid.true_exterior, structure=ndimage.generate_binary_structure(grid.dim, grid.dim))
        ext = np.argwhere(grid.true_exterior)
        coords = np.stack([grid.axes[k][ext[:, k]] for k in range(grid.dim)], axis=1)
        j = int(np.argmin(np.linalg.norm(coords - p, axis=1)))
        return labels == labels[tuple(ext[j])]

    select.__name__ = "component near " + str(tuple(float(x) for x in p))
    return select


def _anchor_point(grid: Grid, comp: np.ndarray) -> tuple:
    """A lattice point of ``comp`` adjacent to the interior."""
    grown = ndimage.binary_dilation(grid.mask, structure=ndimage.generate_binary_structure(grid.dim, grid.dim))
    idx = np.argwhere(comp & grown)[0]
    return tuple(float(grid.axes[k][idx[k]]) for k in range(grid.dim))


def _status(verdict: str, good: set, bad: set) -> str:
    return "certified" if verdict in good else ("refuted" if verdict in bad else "inconclusive")


# --------------------------------------------------------------------------
# certification


def certify(config: Config) -> UniquenessReport:
    problem = config.problem
    res = list(config.resolutions)
    an = config.analysis
    tol = float(an["tol_cap"])
    r_max = float(an["r_max"])
    report = UniquenessReport(problem.name, [list(np.broadcast_to(r, (problem.domain.dim,)).tolist()) for r in res])
    report.flags["window_limited"] = problem.domain.unbounded
    if len(res) < 2:
        report.diagnostics.append("only one resolution: refinement traces are unavailable")

    dists = {}

    def dist_for(r):
        if r not in dists:
            dists[r] = riemannian_distance(problem.discretize(r))
        return dists[r]

    finest = res[-1]
    state: dict = {}

    # balls -------------------------------------------------------------
    def do_balls():
        h = report.hypotheses["balls_bounded"]
        per = [balls_bounded(dist_for(r), r_max) for r in res]
        hs = [problem.discretize(r).grid.hmax for r in res]
        bvals = [b.boundary_rho_min for b in per]
        has_boundary = bool(problem.discretize(finest).grid.collar(1).any())
        trend, limit = boundary_divergence(hs, bvals) if has_boundary else ("no-boundary", math.inf)
        last = per[-1]
        h.evidence = {"per_resolution": [b.as_dict() for b in per], "boundary_distance": bvals,
                      "boundary_trend": trend, "boundary_limit": limit, "h": hs}
        state["r_star"] = last.r_star
        if last.verdict == "suspect-unbounded":
            h.verdict, h.status = "suspect-unbounded", "refuted"
            h.diagnostic = f"window edge reached at distance {last.r_star:.4g} < r_max = {r_max:g}"
        elif trend == "converging":
            h.verdict, h.status = "suspect-unbounded", "refuted"
            h.diagnostic = f"boundary at finite distance (limit ~ {limit:.4g}); rho does not blow up at the boundary"
        elif trend in ("diverging", "no-boundary"):
            h.verdict, h.status = last.verdict, "certified"
            h.diagnostic = ("distance to the boundary diverges under refinement" if trend == "diverging"
                            else "no boundary inside the window")
        else:
            h.verdict, h.status = last.verdict, "inconclusive"
            h.diagnostic = "boundary distance trace is undecided"

    _guard(report, "balls_bounded", do_balls)

    # volume growth -----------------------------------------------------
    def do_tacklind():
        h = report.hypotheses["tacklind"]
        d = dist_for(finest)
        n = int(an["n_radii"])
        radii = np.linspace(r_max / n, r_max, n)
        curve = ball_volume_curve(d, radii)
        report.tables["growth.csv"] = (("r", "volume", "truncated"), list(curve.rows()))
        tv = tacklind_test(curve)
        h.verdict = tv.classification
        h.status = _status(tv.classification, {"satisfied"}, {"violated"})
        h.evidence = tv.as_dict()
        h.diagnostic = tv.detail

    _guard(report, "tacklind", do_tacklind)

    # capacity ----------------------------------------------------------
    def do_capacity():
        h = report.hypotheses["capacity"]
        est = capacity_trace(problem, res, an["collars"], None, tol)
        state["capacity"] = est
        h.verdict = est.verdict
        h.status = _status(est.verdict, {"zero"}, {"positive"})
        h.evidence = est.as_dict()
        h.diagnostic = est.fit.detail if est.fit else ""
        report.tables["capacity.csv"] = (("h", "k", "resolution", "value"),
                                         [(p.h, p.k, p.resolution, p.value) for p in est.trace])
        grid = problem.discretize(finest).grid
        comps = grid.exterior_components()
        if len(comps) > 1:
            pieces = []
            for comp in comps:
                anchor = _anchor_point(grid, comp)
                e = capacity_trace(problem, res, an["collars"], component_anchor(anchor), tol)
                pieces.append({"anchor": anchor, "value": e.value, "verdict": e.verdict})
            h.evidence["components"] = pieces

    _guard(report, "capacity", do_capacity)

    # approximation condition C_A -------------------------------------
    def do_ca():
        h = report.hypotheses["condition_CA"]
        grid_f = problem.discretize(finest).grid
        has_boundary = bool(grid_f.collar(1).any())
        window = problem.domain.unbounded
        if window:
            r_star = state.get("r_star", math.inf)
            r_a = 0.25 * min(r_max, r_star)
            A = lambda g: _dist_on(g).values < r_a  # noqa: E731
            h.evidence["A"] = f"ball of radius {r_a:.4g}"
        else:
            A = lambda g: np.ones(g.n, dtype=bool)  # noqa: E731
            h.evidence["A"] = "whole domain"

        def _dist_on(g):
            for r in res:
                if problem.discretize(r).grid is g:
                    return dist_for(r)
            raise ValueError("grid not in refinement schedule")

        if has_boundary:
            seq = ca_sequence_from_capacity(problem, res, an["collars"])
        else:
            seq = CutoffSequence([], "radial-tau", [])
            for r in res:
                fld = problem.discretize(r)
                seq.functions.append(FieldFunction(fld, np.zeros(fld.grid.n), zero_extended=True))
                seq.scales.append(fld.grid.hmax)
        if window:
            # localise inside the window: tau = 1 on B(2 r_a), 0 beyond B(4 r_a)
            funcs = []
            for eta in seq.functions:
                d = _dist_on(eta.grid)
                base = eta.values if has_boundary else np.ones(eta.grid.n)
                tau = np.where(d.reached, profile("tau", d.values / (2 * r_a)), 0.0)
                funcs.append(FieldFunction(eta.field, base * tau, zero_extended=True))
            seq = CutoffSequence(funcs, seq.rule + "*tau", seq.scales)

        probes = {"one": constant_probe, "gamma_x1": lambda f: gamma_probe(f, lambda p: p[:, 0])}
        lower = None
        if not window and has_boundary:
            coarse = [_coarsen(r) for r in res]
            lbs, hs = [], []
            for r in coarse:
                fld = problem.discretize(r)
                lbs.append(ca_lower_bound(fld))
                hs.append(fld.grid.hmax)
            fit = classify_decay(hs, lbs, tol)
            h.evidence["lower_bound_trace"] = {"h": hs, "delta": lbs, "verdict": fit.verdict}
            if fit.verdict == "positive":
                lower = float(lbs[-1])
        rep = verify_condition_CA(A, seq, probes, tol, lower)
        h.verdict = rep.verdict
        h.status = _status(rep.verdict, {"satisfied"}, {"failed"})
        h.evidence.update(rep.as_dict())
        h.evidence["rule"] = seq.rule
        h.diagnostic = rep.detail
        report.tables["ca.csv"] = (("n", "a_n", "b_n"), rep.rows())

    _guard(report, "condition_CA", do_ca)

    # mass gap ----------------------------------------------------------
    def do_gap():
        h = report.hypotheses["mass_gap"]
        gt = mass_gap_trace(problem, res, float(an["t"]), int(an["steps"]), tol)
        h.verdict = gt.verdict
        h.status = _status(gt.verdict, {"vanishing"}, {"stable"})
        h.evidence = gt.as_dict()
        h.diagnostic = gt.fit.detail if gt.fit else ""

    _guard(report, "mass_gap", do_gap)

    # lower-order terms -------------------------------------------------
    def do_lower():
        h = report.hypotheses["lower_order"]
        per = [compute_bounds(problem.discretize(r)) for r in res]
        b = per[-1]
        h.evidence = b.as_dict()
        h.evidence["per_resolution"] = [{"omega0": p.omega0, "omega1": p.omega1, "kappa_max": p.kappa_max}
                                        for p in per]
        flags = [all(p.conditions.values()) for p in per]
        h.verdict = "satisfied" if all(flags) else "violated"
        h.status = "certified" if all(flags) else "refuted"
        if b.kappa_max > 0:
            h.evidence["sigma_min"] = accretivity_shift(b)
        if len(per) > 1:
            w = [p.omega1 for p in per]
            if np.ptp(w) > 0.1 * max(1.0, abs(w[-1])):
                report.flags["refinement_inconsistency"] = True
                report.diagnostics.append("omega1 changes by more than 10% across resolutions")
        h.diagnostic = "grid min/max surrogates" + ("; window-limited" if b.window_limited else "")
        state["bounds"] = b

    _guard(report, "lower_order", do_lower)

    # consistency checks (not consumed by conclusions) ------------------
    def do_cacc():
        fld = problem.discretize(finest)
        d = dist_for(finest)
        t = float(an["t"])
        steps = int(an["steps"])
        rho = d.values[d.reached]
        r = an["cacc_radius"] or 0.2 * float(np.max(rho))
        out = {}
        runs = [("H_D", 1.0)]
        if fld.has_drift and "bounds" in state and state["bounds"].kappa_max > 0:
            runs.append(("K_D", caccioppoli_gamma(state["bounds"])))
        for which, gam in runs:
            gen = assemble_generator(fld, which)
            traj = evolve(gen, np.ones(fld.grid.n), t, t / steps, every=1)
            rep = verify_caccioppoli(d, traj, r, t / 2, gam)
            out[which] = rep.as_dict()
            if which == "H_D":
                m = traj.states.sum(axis=1) * fld.grid.vol
                l2 = np.sqrt(fld.grid.vol * (traj.states ** 2).sum(axis=1))
                report.tables["trajectory.csv"] = (("t", "mass", "l2norm", "linfnorm"),
                                                   list(zip(traj.times, m, l2, traj.states.max(axis=1))))
        report.checks["caccioppoli"] = {"radius": r, "runs": out,
                                        "passed": all(v["passed"] for v in out.values())}

    _guard(report, "caccioppoli", do_cacc)

    def do_quasi():
        fld = problem.discretize(finest)
        if not fld.has_drift and np.ptp(fld.c0) == 0:
            return
        b = state.get("bounds") or compute_bounds(fld)
        t = float(an["t"])
        gen = assemble_generator(fld, "K_D")
        traj = evolve(gen, np.ones(fld.grid.n), t, t / int(an["steps"]), every=1)
        l1 = traj.states.sum(axis=1) / traj.states[0].sum()
        linf = traj.states.max(axis=1) / traj.states[0].max()
        b1 = np.exp(-(b.omega0 - b.omega1) * traj.times)
        binf = np.exp(-b.omega0 * traj.times)
        report.checks["quasi_contractivity"] = {
            "l1_ratio_max": float(np.max(l1 / b1)), "linf_ratio_max": float(np.max(linf / binf)),
            "passed": bool(np.all(l1 <= b1 * (1 + 1e-6)) and np.all(linf <= binf * (1 + 1e-6))),
        }

    _guard(report, "quasi_contractivity", do_quasi)

    decide(report, problem.coefficients.is_symmetric or _constant_potential(problem))
    return report


def _constant_potential(problem) -> bool:
    spec = problem.coefficients
    if spec.has_drift:
        return False
    try:
        float(spec.expression("c0"))
        return True
    except ValueError:
        return False


def _coarsen(r):
    """Oracle grid: a quarter of the resolution per axis, at least 9 nodes."""
    return tuple(max(9, (int(v) - 1) // 4 + 1) for v in np.atleast_1d(r)) if np.ndim(r) else max(9, (int(r) - 1) // 4 + 1)


def decide(report: UniquenessReport, k_trivial: bool) -> None:
    """Apply the conclusion rules to the hypothesis records (in place)."""
    H = report.hypotheses
    cap, ca, gap, balls = H["capacity"], H["condition_CA"], H["mass_gap"], H["balls_bounded"]

    if (cap.verdict == "zero") != (ca.verdict == "satisfied") and cap.verdict != "not-run":
        report.flags["witness_disagreement"] = True
        report.diagnostics.append(
            f"capacity verdict {cap.verdict!r} and C_A verdict {ca.verdict!r} disagree")
    if cap.verdict == "zero" and gap.verdict == "stable" or cap.verdict == "positive" and gap.verdict == "vanishing":
        report.flags["refinement_inconsistency"] = True
        report.diagnostics.append("capacity and mass-gap traces point in opposite directions")

    mk = H["markov_unique"]
    consumed = ["capacity", "condition_CA", "mass_gap"]
    if cap.status == "certified" and ca.status == "certified" and gap.status == "certified":
        if report.flags["window_limited"] and balls.verdict == "suspect-unbounded":
            mk.status, reason = "inconclusive", "window edge at finite distance; truncation may hide a boundary"
            consumed.append("balls_bounded")
        else:
            mk.status, reason = "certified", "capacity zero, C_A satisfied, mass gap vanishing"
    elif cap.status == "refuted" or gap.status == "refuted":
        mk.status = "refuted"
        reason = "refinement-stable positive " + " and ".join(
            n for n, x in (("capacity", cap), ("mass gap", gap)) if x.status == "refuted")
    else:
        mk.status, reason = "inconclusive", "witnesses incomplete"
    mk.verdict = {"certified": "unique", "refuted": "not-unique"}.get(mk.status, "undecided")
    mk.evidence = {"capacity": cap.verdict, "condition_CA": ca.verdict, "mass_gap": gap.verdict}
    mk.diagnostic = reason
    report.conclusions["markov_uniqueness"] = Conclusion("markov_uniqueness", mk.status, consumed, reason)

    need = ["balls_bounded", "tacklind", "markov_unique"]
    if all(H[n].status == "certified" for n in need):
        l1h = Conclusion("l1_uniqueness_H", "certified", need, "bounded balls, growth condition, Markov unique")
    elif mk.status == "refuted":
        l1h = Conclusion("l1_uniqueness_H", "refuted", need, "H is not Markov unique")
    else:
        missing = [n for n in need if H[n].status != "certified"]
        why = ", ".join(missing)
        if H["tacklind"].status == "refuted":
            why += " (sufficient growth condition fails)"
        l1h = Conclusion("l1_uniqueness_H", "inconclusive", need, f"not certified: {why}")
    report.conclusions["l1_uniqueness_H"] = l1h

    needk = need + ["lower_order"]
    if k_trivial:
        l1k = Conclusion("l1_uniqueness_K", l1h.status, needk, "K differs from H by a constant potential")
    elif l1h.status == "certified" and H["lower_order"].status == "certified":
        l1k = Conclusion("l1_uniqueness_K", "certified", needk, "H certified and lower-order conditions hold")
    else:
        l1k = Conclusion("l1_uniqueness_K", "inconclusive", needk,
                         "H not certified" if l1h.status != "certified" else "lower-order conditions fail")
    report.conclusions["l1_uniqueness_K"] = l1k


# --------------------------------------------------------------------------
# emission

_LABELS = {
    "balls_bounded": "balls B(r) bounded",
    "tacklind": "volume growth condition",
    "capacity": "capacity of the boundary vanishes",
    "condition_CA": "approximation condition C_A",
    "mass_gap": "Dirichlet mass gap vanishes",
    "lower_order": "lower-order conditions",
}


def emit(report: UniquenessReport, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2, ensure_ascii=False)
    if fmt != "text":
        raise ValueError("format must be json or text")
    H, C = report.hypotheses, report.conclusions
    lines = [f"uniqlab report: {report.scenario}",
             "resolutions: " + ", ".join("x".join(map(str, r)) if isinstance(r, list) else str(r)
                                          for r in report.resolutions), ""]
    for name, label in _LABELS.items():
        h = H[name]
        lines.append(f"  [{MARKS[h.status]}] {label}: {h.verdict}" + (f"  ({h.diagnostic})" if h.diagnostic else ""))
    lines.append("")
    m = C["markov_uniqueness"]
    lines.append(f"  capacity + C_A + mass gap -> Markov({MARKS[m.status]}): {m.status.upper()}")
    lines.append(f"  balls + growth + Markov -> L1(H)({MARKS[C['l1_uniqueness_H'].status]})")
    lines.append(f"  L1(H) + lower order -> L1(K)({MARKS[C['l1_uniqueness_K'].status]})")
    lines.append("")
    lines.append(f"Markov: {m.status.upper()}")
    lines.append(f"L1(H): {C['l1_uniqueness_H'].status.upper()} (Thm 1.1)")
    lines.append(f"L1(K): {C['l1_uniqueness_K'].status.upper()} (Thm 1.1)")
    flagged = [k for k, v in report.flags.items() if v and k != "window_limited"]
    if flagged:
        lines.append("FLAGS: " + ", ".join(flagged))
    if report.flags.get("window_limited"):
        lines.append("note: unbounded domain, evidence is limited to the computational window")
    for d in report.diagnostics:
        lines.append(f"diagnostic: {d}")
    return "\n".join(lines) + "\n"


def write_tables(report: UniquenessReport, out_dir) -> list:
    import csv
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, (header, rows) in report.tables.items():
        path = out / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_plain(v) for v in row])
        written.append(path)
    return written
