"""Domains, rectilinear grids and sampled coefficient fields.

A domain is described analytically (a shape tag plus parameters) or by an
explicit 0/1 mask.  ``build_grid`` lays a node-centred lattice over the
bounding box; nodes on the box faces are never interior.  Box faces flagged as
*truncated* are window edges of an unbounded domain: exterior nodes there are
kept apart from the true exterior and are never treated as boundary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage

from .errors import ConfigError, Disconnected, EmptyInterior, NonFinite, NotPositiveDefinite
from .expr import compile_expression

log = logging.getLogger(__name__)

SHAPES = ("box", "disk", "annulus", "punctured-box", "punctured-disk", "cusp-strip", "mask")


def face_tag(axis: int, side: int) -> str:
    return f"x{axis + 1}{'+' if side > 0 else '-'}"


@dataclass(frozen=True, eq=False)
class DomainSpec:
    dim: int
    lower: tuple
    upper: tuple
    shape: str = "box"
    params: Mapping = field(default_factory=dict)
    truncated: frozenset = frozenset()
    origin: tuple | None = None
    mask: np.ndarray | None = None

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigError(f"dimension must be 1, 2 or 3, got {self.dim}")
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        if len(self.lower) != self.dim or len(self.upper) != self.dim:
            raise ConfigError("bounding box does not match dimension")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ConfigError("bounding box must have lower < upper on every axis")
        if self.shape not in SHAPES:
            raise ConfigError(f"unknown shape {self.shape!r}; expected one of {SHAPES}")
        origin = tuple(float(v) for v in (self.origin or (0.0,) * self.dim))
        if len(origin) != self.dim:
            raise ConfigError("origin does not match dimension")
        if any(not lo <= o <= hi for o, lo, hi in zip(origin, self.lower, self.upper)):
            raise ConfigError("bounding box must contain the origin")
        object.__setattr__(self, "origin", origin)
        faces = frozenset(self.truncated)
        valid = {face_tag(k, s) for k in range(self.dim) for s in (-1, 1)}
        if not faces <= valid:
            raise ConfigError(f"bad truncation faces {sorted(faces - valid)}")
        object.__setattr__(self, "truncated", faces)
        if self.shape == "mask":
            if self.mask is None:
                raise ConfigError("shape 'mask' needs an explicit mask")
            m = np.asarray(self.mask, dtype=bool)
            if m.ndim != self.dim:
                raise ConfigError("mask dimension does not match")
            object.__setattr__(self, "mask", m)

    @property
    def unbounded(self) -> bool:
        return bool(self.truncated)

    def _box(self, pts: np.ndarray) -> np.ndarray:
        ok = np.ones(len(pts), dtype=bool)
        for k in range(self.dim):
            if face_tag(k, -1) not in self.truncated:
                ok &= pts[:, k] > self.lower[k]
            if face_tag(k, 1) not in self.truncated:
                ok &= pts[:, k] < self.upper[k]
        return ok

    def inside(self, pts: np.ndarray) -> np.ndarray:
        """Inside predicate of the open set, evaluated at points of shape (n, d)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        p = self.params
        ok = self._box(pts)
        if self.shape in ("disk", "punctured-disk", "annulus"):
            centre = np.asarray(p.get("center", (0.0,) * self.dim), dtype=float)
            r = np.linalg.norm(pts - centre, axis=1)
            if self.shape == "annulus":
                ok &= (r > float(p.get("r_inner", 0.5))) & (r < float(p.get("r_outer", 1.0)))
            else:
                ok &= r < float(p.get("radius", 1.0))
        elif self.shape == "cusp-strip":
            if self.dim != 2:
                raise ConfigError("cusp-strip is two-dimensional")
            width = float(p.get("width", 1.0)) * np.exp(-float(p.get("rate", 1.0)) * np.abs(pts[:, 0]))
            ok &= np.abs(pts[:, 1] - float(p.get("axis", 0.0))) < width
        return ok

    @property
    def punctures(self) -> np.ndarray:
        pts = self.params.get("punctures")
        if pts is None and self.shape.startswith("punctured"):
            pts = [self.params.get("puncture", (0.0,) * self.dim)]
        if pts is None:
            return np.zeros((0, self.dim))
        return np.atleast_2d(np.asarray(pts, dtype=float))


def _full_structure(dim: int) -> np.ndarray:
    return ndimage.generate_binary_structure(dim, dim)


@dataclass(eq=False)
class Grid:
    spec: DomainSpec
    shape: tuple
    h: tuple
    axes: list
    mask: np.ndarray
    excluded: np.ndarray
    window: np.ndarray
    true_exterior: np.ndarray

    def __post_init__(self):
        self.index = np.full(self.shape, -1, dtype=np.int64)
        self.nodes = np.flatnonzero(self.mask)
        self.index.flat[self.nodes] = np.arange(self.nodes.size)
        self.vol = float(np.prod(self.h))
        self._collars = {k: self.collar(k) for k in (1, 2, 3)}

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def n(self) -> int:
        return int(self.nodes.size)

    @cached_property
    def points(self) -> np.ndarray:
        sub = np.unravel_index(self.nodes, self.shape)
        return np.stack([self.axes[k][sub[k]] for k in range(self.dim)], axis=1)

    @cached_property
    def subs(self) -> np.ndarray:
        """Integer lattice coordinates of interior nodes, shape (n, d)."""
        return np.stack(np.unravel_index(self.nodes, self.shape), axis=1)

    @property
    def hmax(self) -> float:
        return max(self.h)

    def collar(self, k: int, target: np.ndarray | None = None) -> np.ndarray:
        """Interior nodes within ``k`` cells (Chebyshev) of the true exterior.

        ``target`` optionally restricts the exterior to a boolean node mask, e.g.
        one entry of :meth:`exterior_components`.  Returned over interior nodes.
        """
        if k < 1:
            raise ValueError("collar width must be >= 1")
        if target is None and k in getattr(self, "_collars", {}):
            return self._collars[k]
        ext = self.true_exterior if target is None else (self.true_exterior & target)
        if not ext.any():
            return np.zeros(self.n, dtype=bool)
        grown = ndimage.binary_dilation(ext, structure=_full_structure(self.dim), iterations=k)
        return (grown & self.mask).ravel()[self.nodes]

    def exterior_components(self) -> list[np.ndarray]:
        """Connected pieces of the true exterior that touch the interior."""
        labels, count = ndimage.label(self.true_exterior, structure=_full_structure(self.dim))
        out = []
        for lab in range(1, count + 1):
            comp = labels == lab
            if self.collar(1, comp).any():
                out.append(comp)
        return out

    def exterior_near(self, points: Sequence) -> np.ndarray:
        """True-exterior nodes within one cell diagonal of any of ``points``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        grid_pts = np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        tol = float(np.linalg.norm(self.h)) * (1 + 1e-9)
        near = np.zeros(grid_pts.shape[0], dtype=bool)
        for p in pts:
            near |= np.linalg.norm(grid_pts - p, axis=1) <= tol
        return near.reshape(self.shape) & self.true_exterior

    @cached_property
    def window_edge(self) -> np.ndarray:
        """Interior nodes in the outermost layer next to a truncation face."""
        if not self.window.any():
            return np.zeros(self.n, dtype=bool)
        grown = ndimage.binary_dilation(self.window, structure=_full_structure(self.dim))
        return (grown & self.mask).ravel()[self.nodes]

    def nearest(self, point: Sequence[float]) -> tuple:
        return tuple(int(np.argmin(np.abs(ax - float(p)))) for ax, p in zip(self.axes, point))

    def interior_index(self, point: Sequence[float]) -> int:
        """Interior index of the node nearest ``point``, or -1 if it is not interior."""
        return int(self.index[self.nearest(point)])

    def to_array(self, values: np.ndarray, fill: float = np.nan) -> np.ndarray:
        out = np.full(self.shape, fill, dtype=float)
        out.flat[self.nodes] = values
        return out

    def neighbours(self, offset: Sequence[int]) -> np.ndarray:
        """For each interior node, the flat node id at ``+offset`` (-1 if off the lattice)."""
        tgt = self.subs + np.asarray(offset, dtype=np.int64)
        ok = np.all((tgt >= 0) & (tgt < np.asarray(self.shape)), axis=1)
        flat = np.full(self.n, -1, dtype=np.int64)
        flat[ok] = np.ravel_multi_index(tuple(tgt[ok].T), self.shape)
        return flat


def build_grid(spec: DomainSpec, resolution) -> Grid:
    """Lay a lattice with ``resolution`` nodes per axis over the bounding box of ``spec``."""
    if spec.shape == "mask":
        shape = spec.mask.shape
        if resolution is not None and tuple(np.broadcast_to(resolution, (spec.dim,))) != shape:
            raise ConfigError(f"mask shape {shape} does not match resolution {resolution}")
    else:
        shape = tuple(int(r) for r in np.broadcast_to(resolution, (spec.dim,)))
    if any(n < 3 for n in shape):
        raise ConfigError("resolution must be >= 3 nodes per axis")
    axes = [np.linspace(spec.lower[k], spec.upper[k], shape[k]) for k in range(spec.dim)]
    h = tuple((spec.upper[k] - spec.lower[k]) / (shape[k] - 1) for k in range(spec.dim))
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.dim)

    if spec.shape == "mask":
        inside = spec.mask.copy()
        for k in range(spec.dim):
            for side in (-1, 1):
                if face_tag(k, side) not in spec.truncated:
                    sl = [slice(None)] * spec.dim
                    sl[k] = 0 if side < 0 else -1
                    inside[tuple(sl)] = False
    else:
        inside = spec.inside(mesh).reshape(shape)

    excluded = np.zeros(shape, dtype=bool)
    for p in spec.punctures:
        cell = np.all(np.abs(mesh - p) <= 0.5 * np.asarray(h) * (1 + 1e-9), axis=1)
        excluded |= cell.reshape(shape)
    inside &= ~excluded

    on_face = np.zeros(shape, dtype=bool)
    on_trunc = np.zeros(shape, dtype=bool)
    for k in range(spec.dim):
        for side in (-1, 1):
            sl = [slice(None)] * spec.dim
            sl[k] = 0 if side < 0 else -1
            on_face[tuple(sl)] = True
            if face_tag(k, side) in spec.truncated:
                on_trunc[tuple(sl)] = True
    window = on_trunc & inside
    mask = inside & ~on_face
    true_exterior = ~mask & ~window

    if not mask.any():
        raise EmptyInterior(f"no interior node for shape {spec.shape!r} at resolution {shape}")
    _, ncomp = ndimage.label(mask)
    if ncomp > 1:
        raise Disconnected(f"interior mask has {ncomp} edge-connected components")
    return Grid(spec, shape, h, axes, mask, excluded, window, true_exterior)


def load_mask(path, dim: int) -> np.ndarray:
    """Read a row-major 0/1 text mask (whitespace separated or packed digits)."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split() if (" " in line or "\t" in line) else list(line)
            rows.append([int(t) for t in tokens])
    arr = np.asarray(rows, dtype=int)
    if dim == 1:
        arr = arr.ravel()
    if not np.isin(arr, (0, 1)).all():
        raise ConfigError("mask file must contain only 0 and 1")
    return arr.astype(bool)


@dataclass(frozen=True, eq=False)
class CoefficientSpec:
    """Analytic coefficient expressions.

    ``entries`` maps ``c11, c12, ...`` (upper triangle of C), ``c1 .. cd``
    (drift) and ``c0`` to expression strings.  Missing diagonal entries default
    to 1, everything else to 0.
    """

    dim: int
    entries: Mapping = field(default_factory=dict)
    tag: str = "analytic"

    def expression(self, key: str) -> str:
        if key in self.entries:
            return str(self.entries[key])
        if len(key) == 3 and key[1] == key[2]:
            return "1"
        return "0"

    @property
    def has_drift(self) -> bool:
        return any(self.expression(f"c{k + 1}") != "0" for k in range(self.dim))

    @property
    def is_symmetric(self) -> bool:
        """True when K reduces to H (no drift, no potential)."""
        return not self.has_drift and self.expression("c0") == "0"


@dataclass(eq=False)
class CoefficientField:
    """Coefficients sampled at the interior nodes of ``grid``.

    ``C`` has shape (n, d, d), ``c`` shape (n, d), ``c0`` shape (n,).
    """

    grid: Grid
    C: np.ndarray
    c: np.ndarray
    c0: np.ndarray
    provenance: str = "analytic"
    spec: CoefficientSpec | None = None

    def validate(self) -> None:
        for name in ("C", "c", "c0"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise NonFinite(f"coefficient {name} has non-finite values")
        if not np.array_equal(self.C, np.swapaxes(self.C, 1, 2)):
            raise NotPositiveDefinite("coefficient matrix is not symmetric")
        lam = np.linalg.eigvalsh(self.C).min(axis=1)
        bad = np.flatnonzero(~(lam > 0))
        if bad.size:
            x = self.grid.points[bad[0]]
            raise NotPositiveDefinite(
                f"C(x) not positive definite at {bad.size} node(s), first at x={x.tolist()} "
                f"(smallest eigenvalue {lam[bad[0]]:.3g})"
            )

    @property
    def has_drift(self) -> bool:
        return bool(np.any(self.c != 0))


def sample_coefficients(spec: CoefficientSpec, grid: Grid) -> CoefficientField:
    """Evaluate ``spec`` at the interior nodes; only the upper triangle of C is read."""
    d = grid.dim
    if spec.dim != d:
        raise ConfigError("coefficient dimension does not match grid")
    pts = grid.points
    C = np.empty((grid.n, d, d))
    for k in range(d):
        for l in range(k, d):
            v = compile_expression(spec.expression(f"c{k + 1}{l + 1}"), d)(pts)
            C[:, k, l] = v
            C[:, l, k] = v
    c = np.stack([compile_expression(spec.expression(f"c{k + 1}"), d)(pts) for k in range(d)], axis=1)
    c0 = compile_expression(spec.expression("c0"), d)(pts)
    field_ = CoefficientField(grid, C, c, c0, provenance=spec.tag, spec=spec)
    field_.validate()
    return field_


@dataclass(eq=False)
class Problem:
    """A domain together with analytic coefficients; discretised on demand."""

    domain: DomainSpec
    coefficients: CoefficientSpec
    name: str = "custom"

    def __post_init__(self):
        self._cache: dict = {}

    def discretize(self, resolution) -> CoefficientField:
        key = tuple(np.broadcast_to(resolution, (self.domain.dim,)).tolist()) if resolution is not None else None
        if key not in self._cache:
            self._cache[key] = sample_coefficients(self.coefficients, build_grid(self.domain, resolution))
        return self._cache[key]
