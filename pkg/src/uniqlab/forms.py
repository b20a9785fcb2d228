"""Carré du champ and the minimal / maximal Dirichlet forms on the lattice.

The form is assembled edge by edge.  Each node matrix C is split over the
stencil directions ``e_k`` and ``e_k +/- e_l`` with weights ``w`` such that
``sum w v v^T = C``; the form is then ``sum vol * w * (phi_i - phi_j)^2``.
With diagonally dominant C (in the scaled sense below) every weight is
nonnegative and both flavours are Dirichlet forms in the discrete sense.

``dirichlet`` flavour: edges leaving the domain through the true boundary see
a ghost value 0.  ``neumann`` flavour: those edges are dropped.  Edges that
cross a truncation face are dropped in both flavours.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from .grid import CoefficientField, Grid

log = logging.getLogger(__name__)

FLAVORS = ("dirichlet", "neumann")


def gradient_operators(grid: Grid) -> list[sp.csr_matrix]:
    """Sparse partial-derivative matrices, centred where possible.

    At a node missing one axis neighbour the one-sided difference is used; with
    both neighbours missing the derivative is zero.
    """
    ops = []
    n = grid.n
    rows = np.arange(n)
    for k in range(grid.dim):
        e = np.zeros(grid.dim, dtype=int)
        e[k] = 1
        fwd = grid.index.flat[np.where((f := grid.neighbours(e)) >= 0, f, 0)]
        fwd = np.where(f >= 0, fwd, -1)
        bwd = grid.index.flat[np.where((b := grid.neighbours(-e)) >= 0, b, 0)]
        bwd = np.where(b >= 0, bwd, -1)
        hk = grid.h[k]
        both = (fwd >= 0) & (bwd >= 0)
        only_f = (fwd >= 0) & (bwd < 0)
        only_b = (bwd >= 0) & (fwd < 0)
        r = np.concatenate([rows[both], rows[both], rows[only_f], rows[only_f], rows[only_b], rows[only_b]])
        c = np.concatenate([fwd[both], bwd[both], fwd[only_f], rows[only_f], rows[only_b], bwd[only_b]])
        v = np.concatenate([
            np.full(both.sum(), 0.5 / hk), np.full(both.sum(), -0.5 / hk),
            np.full(only_f.sum(), 1 / hk), np.full(only_f.sum(), -1 / hk),
            np.full(only_b.sum(), 1 / hk), np.full(only_b.sum(), -1 / hk),
        ])
        ops.append(sp.csr_matrix((v, (r, c)), shape=(n, n)))
    return ops


def upwind_gradient(grid: Grid, values: np.ndarray) -> np.ndarray:
    """One-sided differences taken towards the smaller neighbour on each axis.

    Non-finite neighbours are ignored.  At a local minimum along an axis the
    component is zero, so ridges (cut locus) and the source do not inflate
    the gradient.
    """
    values = np.asarray(values, dtype=float)
    g = np.zeros((grid.n, grid.dim))
    for k in range(grid.dim):
        e = np.zeros(grid.dim, dtype=int)
        e[k] = 1
        nb = []
        for off in (-e, e):
            f = grid.neighbours(off)
            idx = np.where(f >= 0, grid.index.flat[np.where(f >= 0, f, 0)], -1)
            v = np.where(idx >= 0, values[np.maximum(idx, 0)], np.inf)
            nb.append(np.where(np.isfinite(v), v, np.inf))
        back, fwd = nb
        use_b = (back < values) & (back <= fwd)
        use_f = (fwd < values) & ~use_b
        hk = grid.h[k]
        g[use_b, k] = (values[use_b] - back[use_b]) / hk
        g[use_f, k] = (fwd[use_f] - values[use_f]) / hk
    return g


def gamma(field: CoefficientField, phi: np.ndarray, method: str = "centered") -> np.ndarray:
    """Nodewise carré du champ ``sum_kl c_kl d_k phi d_l phi``."""
    phi = np.asarray(phi, dtype=float)
    if method == "centered":
        g = np.stack([D @ phi for D in gradient_operators(field.grid)], axis=1)
    elif method == "upwind":
        g = upwind_gradient(field.grid, phi)
    else:
        raise ValueError(f"unknown gradient method {method!r}")
    return np.maximum(np.einsum("nk,nkl,nl->n", g, field.C, g), 0.0)


def gamma_matrix(field: CoefficientField, weights: np.ndarray | None = None) -> sp.csr_matrix:
    """Matrix G with ``phi^T G phi = sum vol * weights * gamma(phi)`` (centred stencil)."""
    grid = field.grid
    w = np.ones(grid.n) if weights is None else np.asarray(weights, dtype=float)
    ops = gradient_operators(grid)
    G = sp.csr_matrix((grid.n, grid.n))
    for k in range(grid.dim):
        for l in range(grid.dim):
            ckl = field.C[:, k, l]
            if not np.any(ckl):
                continue
            G = G + ops[k].T @ sp.diags(grid.vol * w * ckl) @ ops[l]
    return ((G + G.T) * 0.5).tocsr()


@dataclass(eq=False)
class FieldFunction:
    """Node values on the grid of ``field``.

    ``zero_extended`` marks a member of the discrete Dirichlet domain
    surrogate: the values must vanish on collar(1).
    """

    field: CoefficientField
    values: np.ndarray
    zero_extended: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.field.grid.n,):
            raise ValueError("values must have one entry per interior node")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field function has non-finite values")
        if self.zero_extended and np.any(self.values[self.field.grid.collar(1)] != 0):
            raise ValueError("zero-extended function must vanish on collar(1)")

    @property
    def grid(self) -> Grid:
        return self.field.grid


def _split_weights(C: np.ndarray, h: tuple) -> dict:
    """Stencil weights reproducing C: axis ``k`` and diagonals ``(k, l, +/-1)``."""
    d = C.shape[1]
    out = {}
    for k in range(d):
        off = sum(np.abs(C[:, k, l]) * h[k] / h[l] for l in range(d) if l != k) if d > 1 else 0.0
        out[k] = (C[:, k, k] - off) / h[k] ** 2
    for k, l in combinations(range(d), 2):
        out[(k, l, 1)] = np.maximum(C[:, k, l], 0.0) / (h[k] * h[l])
        out[(k, l, -1)] = np.maximum(-C[:, k, l], 0.0) / (h[k] * h[l])
    return out


def _offset(key, d: int) -> np.ndarray:
    v = np.zeros(d, dtype=int)
    if isinstance(key, tuple):
        k, l, s = key
        v[k], v[l] = 1, s
    else:
        v[key] = 1
    return v


@dataclass(eq=False)
class SparseForm:
    """Assembled quadratic form ``phi -> phi^T A phi`` with lumped mass ``M``.

    ``edges`` holds interior pairs ``(i, j, W)`` and ``bnd`` the ghost-zero
    terms ``(i, W)``; ``A`` is their sum.
    """

    A: sp.csr_matrix
    mass: np.ndarray
    flavor: str
    field: CoefficientField
    edges: tuple
    bnd: tuple

    @property
    def grid(self) -> Grid:
        return self.field.grid

    def value(self, phi: np.ndarray) -> float:
        phi = np.asarray(phi, dtype=float)
        return float(phi @ (self.A @ phi))

    def energy_density(self, phi: np.ndarray) -> np.ndarray:
        """Edge-split density whose mass-weighted sum is exactly ``value(phi)``."""
        phi = np.asarray(phi, dtype=float)
        i, j, W = self.edges
        e = W * (phi[i] - phi[j]) ** 2
        dens = 0.5 * (np.bincount(i, e, self.grid.n) + np.bincount(j, e, self.grid.n))
        bi, bW = self.bnd
        dens += np.bincount(bi, bW * phi[bi] ** 2, self.grid.n)
        return dens / self.grid.vol

    def to_triplets(self, path) -> None:
        coo = self.A.tocoo()
        np.savetxt(path, np.column_stack([coo.row, coo.col, coo.data]), fmt=["%d", "%d", "%.17g"],
                   header=f"row col value  flavor={self.flavor} n={self.A.shape[0]}")


def assemble_form(field: CoefficientField, flavor: str = "neumann") -> SparseForm:
    if flavor not in FLAVORS:
        raise ValueError(f"flavor must be one of {FLAVORS}")
    grid = field.grid
    d = grid.dim
    n = grid.n
    own = _split_weights(field.C, grid.h)
    if any(np.any(w < 0) for key, w in own.items() if not isinstance(key, tuple)):
        log.warning("C is not diagonally dominant on the lattice; the form is consistent but "
                    "not an M-matrix, so discrete positivity may fail")

    ii, jj, WW, bi, bW = [], [], [], [], []
    rows = np.arange(n)
    for key in own:
        if isinstance(key, tuple) and not np.any(field.C[:, key[0], key[1]]):
            continue
        v = _offset(key, d)
        for sign in (1, -1):
            flat = grid.neighbours(sign * v)
            tgt = np.where(flat >= 0, grid.index.flat[np.maximum(flat, 0)], -1)
            if sign == 1:
                pair = tgt >= 0
                a, b = rows[pair], tgt[pair]
                Cm = 0.5 * (field.C[a] + field.C[b])
                w = _split_weights(Cm, grid.h)[key]
                keep = w != 0
                ii.append(a[keep]); jj.append(b[keep]); WW.append(grid.vol * w[keep])
            if flavor == "dirichlet":
                ext = (flat >= 0) & (tgt < 0)
                ext[ext] = grid.true_exterior.flat[flat[ext]]
                w = own[key][ext]
                keep = w != 0
                bi.append(rows[ext][keep]); bW.append(grid.vol * w[keep])

    i = np.concatenate(ii) if ii else np.zeros(0, dtype=int)
    j = np.concatenate(jj) if jj else np.zeros(0, dtype=int)
    W = np.concatenate(WW) if WW else np.zeros(0)
    b_i = np.concatenate(bi) if bi else np.zeros(0, dtype=int)
    b_W = np.concatenate(bW) if bW else np.zeros(0)

    diag = np.bincount(i, W, n) + np.bincount(j, W, n) + np.bincount(b_i, b_W, n)
    A = sp.coo_matrix(
        (np.concatenate([diag, -W, -W]), (np.concatenate([rows, i, j]), np.concatenate([rows, j, i]))),
        shape=(n, n),
    ).tocsr()
    A = ((A + A.T) * 0.5).tocsr()
    mass = np.full(n, grid.vol)
    return SparseForm(A, mass, flavor, field, (i, j, W), (b_i, b_W))


def graph_norm(form: SparseForm, phi: np.ndarray) -> float:
    """``(h(phi) + ||phi||_2^2)^(1/2)``."""
    phi = np.asarray(phi, dtype=float)
    return float(np.sqrt(form.value(phi) + phi @ (form.mass * phi)))


def l2_norm(grid: Grid, phi: np.ndarray) -> float:
    phi = np.asarray(phi, dtype=float)
    return float(np.sqrt(grid.vol * (phi @ phi)))
