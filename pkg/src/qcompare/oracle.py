"""Brute-force ground truth for comparison distances and twin ranges.

Twin states are enumerated on a rectangular grid over the Bloch cube; points
outside the ball (and, for ``d = 3``, non-positive matrices) are rejected.
Probabilities are evaluated from explicit ``eta`` matrices, independently of
the quadratic-form shortcut used by the optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .effects import Effect, Povm, product
from .errors import BudgetExceededError, DimensionMismatchError, InvalidDimensionError
from .states import DensityMatrix, bloch_coords, matrix_from_bloch_coords

_CHUNK = 1 << 16


@dataclass(frozen=True)
class GridSpec:
    """``resolution`` points per axis; ``refine`` local zoom levels (0 = pure grid)."""

    resolution: int = 41
    budget: int = 10**7
    refine: int = 0

    def __post_init__(self):
        if self.resolution < 3:
            raise ValueError(f"resolution must be >= 3, got {self.resolution}")


def _check_dim(d):
    if d not in (2, 3):
        raise InvalidDimensionError(f"the grid oracle supports d = 2 or 3, got {d}")


_POINTS: dict = {}


def grid_points(d: int, g: GridSpec) -> np.ndarray:
    """Valid Bloch vectors on the grid, shape ``(N, d^2 - 1)``."""
    _check_dim(d)
    key = (d, g.resolution)
    if key in _POINTS:
        return _POINTS[key]
    n = d * d - 1
    total = g.resolution**n
    if total > g.budget:
        raise BudgetExceededError(f"grid has {total} points, budget is {g.budget}")
    radius = math.sqrt(d - 1)
    axis = np.linspace(-radius, radius, g.resolution)
    keep = []
    for start in range(0, total, _CHUNK * 4):
        idx = np.arange(start, min(total, start + _CHUNK * 4))
        digits = np.array(np.unravel_index(idx, (g.resolution,) * n)).T
        pts = axis[digits]
        pts = pts[np.einsum("ij,ij->i", pts, pts) <= radius**2 + 1e-12]
        if d > 2 and len(pts):
            w = np.linalg.eigvalsh(matrix_from_bloch_coords(pts, d))
            pts = pts[w[:, 0] >= -1e-12]
        keep.append(pts)
    out = np.concatenate(keep)
    out.setflags(write=False)
    if len(_POINTS) > 8:
        _POINTS.clear()
    _POINTS[key] = out
    return out


def twin_probabilities(effects, d: int, h: np.ndarray) -> np.ndarray:
    """``tr[E_j eta (x) eta]`` for each Bloch vector row of ``h``; shape ``(N, n_effects)``."""
    h = np.atleast_2d(h)
    e4 = [np.asarray(e.matrix).reshape(d, d, d, d) for e in effects]
    out = np.empty((len(h), len(e4)))
    for s in range(0, len(h), _CHUNK):
        eta = matrix_from_bloch_coords(h[s:s + _CHUNK], d)
        for j, e in enumerate(e4):
            # tr[E (eta (x) eta)] = sum E[k,l,i,j] eta[i,k] eta[j,l]
            out[s:s + _CHUNK, j] = np.einsum("klij,nik,njl->n", e, eta, eta, optimize=True).real
    return out


_TABLES: dict = {}


def _twin_table(p: Povm, g: GridSpec) -> np.ndarray:
    key = (p.fingerprint, p.dim, g.resolution)
    if key not in _TABLES:
        if len(_TABLES) > 32:
            _TABLES.clear()
        _TABLES[key] = twin_probabilities(p.effects, p.dim, grid_points(p.dim, g))
    return _TABLES[key]


def _local_grid(center, width, d):
    n = center.size
    m = 9 if d == 2 else 3
    offs = np.linspace(-width, width, m)
    mesh = np.array(np.meshgrid(*([offs] * n), indexing="ij")).reshape(n, -1).T
    pts = center + mesh
    radius = math.sqrt(d - 1)
    nrm = np.sqrt(np.einsum("ij,ij->i", pts, pts))
    out = nrm > radius
    pts[out] *= (radius / nrm[out])[:, None]
    if d > 2:
        w = np.linalg.eigvalsh(matrix_from_bloch_coords(pts, d))
        pts = pts[w[:, 0] >= -1e-12]
    return pts, 2 * width / (m - 1)


def _refine(objective, pts, vals, d, g, sign=1.0, keep=4):
    """Local zoom around the ``keep`` best grid points; returns the best value."""
    radius = math.sqrt(d - 1)
    spacing = 2 * radius / (g.resolution - 1)
    order = np.argsort(sign * vals, kind="stable")[:keep]
    best = sign * vals[order[0]]
    for i in order:
        c, w = pts[i].copy(), spacing
        for _ in range(g.refine):
            local, step = _local_grid(c, w, d)
            lv = sign * objective(local)
            j = int(np.argmin(lv))
            if lv[j] <= best:
                best = lv[j]
            c, w = local[j], step
    return sign * best


def grid_min_distance(p: Povm, rho: DensityMatrix, xi: DensityMatrix, g: GridSpec = GridSpec()) -> float:
    """Minimum of the distance objective over the grid of twin states.

    ``rho`` and ``xi`` are always added as twin candidates.  The result is an
    upper bound on the true distance.
    """
    d = rho.dim
    if xi.dim != d or p.dim != d:
        raise DimensionMismatchError("POVM and states must share the dimension")
    _check_dim(d)
    omega = product(rho, xi)
    probs = np.array([np.einsum("ab,ba->", e.matrix, omega).real for e in p.effects])
    pts = grid_points(d, g)
    table = _twin_table(p, g)
    vals = np.abs(table - probs).sum(axis=1)
    injected = np.array([bloch_coords(rho.matrix), bloch_coords(xi.matrix)])
    inj = np.abs(twin_probabilities(p.effects, d, injected) - probs).sum(axis=1)
    best = float(min(vals.min(), inj.min()))
    if g.refine and best > 0:
        obj = lambda h: np.abs(twin_probabilities(p.effects, d, h) - probs).sum(axis=1)
        best = min(best, float(_refine(obj, pts, vals, d, g)))
    return best


def grid_twin_extrema(e: Effect, g: GridSpec = GridSpec()) -> tuple:
    """``(min, max)`` of ``tr[E eta (x) eta]`` over the grid."""
    d = e.dim
    _check_dim(d)
    pts = grid_points(d, g)
    q = twin_probabilities([e], d, pts)[:, 0]
    lo, hi = float(q.min()), float(q.max())
    if g.refine:
        obj = lambda h: twin_probabilities([e], d, h)[:, 0]
        lo = min(lo, float(_refine(obj, pts, q, d, g, 1.0)))
        hi = max(hi, float(_refine(obj, pts, q, d, g, -1.0)))
    return (lo, hi)
