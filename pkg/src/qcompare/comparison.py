"""Comparison distance between a product state and the twin-identical set.

For a POVM ``{E_j}`` the distance of ``rho (x) xi`` from the set of
twin-identical states ``eta (x) eta`` is

    D = min_eta  sum_j | tr[E_j (rho (x) xi - eta (x) eta)] |

A strictly positive value certifies that ``rho`` and ``xi`` differ.  The
generic path minimizes over ``eta`` numerically; closed forms are provided
for the bundled comparators and are cross-checked against it in the tests.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .effects import Au2Params, DiagonalQubitEffect, Effect, Povm, diagonal_effect, product
from .errors import ConvergenceError, DimensionMismatchError, OutOfDomainError, QCompareError
from .states import (
    BlochVector,
    DensityMatrix,
    bloch_coords,
    build_basis,
    matrix_from_bloch_coords,
    overlap,
    sorted_eigh,
)

TAU = 1e-9
OBJECTIVE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DistanceResult:
    value: float
    minimizer: DensityMatrix
    method: str

    def to_json(self):
        return {
            "value": float(self.value),
            "method": self.method,
            "minimizer_bloch": [float(x) for x in bloch_coords(self.minimizer.matrix)],
        }


def _threshold(v: float) -> float:
    return 0.0 if v < TAU else float(v)


def _check_pair(p: Povm, rho: DensityMatrix, xi: DensityMatrix):
    if rho.dim != xi.dim:
        raise DimensionMismatchError(f"rho has d={rho.dim} but xi has d={xi.dim}")
    if p.dim != rho.dim:
        raise DimensionMismatchError(f"POVM acts on d={p.dim} but states have d={rho.dim}")


# --- twin-state parameterization ---------------------------------------------


class TwinParameterization:
    """Maps unconstrained points of R^(d^2-1) onto valid Bloch vectors.

    Points outside the radius ``sqrt(d-1)`` ball are pulled radially onto its
    surface.  For ``d > 2`` the ball contains non-states; those are repaired by
    clipping negative eigenvalues and renormalizing, which is continuous and
    leaves valid states untouched.
    """

    def __init__(self, d: int):
        self.d = d
        self.n = d * d - 1
        self.radius = math.sqrt(d - 1)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        nrm = math.sqrt(float(x @ x))
        if nrm > self.radius:
            x = x * (self.radius / nrm)
        if self.d == 2:
            return x
        m = matrix_from_bloch_coords(x, self.d)
        w, v = np.linalg.eigh(m)
        if w[0] >= 0:
            return x
        w = np.clip(w, 0.0, None)
        m = (v * (w / w.sum())) @ v.conj().T
        return bloch_coords(m)

    def state(self, x) -> DensityMatrix:
        h = self(x)
        m = matrix_from_bloch_coords(h, self.d)
        m = (m + m.conj().T) / 2
        return DensityMatrix(m / np.trace(m).real)

    @functools.cached_property
    def starts(self) -> np.ndarray:
        """Centre, cross-polytope vertices at 0.9 radius, 8 Halton points."""
        pts = [np.zeros(self.n)]
        for i in range(self.n):
            for s in (1.0, -1.0):
                e = np.zeros(self.n)
                e[i] = s * 0.9 * self.radius
                pts.append(e)
        halton = qmc.Halton(d=self.n, scramble=False).random(9)[1:]
        pts.extend((2 * halton - 1) * self.radius)
        return np.array(pts)


def _twin_values(forms: np.ndarray, h: np.ndarray) -> np.ndarray:
    ht = np.concatenate(([1.0], h))
    return forms @ ht @ ht


def _nelder_mead(f, x0, scale, maxiter):
    n = x0.size
    simplex = np.vstack([x0, x0 + scale * np.eye(n)])
    return minimize(
        f,
        x0,
        method="Nelder-Mead",
        options={"initial_simplex": simplex, "xatol": 1e-11, "fatol": 1e-13, "maxiter": maxiter, "maxfev": maxiter},
    )


def _multistart(f, param: TwinParameterization, extra_starts=(), floor=None):
    """Minimize ``f(param(x))`` from the deterministic start set.

    Returns ``(best_value, best_x, converged)``.  If ``floor`` is given and a
    start already evaluates below it the local searches are skipped.
    """
    starts = [np.asarray(s, dtype=float) for s in extra_starts] + list(param.starts)
    g = lambda x: f(param(x))
    vals = [g(s) for s in starts]
    i = int(np.argmin(vals))
    best_v, best_x = vals[i], starts[i]
    if floor is not None and best_v <= floor:
        return best_v, best_x, True
    maxiter = 400 * param.n
    converged = False
    for s in starts:
        res = _nelder_mead(g, s, 0.25 * param.radius, maxiter)
        converged |= bool(res.success)
        if res.fun < best_v:
            best_v, best_x = float(res.fun), res.x
        if floor is not None and best_v <= floor:
            return best_v, best_x, True
    for scale in (1e-2, 1e-4):
        res = _nelder_mead(g, np.asarray(best_x), scale * param.radius, maxiter)
        if res.fun < best_v:
            best_v, best_x = float(res.fun), res.x
    return best_v, best_x, converged


# --- generic distance --------------------------------------------------------


def distance(p: Povm, rho: DensityMatrix, xi: DensityMatrix) -> DistanceResult:
    """Numerical minimization of the comparison distance over twin states."""
    _check_pair(p, rho, xi)
    d = rho.dim
    probs = np.array([np.einsum("ab,ba->", e.matrix, product(rho, xi)).real for e in p.effects])
    forms = p.bloch_forms
    param = TwinParameterization(d)
    r, k = bloch_coords(rho.matrix), bloch_coords(xi.matrix)

    def objective(h):
        return float(np.abs(probs - _twin_values(forms, h)).sum())

    best, x, converged = _multistart(objective, param, extra_starts=(r, k, (r + k) / 2), floor=TAU * 1e-3)
    if not converged and best > TAU:
        raise ConvergenceError(f"optimizer did not converge (best bound {best:.3e})", best)
    return DistanceResult(_threshold(best), param.state(x), "optimized")


# --- twin range ---------------------------------------------------------------

_TWIN_CACHE: dict = {}


def optimize_twin_range(e: Effect):
    """Numerical ``(min, max, argmin_state, argmax_state)`` of ``tr[E eta(x)eta]``."""
    key = (e.dim, e.fingerprint)
    if key in _TWIN_CACHE:
        return _TWIN_CACHE[key]
    form = e.bloch_form
    param = TwinParameterization(e.dim)

    def q(h):
        ht = np.concatenate(([1.0], h))
        return float(ht @ form @ ht)

    lo, xlo, c1 = _multistart(q, param)
    neg_hi, xhi, c2 = _multistart(lambda h: -q(h), param)
    if not (c1 and c2):
        raise ConvergenceError("twin-range optimization did not converge", (lo, -neg_hi))
    out = (lo, -neg_hi, param.state(xlo), param.state(xhi))
    if len(_TWIN_CACHE) > 256:
        _TWIN_CACHE.clear()
    _TWIN_CACHE[key] = out
    return out


def twin_range(e: Effect, method: str = "auto") -> tuple:
    """Interval ``[min, max]`` of ``tr[E eta (x) eta]`` over states ``eta``.

    ``method="auto"`` uses the closed form recorded on bundled effects and
    falls back to the optimizer; ``"optimize"`` always optimizes.
    """
    if method == "auto" and e.twin_range is not None:
        return tuple(float(x) for x in e.twin_range)
    if method not in ("auto", "optimize"):
        raise ValueError(f"unknown method {method!r}")
    lo, hi, _, _ = optimize_twin_range(e)
    return (lo, hi)


def _twin_with_probability(e: Effect, target: float) -> DensityMatrix:
    """A state ``eta`` with ``tr[E eta (x) eta]`` as close to ``target`` as possible."""
    lo, hi, slo, shi = optimize_twin_range(e)
    a, b = slo.matrix, shi.matrix
    form = e.bloch_form

    def q(s):
        h = bloch_coords((1 - s) * a + s * b)
        ht = np.concatenate(([1.0], h))
        return float(ht @ form @ ht)

    if target <= lo:
        return slo
    if target >= hi:
        return shi
    s0, s1 = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (s0 + s1)
        if q(mid) < target:
            s0 = mid
        else:
            s1 = mid
    m = (1 - s1) * a + s1 * b
    return DensityMatrix((m + m.conj().T) / 2)


def distance_two_outcome(e: Effect, rho: DensityMatrix, xi: DensityMatrix) -> DistanceResult:
    """Distance for the POVM ``{E, I-E}``: twice the gap to the twin interval."""
    if rho.dim != xi.dim or e.dim != rho.dim:
        raise DimensionMismatchError("effect and states must share the dimension")
    p = float(np.einsum("ab,ba->", e.matrix, product(rho, xi)).real)
    lo, hi = twin_range(e)
    gap = max(lo - p, p - hi, 0.0)
    if np.allclose(rho.matrix, xi.matrix, atol=1e-14):
        eta = rho
    else:
        eta = _twin_with_probability(e, min(max(p, lo), hi))
    return DistanceResult(_threshold(2 * gap), eta, "closed-form")


def product_range(e: Effect, restarts: int = 8, seed: int = 0) -> tuple:
    """``[min, max]`` of ``tr[E rho (x) xi]`` over product states.

    Alternating eigenvalue minimization (each step is exact in one factor)
    from several starting states; returns the best values found.
    """
    d = e.dim
    e4 = e.matrix.reshape(d, d, d, d)
    rng = np.random.default_rng(seed)

    def extreme(sign):
        best = np.inf
        for _ in range(restarts):
            g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            xi = g @ g.conj().T
            xi /= np.trace(xi).real
            val = np.inf
            for _ in range(200):
                t = np.einsum("ijkl,lj->ik", e4, xi)
                w, v = np.linalg.eigh(sign * (t + t.conj().T) / 2)
                rho = np.outer(v[:, 0], v[:, 0].conj())
                t = np.einsum("ijkl,ki->jl", e4, rho)
                w, v = np.linalg.eigh(sign * (t + t.conj().T) / 2)
                xi = np.outer(v[:, 0], v[:, 0].conj())
                if abs(val - w[0]) < 1e-15:
                    break
                val = w[0]
            best = min(best, val)
        return sign * best

    return (extreme(1.0), extreme(-1.0))


# --- closed forms -------------------------------------------------------------


def swap_distance(rho: DensityMatrix, xi: DensityMatrix) -> float:
    """``max{0, 1/d - tr[rho xi]}``."""
    if rho.dim != xi.dim:
        raise DimensionMismatchError(f"rho has d={rho.dim} but xi has d={xi.dim}")
    return max(0.0, 1.0 / rho.dim - overlap(rho, xi))


def _qubit_pair(rho, xi):
    if rho.dim != 2 or xi.dim != 2:
        raise DimensionMismatchError("closed form is defined for qubits")
    return bloch_coords(rho.matrix), bloch_coords(xi.matrix)


def diagonal_distance(kappa, rho: DensityMatrix, xi: DensityMatrix) -> float:
    """Distance of the two-outcome diagonal measurement with coefficients ``kappa``.

    With ``kappa_1..3 >= 0`` this is ``2 max(0, -K.r)``, ``K = kappa * k``
    elementwise; other sign patterns go through :func:`distance_two_outcome`.
    """
    k = kappa if isinstance(kappa, DiagonalQubitEffect) else DiagonalQubitEffect(tuple(kappa))
    r, kv = _qubit_pair(rho, xi)
    km = np.array(k.kappa[1:])
    if np.all(km >= 0):
        if k.violations():
            diagonal_effect(k)  # raises with the failing line
        return 2.0 * max(0.0, -float(np.dot(km * kv, r)))
    return distance_two_outcome(diagonal_effect(k), rho, xi).value


def au2_distance(p: Au2Params, rho: DensityMatrix, xi: DensityMatrix) -> float:
    """``2 |mu (rho_11 - xi_11)|`` in the computational basis."""
    _qubit_pair(rho, xi)
    return 2.0 * abs(p.mu * (rho.matrix[0, 0].real - xi.matrix[0, 0].real))


def au3_distance(rho: DensityMatrix, xi: DensityMatrix) -> float:
    r, k = _qubit_pair(rho, xi)
    return float(au3_distance_z(r[2], k[2]))


def au3_distance_z(rz, kz):
    """Three-outcome distance as a function of the z components (vectorized)."""
    rz, kz = np.asarray(rz, dtype=float), np.asarray(kz, dtype=float)
    prod = rz * kz
    return 0.5 * (np.abs(rz - kz) + np.where(prod >= 0, 0.0, np.abs(prod)))


def nondiag_distance(xi: DensityMatrix, rho: DensityMatrix) -> float:
    """Distance for the comparator built from ``xi``'s own eigenbasis.

    ``2 rho_22 Xi_1 - 1/2`` when ``rho_22 > 1/(4 Xi_1)``, else 0, with
    ``rho_22 = <Xi_2|rho|Xi_2>``.
    """
    _qubit_pair(rho, xi)
    w, v = sorted_eigh(xi.matrix)
    big = float(w[0])
    rho22 = float(np.vdot(v[:, 1], rho.matrix @ v[:, 1]).real)
    return 2 * rho22 * big - 0.5 if rho22 > 1.0 / (4 * big) else 0.0


# --- comparable region geometry ----------------------------------------------


@dataclass(frozen=True)
class HalfspacePair:
    """States ``r`` comparable with a fixed ``xi``: ``r.K > upper`` or ``r.K < lower``.

    ``separation`` is the distance between the two bounding planes, ``inf``
    when ``K = 0`` (then the region is all-or-nothing, see ``degenerate``).
    """

    normal: np.ndarray
    upper: float
    lower: float
    separation: float
    degenerate: bool
    upper_feasible: bool
    lower_feasible: bool

    def comparable(self, r, tol: float = 1e-12) -> bool:
        x = float(np.dot(self.normal, np.asarray(r, dtype=float)))
        return x > self.upper + tol or x < self.lower - tol


def comparable_halfspaces(e: Effect, xi: DensityMatrix) -> HalfspacePair:
    d = xi.dim
    if e.dim != d:
        raise DimensionMismatchError("effect and state must share the dimension")
    basis = build_basis(d)
    kvec = np.array([np.einsum("ab,ba->", e.matrix, np.kron(lam, xi.matrix)).real for lam in basis.elements])
    c = float(np.einsum("ab,ba->", e.matrix, np.kron(np.eye(d), xi.matrix)).real)
    lo, hi = twin_range(e)
    upper, lower = d * hi - c, d * lo - c
    norm = float(np.linalg.norm(kvec))
    reach = math.sqrt(d - 1) * norm
    if norm < 1e-12:
        return HalfspacePair(kvec, upper, lower, math.inf, True, 0.0 > upper, 0.0 < lower)
    return HalfspacePair(kvec, upper, lower, d * (hi - lo) / norm, False, reach > upper, -reach < lower)


# --- epsilon construction ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class EpsilonPair:
    rho: DensityMatrix
    xi: DensityMatrix
    max_deviation: float


def epsilon_construction(eta: DensityMatrix, epsilon: float, povm: Povm | None = None) -> EpsilonPair:
    """Product state ``rho (x) xi`` within ``epsilon`` of ``eta (x) eta``.

    ``rho = eta`` and ``xi = (1 - eps/2) eta + eps/(2d) I``.  The returned
    deviation is the largest ``|tr[E (eta(x)eta - rho(x)xi)]|`` over the
    effects of ``povm`` or, when no POVM is given, over all effects.
    """
    if not 0 < epsilon <= 1:
        raise OutOfDomainError(f"epsilon must lie in (0, 1], got {epsilon}")
    d = eta.dim
    m = (1 - epsilon / 2) * eta.matrix + epsilon / (2 * d) * np.eye(d)
    xi = DensityMatrix((m + m.conj().T) / 2)
    x = np.kron(eta.matrix, eta.matrix) - np.kron(eta.matrix, xi.matrix)
    if povm is None:
        w = np.linalg.eigvalsh(x)
        dev = max(w[w > 0].sum(), -w[w < 0].sum(), 0.0)
    else:
        dev = max(abs(np.einsum("ab,ba->", e.matrix, x).real) for e in povm.effects)
    return EpsilonPair(eta, xi, float(dev))


def trace_distance_bound(p: float) -> float:
    """Upper bound ``2 sqrt(2 p)`` on ``tr|rho - xi|`` given ``p = p_asym``."""
    if not -1e-15 <= p <= 0.5 + 1e-15:
        raise OutOfDomainError(f"p must lie in [0, 1/2], got {p}")
    return 2.0 * math.sqrt(2.0 * max(p, 0.0))
