"""Closed-form and quadrature densities of single-effect probabilities.

For an effect ``E`` the ``diff`` density is the distribution of
``p = tr[E rho (x) xi]`` over independent random ``rho, xi`` and the ``same``
density the distribution of ``tr[E eta (x) eta]``.  Curves are available for
four qubit effects:

``asym``  ``(I - S)/2``, variable ``x = 4p - 1``
``xy-``   diagonal effect ``(1/2, -1/4, -1/4, 0)``, variable ``x = 4p - 2``
``z-``    diagonal effect ``(1/2, 0, 0, -1/2)``, variable ``x = 2p - 1``
``au2``   ``diag(1/2, 1, 0, 1/2)``, variable ``x = 2p - 1``

Bures ``diff`` curves are one- or two-dimensional integrals evaluated with
adaptive quadrature.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import ConvergenceError, OutOfDomainError, QCompareError
from .sampling import MeasureKind

DOMAIN_TOL = 1e-12
EFFECT_IDS = ("asym", "xy-", "z-", "au2")

# comparator id and effect index each curve describes
EFFECT_SOURCES = {"asym": ("swap", 1), "xy-": ("xy", 1), "z-": ("z", 1), "au2": ("au2", 0)}


def quadrature(f, a: float, b: float, tol: float = 1e-10, singular: str | None = None, points=None) -> float:
    """Adaptive integral of ``f`` over ``[a, b]``.

    ``singular`` marks an inverse-square-root endpoint singularity at
    ``"left"``, ``"right"`` or ``"both"`` ends; it is removed with
    ``x = a + (b - a) u^2`` (mirrored for the right end) before integrating.
    ``points`` are interior break points passed to the adaptive rule.
    Raises :class:`ConvergenceError` when the error estimate exceeds ``tol``.
    """
    if tol < 1e-12:
        raise QCompareError(f"tol must be >= 1e-12, got {tol}")
    if b < a:
        return -quadrature(f, b, a, tol, singular, points)
    if b == a:
        return 0.0
    if singular == "both":
        mid = 0.5 * (a + b)
        return quadrature(f, a, mid, tol / 2, "left") + quadrature(f, mid, b, tol / 2, "right")
    w = b - a
    if singular == "left":
        g, lo, hi = (lambda u: f(a + w * u * u) * 2 * w * u), 0.0, 1.0
        pts = None if points is None else [math.sqrt((p - a) / w) for p in points]
    elif singular == "right":
        g, lo, hi = (lambda u: f(b - w * u * u) * 2 * w * u), 0.0, 1.0
        pts = None if points is None else [math.sqrt((b - p) / w) for p in points]
    elif singular is None:
        g, lo, hi, pts = f, a, b, points
    else:
        raise ValueError(f"singular must be None, 'left', 'right' or 'both', got {singular!r}")
    val, err, *rest = integrate.quad(g, lo, hi, epsabs=tol, epsrel=1e-12, limit=500, points=pts, full_output=1)
    if err > tol:
        raise ConvergenceError(f"quadrature error estimate {err:.2e} exceeds {tol:.0e}", val)
    return float(val)


# --- integral kernels ---------------------------------------------------------


def g_kernel(c: float, tol: float = 1e-11) -> float:
    """``g(c) = int_c^1 sqrt((r^2 - c^2) / (1 - r^2)) dr`` for ``0 <= c <= 1``.

    Evaluated as ``int_{arcsin c}^{pi/2} sqrt(sin^2 t - c^2) dt`` (``r = sin t``).
    """
    c = abs(c)
    if c >= 1:
        return 0.0
    return quadrature(lambda t: math.sqrt(max(math.sin(t) ** 2 - c * c, 0.0)), math.asin(c), math.pi / 2, tol)


def _xy_bures_inner_outer(x: float, tol: float = 1e-9) -> float:
    c = abs(x)
    if c >= 1:
        return 0.0
    # theta in [arcsin c, pi - arcsin c] is symmetric about pi/2
    return 2 * quadrature(lambda th: g_kernel(c / math.sin(th), tol * 1e-2), math.asin(c), math.pi / 2, tol)


def _z_bures(x: float, tol: float = 1e-10) -> float:
    c = abs(x)
    if c == 0:
        return math.inf
    f = lambda z: math.sqrt(max((z * z - c * c) * (1 - z * z), 0.0)) / (z * z)
    return quadrature(f, c, 1.0, tol)


def _au2_bures(x: float, tol: float = 1e-11) -> float:
    c = abs(x)
    top = 1 - 2 * c
    f = lambda z: math.sqrt(max((1 - z * z) * (1 - (z + 2 * c) ** 2), 0.0))
    return quadrature(f, -1.0, top, tol)


# --- curve table ----------------------------------------------------------------


def _asym_hs_diff(p):
    x = 4 * p - 1
    if x == 0:
        return 4.5
    return 4.5 * (1 + x * x * (2 * math.log(abs(x)) - 1))


def _xy_hs_diff(p):
    c = abs(4 * p - 2)
    return 4.5 * ((1 + 2 * c * c) * math.acos(min(c, 1.0)) - 3 * c * math.sqrt(max(1 - c * c, 0.0)))


def _z_hs_diff(p):
    x = 2 * p - 1
    if x == 0:
        return math.inf
    return 2.25 * ((1 + x * x) * (1 - math.log(abs(x))) - 2)


def _au2_hs_diff(p):
    c = abs(2 * p - 1)
    return 2.4 * (1 - c) ** 3 * (c * c + 3 * c + 1)


_CURVES = {
    # (effect, kind, measure): (function of p, domain, twin range, singular points)
    ("asym", "diff", "hs"): (_asym_hs_diff, (0.0, 0.5), (0.0, 0.25), ()),
    ("asym", "diff", "bures"): (lambda p: 32 / math.pi**2 * g_kernel(4 * p - 1), (0.0, 0.5), (0.0, 0.25), ()),
    ("asym", "same", "hs"): (lambda p: 6 * math.sqrt(max(1 - 4 * p, 0.0)), (0.0, 0.25), (0.0, 0.25), ()),
    ("asym", "same", "bures"): (
        lambda p: math.inf if p == 0 else 4 * math.sqrt(max(1 - 4 * p, 0.0)) / (math.pi * math.sqrt(p)),
        (0.0, 0.25), (0.0, 0.25), (0.0,),
    ),
    ("xy-", "diff", "hs"): (_xy_hs_diff, (0.25, 0.75), (0.25, 0.5), ()),
    ("xy-", "diff", "bures"): (lambda p: 16 / math.pi**2 * _xy_bures_inner_outer(4 * p - 2), (0.25, 0.75), (0.25, 0.5), ()),
    ("xy-", "same", "hs"): (lambda p: 12 * math.sqrt(max(p - 0.25, 0.0)), (0.25, 0.5), (0.25, 0.5), ()),
    ("xy-", "same", "bures"): (lambda p: 4.0, (0.25, 0.5), (0.25, 0.5), ()),
    ("z-", "diff", "hs"): (_z_hs_diff, (0.0, 1.0), (0.0, 0.5), (0.5,)),
    ("z-", "diff", "bures"): (lambda p: 16 / math.pi**2 * _z_bures(2 * p - 1), (0.0, 1.0), (0.0, 0.5), (0.5,)),
    ("z-", "same", "hs"): (lambda p: math.inf if p == 0.5 else 3 * p / math.sqrt(1 - 2 * p), (0.0, 0.5), (0.0, 0.5), (0.5,)),
    ("z-", "same", "bures"): (
        lambda p: math.inf if p == 0.5 else 4 * math.sqrt(2 * p) / (math.pi * math.sqrt(1 - 2 * p)),
        (0.0, 0.5), (0.0, 0.5), (0.5,),
    ),
    ("au2", "diff", "hs"): (_au2_hs_diff, (0.0, 1.0), (0.5, 0.5), ()),
    ("au2", "diff", "bures"): (lambda p: 16 / math.pi**2 * _au2_bures(2 * p - 1), (0.0, 1.0), (0.5, 0.5), ()),
}

_SQRT_SINGULAR = {("asym", "same", "bures"): "left", ("z-", "same", "hs"): "right", ("z-", "same", "bures"): "right"}


@dataclass(frozen=True)
class AnalyticDensity:
    """Density of ``p`` for one effect, kind and measure.

    ``point_mass`` is set for degenerate ``same`` curves (a delta at that
    probability); ``singular_points`` lists where the density is unbounded.
    """

    effect: str
    kind: str
    measure: str
    domain: tuple
    twin_range: tuple
    singular_points: tuple = ()
    point_mass: float | None = None

    def __call__(self, p):
        if np.ndim(p):
            return np.array([evaluate(self, float(q)) for q in np.ravel(p)]).reshape(np.shape(p))
        return evaluate(self, float(p))

    @property
    def frontier(self) -> float:
        """Twin-range endpoint separating comparable from blind probabilities."""
        lo, hi = self.twin_range
        a, b = self.domain
        inner = [x for x in (lo, hi) if a < x < b]
        return inner[0] if inner else lo


def density(effect: str, kind: str, measure) -> AnalyticDensity:
    m = MeasureKind.parse(measure).value
    if effect not in EFFECT_IDS:
        raise QCompareError(f"no analytic density for effect {effect!r}; choose from {', '.join(EFFECT_IDS)}")
    if kind not in ("diff", "same"):
        raise QCompareError(f"kind must be 'diff' or 'same', got {kind!r}")
    if effect == "au2" and kind == "same":
        return AnalyticDensity(effect, kind, m, (0.5, 0.5), (0.5, 0.5), (), 0.5)
    _, dom, twin, sing = _CURVES[(effect, kind, m)]
    return AnalyticDensity(effect, kind, m, dom, twin, sing)


def all_densities():
    return [density(e, k, m) for e in EFFECT_IDS for k in ("diff", "same") for m in ("hs", "bures")]


def evaluate(a: AnalyticDensity, p: float) -> float:
    """Density value at ``p``; raises :class:`OutOfDomainError` outside the domain."""
    lo, hi = a.domain
    if not lo - DOMAIN_TOL <= p <= hi + DOMAIN_TOL:
        raise OutOfDomainError(f"p = {p} outside the domain [{lo}, {hi}] of {a.effect}/{a.kind}/{a.measure}")
    if a.point_mass is not None:
        return math.inf if p == a.point_mass else 0.0
    p = min(max(p, lo), hi)
    return float(_CURVES[(a.effect, a.kind, a.measure)][0](p))


def _integrate(a: AnalyticDensity, weight, tol: float) -> float:
    f = lambda p: weight(p) * evaluate(a, p)
    lo, hi = a.domain
    key = (a.effect, a.kind, a.measure)
    if key in _SQRT_SINGULAR:
        return quadrature(f, lo, hi, tol, _SQRT_SINGULAR[key])
    if a.singular_points:
        # interior logarithmic singularity: split there
        s = a.singular_points[0]
        return quadrature(f, lo, s, tol / 2) + quadrature(f, s, hi, tol / 2)
    if key == ("xy-", "diff", "bures"):
        # the curve is even about 1/2 and smooth elsewhere
        mid = 0.5 * (lo + hi)
        return quadrature(f, lo, mid, tol / 2) + quadrature(f, mid, hi, tol / 2)
    return quadrature(f, lo, hi, tol)


@functools.lru_cache(maxsize=None)
def normalization(a: AnalyticDensity, tol: float = 1e-8) -> float:
    """Integral of the density over its domain (1 for point masses)."""
    if a.point_mass is not None:
        return 1.0
    return _integrate(a, lambda p: 1.0, tol)


@functools.lru_cache(maxsize=None)
def mean_distance(a: AnalyticDensity, tol: float = 1e-8) -> float:
    """``2 * integral of dist(p, twin range) N(p) dp`` for a ``diff`` curve."""
    if a.kind != "diff":
        raise QCompareError("mean distance needs a 'diff' curve")
    lo, hi = a.twin_range
    return 2 * _integrate(a, lambda p: max(lo - p, p - hi, 0.0), tol)


def csv_rows(a: AnalyticDensity, points: int = 201):
    """``(p, value)`` rows on a uniform grid over the domain.

    Unbounded points are written as ``inf``.
    """
    if a.point_mass is not None:
        return [(a.point_mass, math.inf)]
    return [(float(p), evaluate(a, float(p))) for p in np.linspace(*a.domain, points)]
