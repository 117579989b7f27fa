"""Random density matrices under the Hilbert-Schmidt and Bures measures.

Qubit samplers work directly on Bloch vectors: the direction is isotropic and
the radius follows ``3 r^2`` (Hilbert-Schmidt) or
``(4/pi) r^2 / sqrt(1 - r^2)`` (Bures).  Qudit samplers use the Ginibre
construction ``G G^dag`` and its Bures variant ``(I + U) G G^dag (I + U)^dag``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimensionError, OutOfDomainError
from .states import DensityMatrix, matrix_from_bloch_coords


class MeasureKind(str, enum.Enum):
    HS = "hs"
    BURES = "bures"

    @classmethod
    def parse(cls, value) -> "MeasureKind":
        if isinstance(value, cls):
            return value
        v = str(value).lower()
        if v in ("b", "bures"):
            return cls.BURES
        if v in ("hs", "hilbert-schmidt"):
            return cls.HS
        raise ValueError(f"unknown measure {value!r}; expected 'hs' or 'bures'")


@dataclass(frozen=True)
class SeededStream:
    """Counter-based random stream: ``index`` selects a child of ``seed``."""

    seed: int
    index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.index),))
        return np.random.Generator(np.random.PCG64(ss))


def bures_radial_cdf(r):
    """``F(r) = (2/pi) (arcsin r - r sqrt(1 - r^2))``."""
    r = np.asarray(r, dtype=float)
    return (2 / np.pi) * (np.arcsin(r) - r * np.sqrt(np.clip(1 - r * r, 0, None)))


_SERIES = [(-1) ** k / math.factorial(2 * k + 3) for k in range(9)]


def _x_minus_sin(x):
    """``x - sin x`` without cancellation for small ``x``."""
    x = np.asarray(x, dtype=float)
    out = x - np.sin(x)
    small = x < 1.0
    if np.any(small):
        xs = x[small]
        x2 = xs * xs
        series = np.zeros_like(xs)
        for c in reversed(_SERIES):
            series = series * x2 + c
        out[small] = xs * x2 * series
    return out


def inverse_bures_radial(u):
    """Radius ``r`` with ``F(r) = u``; vectorized safeguarded Newton iteration.

    Works in ``t = arcsin r`` where ``F = (2t - sin 2t) / pi`` is monotone on
    ``[0, pi/2]``.
    """
    scalar = np.ndim(u) == 0
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any((u < 0) | (u > 1)):
        raise OutOfDomainError("u must lie in [0, 1]")
    target = np.pi * u
    lo = np.zeros_like(u)
    hi = np.full_like(u, np.pi / 2)
    # start from the small-t cubic 2t - sin 2t ~ (2t)^3 / 6, or near t = pi/2
    # from the linear behaviour pi - 4 (pi/2 - t)
    t = np.where(u < 0.5, np.cbrt(6 * target) / 2, np.pi / 2 - np.pi * (1 - u) / 4)
    t = np.clip(t, 0.0, np.pi / 2)
    for _ in range(100):
        f = _x_minus_sin(2 * t) - target
        lo = np.where(f < 0, t, lo)
        hi = np.where(f > 0, t, hi)
        fp = 4 * np.sin(t) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            tn = t - f / fp
        # bisect when Newton leaves the bracket (beyond rounding) or f' = 0
        bad = ~((tn >= lo - 1e-15) & (tn <= hi + 1e-15))
        tn = np.clip(np.where(bad, 0.5 * (lo + hi), tn), lo, hi)
        done = np.all((np.abs(tn - t) <= 1e-15 * np.maximum(t, 1e-300)) | (np.abs(f) <= 1e-16 * target))
        t = tn
        if done:
            break
    r = np.sin(t)
    r = np.where(u == 0, 0.0, np.where(u == 1, 1.0, r))
    return float(r[0]) if scalar else r


def _directions(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1)[:, None]


def sample_qubit_bloch(m, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` Bloch vectors, shape ``(n, 3)``."""
    m = MeasureKind.parse(m)
    v = _directions(rng, n)
    u = rng.random(n)
    r = np.cbrt(u) if m is MeasureKind.HS else inverse_bures_radial(u)
    return v * r[:, None]


def sample_qubit(m, s: SeededStream) -> DensityMatrix:
    r = sample_qubit_bloch(m, s.generator(), 1)[0]
    return DensityMatrix(matrix_from_bloch_coords(r, 2))


def haar_unitaries(d: int, rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-random unitaries via QR of complex Ginibre matrices with phase fixing."""
    z = (rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=1, axis2=2)
    ph = diag / np.abs(diag)
    return q * ph[:, None, :]


def sample_qudit_matrices(m, d: int, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` density matrices of dimension ``d``, shape ``(n, d, d)``."""
    if d < 2:
        raise InvalidDimensionError(f"dimension must be >= 2, got {d}")
    m = MeasureKind.parse(m)
    g = rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))
    if m is MeasureKind.BURES:
        u = haar_unitaries(d, rng, n)
        g = (np.eye(d) + u) @ g
    w = g @ np.conj(np.swapaxes(g, 1, 2))
    w = 0.5 * (w + np.conj(np.swapaxes(w, 1, 2)))
    return w / np.trace(w, axis1=1, axis2=2).real[:, None, None]


def sample_qudit(m, d: int, s: SeededStream) -> DensityMatrix:
    return DensityMatrix(sample_qudit_matrices(m, d, s.generator(), 1)[0])
