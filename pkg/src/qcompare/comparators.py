"""Named comparators with vectorized distance evaluation on Bloch arrays.

Every comparator wraps a :class:`~qcompare.effects.Povm` and evaluates the
comparison distance for stacks of Bloch vectors ``r, k`` of shape
``(n, d^2 - 1)``.  Two-outcome comparators use ``2 dist(p, twin range)`` with
``p = r~ . M . k~``; the three-outcome qubit comparator has its own closed
form; anything else falls back to the per-pair optimizer.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from . import comparison, effects
from .effects import Au2Params, Povm, swap_operator
from .errors import InvalidDimensionError, QCompareError
from .states import BlochVector, DensityMatrix, build_basis, from_bloch, matrix_from_bloch_coords

COMPARATOR_IDS = ("swap", "xy", "z", "diag", "nondiag", "etalon", "au2", "au2d", "au3", "aucg")

QUBIT_ONLY = {"xy", "z", "diag", "nondiag", "etalon", "au2", "au3"}

# effect whose probability is histogrammed / reported for two-outcome comparators
_FOCUS = {"swap": 1, "xy": 1, "z": 1}


@dataclass(frozen=True, eq=False)
class Comparator:
    id: str
    povm: Povm
    params: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.povm.dim

    @property
    def two_outcome(self) -> bool:
        return len(self.povm) == 2

    @property
    def method(self) -> str:
        if self.two_outcome or self._au3_like:
            return "closed-form"
        return "optimized"

    @functools.cached_property
    def _au3_like(self) -> bool:
        if self.dim != 2 or len(self.povm) != 3:
            return False
        ref = effects.au3_qubit()
        return all(np.allclose(a.matrix, b.matrix, atol=1e-14) for a, b in zip(self.povm.effects, ref.effects))

    @functools.cached_property
    def exchange_symmetric(self) -> bool:
        s = swap_operator(self.dim)
        return all(np.allclose(s @ e.matrix @ s, e.matrix, atol=1e-12) for e in self.povm.effects)

    @property
    def focus_index(self) -> int:
        return _FOCUS.get(self.id, 0)

    @property
    def focus_effect(self):
        return self.povm.effects[self.focus_index]

    @functools.cached_property
    def twin_interval(self) -> tuple:
        """Twin range of the focus effect."""
        return comparison.twin_range(self.focus_effect)

    def probabilities(self, r: np.ndarray, k: np.ndarray, index: int | None = None) -> np.ndarray:
        """``tr[E rho (x) xi]`` for rows of ``r`` and ``k``."""
        e = self.povm.effects[self.focus_index if index is None else index]
        return _bilinear(e.bloch_form, r, k)

    def batch_distance(self, r, k) -> np.ndarray:
        """Distances for rows of ``r`` and ``k``; values below ``TAU`` are 0."""
        r = np.atleast_2d(np.asarray(r, dtype=float))
        k = np.atleast_2d(np.asarray(k, dtype=float))
        if self.two_outcome:
            lo, hi = comparison.twin_range(self.povm.effects[0])
            p = _bilinear(self.povm.effects[0].bloch_form, r, k)
            out = 2.0 * np.maximum(np.maximum(lo - p, p - hi), 0.0)
        elif self._au3_like:
            out = comparison.au3_distance_z(r[:, 2], k[:, 2])
        else:
            out = np.array([self._optimized(a, b) for a, b in zip(r, k)])
        return np.where(out < comparison.TAU, 0.0, out)

    def _optimized(self, r, k) -> float:
        rho = DensityMatrix(matrix_from_bloch_coords(r, self.dim))
        xi = DensityMatrix(matrix_from_bloch_coords(k, self.dim))
        return comparison.distance(self.povm, rho, xi).value

    def pair_distance(self, rho: DensityMatrix, xi: DensityMatrix) -> comparison.DistanceResult:
        """Single-pair distance through the same route as the batch path."""
        if self.two_outcome:
            return comparison.distance_two_outcome(self.povm.effects[0], rho, xi)
        if self._au3_like:
            v = comparison.au3_distance(rho, xi)
            res = comparison.distance(self.povm, rho, xi)
            return comparison.DistanceResult(comparison._threshold(v), res.minimizer, "closed-form")
        return comparison.distance(self.povm, rho, xi)

    def describe(self) -> dict:
        return {"id": self.id, "dim": self.dim, "labels": list(self.povm.labels), "params": dict(self.params)}


def _bilinear(form: np.ndarray, r: np.ndarray, k: np.ndarray) -> np.ndarray:
    r = np.atleast_2d(r)
    k = np.atleast_2d(k)
    # r~ M k~ with r~ = (1, r): split off the constant row and column
    return (form[0, 0] + k @ form[0, 1:] + r @ form[1:, 0]
            + np.einsum("ni,ij,nj->n", r, form[1:, 1:], k))


def _state_from_bloch(coords, d=2) -> DensityMatrix:
    return from_bloch(BlochVector(d, coords))


def default_au2d_index(d: int) -> int:
    """Index of the last diagonal generator (``sigma_z`` for qubits)."""
    return len(build_basis(d)) - 1


def get_comparator(
    cid: str,
    d: int = 2,
    kappa=None,
    ref_bloch=None,
    lam: float = 0.5,
    mu: float = 0.5,
    j: int | None = None,
) -> Comparator:
    """Build a named comparator.

    ``ref_bloch`` is the fixed reference state of ``nondiag`` and ``etalon``
    (default ``|0>``, Bloch vector ``(0, 0, 1)``).
    """
    cid = cid.lower()
    if cid not in COMPARATOR_IDS:
        raise QCompareError(f"unknown comparator {cid!r}; choose from {', '.join(COMPARATOR_IDS)}")
    if cid in QUBIT_ONLY and d != 2:
        raise InvalidDimensionError(f"comparator {cid!r} is defined for d = 2 only, got d = {d}")
    if cid == "swap":
        return Comparator(cid, effects.swap_povm(d), {"d": d})
    if cid == "xy":
        return Comparator(cid, effects.xy_povm())
    if cid == "z":
        return Comparator(cid, effects.z_povm())
    if cid == "diag":
        if kappa is None:
            raise QCompareError("the diag comparator needs --kappa k0,k1,k2,k3")
        kappa = tuple(float(x) for x in kappa)
        return Comparator(cid, effects.diagonal_povm(kappa), {"kappa": list(kappa)})
    if cid in ("nondiag", "etalon"):
        ref = (0.0, 0.0, 1.0) if ref_bloch is None else tuple(float(x) for x in ref_bloch)
        xi = _state_from_bloch(ref)
        p = effects.nondiag_povm(xi) if cid == "nondiag" else effects.etalon_povm(xi)
        return Comparator(cid, p, {"ref_bloch": list(ref)})
    if cid == "au2":
        return Comparator(cid, effects.au2_qubit(Au2Params(lam, mu)), {"lambda": lam, "mu": mu})
    if cid == "au2d":
        j = default_au2d_index(d) if j is None else int(j)
        p = effects.au2_general(d, j)
        return Comparator(cid, p, dict(p.params))
    if cid == "au3":
        return Comparator(cid, effects.au3_qubit())
    return Comparator(cid, effects.aucg_povm(d), {"d": d})


def from_povm(p: Povm, cid: str = "custom") -> Comparator:
    return Comparator(cid, p, dict(p.params))
