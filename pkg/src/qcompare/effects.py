"""Effects and POVMs on the two-copy space, plus the named comparators.

Operators on ``H (x) H`` are stored as ``d^2 x d^2`` complex matrices in the
product basis ``|jk> = |j> (x) |k>`` (row index ``j*d + k``).  For qubits this
is the ``|00>, |01>, |10>, |11>`` ordering with ``|0>`` the +1 eigenvector of
``sigma_z``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidDimensionError,
    InvalidEffectError,
    InvalidPovmError,
    NotAStateError,
    QCompareError,
)
from .states import (
    DensityMatrix,
    _frozen,
    build_basis,
    matrix_from_json,
    matrix_to_json,
    purity,
    sorted_eigh,
)

EFFECT_HERMITIAN_TOL = 1e-12
EFFECT_SPECTRUM_TOL = 1e-10
POVM_SUM_TOL = 1e-10
PROB_CLAMP_TOL = 1e-12

PAULI = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


@dataclass(frozen=True, eq=False)
class Effect:
    """A validated operator ``O <= E <= I`` acting on ``H (x) H``.

    ``dim`` is the single-system dimension ``d``.  ``twin_range`` optionally
    records the known closed-form interval of ``tr[E eta (x) eta]``.
    """

    dim: int
    matrix: np.ndarray
    label: str = ""
    twin_range: Optional[tuple] = None

    @functools.cached_property
    def bloch_form(self) -> np.ndarray:
        """Real matrix ``M`` with ``tr[E rho (x) xi] = r~ . M . k~``.

        ``r~ = (1, r)`` is the Bloch vector with a leading 1.
        """
        d = self.dim
        ext = build_basis(d).extended
        e4 = self.matrix.reshape(d, d, d, d)
        return _frozen(np.einsum("ijkl,aki,blj->ab", e4, ext, ext).real / d**2)

    @functools.cached_property
    def fingerprint(self) -> bytes:
        return np.ascontiguousarray(np.round(self.matrix, 14)).tobytes()

    def complement(self, label: str = "", twin_range=None) -> "Effect":
        m = np.eye(self.matrix.shape[0]) - self.matrix
        return Effect(self.dim, _frozen(m), label, twin_range)


@dataclass(frozen=True, eq=False)
class Povm:
    effects: tuple
    labels: tuple
    name: str = "custom"
    params: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.effects[0].dim

    def __len__(self):
        return len(self.effects)

    def __iter__(self):
        return iter(self.effects)

    @functools.cached_property
    def bloch_forms(self) -> np.ndarray:
        return _frozen(np.array([e.bloch_form for e in self.effects]))

    @functools.cached_property
    def fingerprint(self) -> bytes:
        return b"|".join(e.fingerprint for e in self.effects)

    def to_json(self):
        return {
            "dim": self.dim,
            "labels": list(self.labels),
            "effects": [matrix_to_json(e.matrix) for e in self.effects],
        }

    @classmethod
    def from_json(cls, obj) -> "Povm":
        d = int(obj["dim"])
        mats = [matrix_from_json(m) for m in obj["effects"]]
        labels = obj.get("labels") or [str(i) for i in range(len(mats))]
        return validate_povm([validate_effect(m, d) for m in mats], labels=labels)


def validate_effect(m, d: int, label: str = "", twin_range=None) -> Effect:
    """Check ``O <= m <= I`` on the ``d^2``-dimensional two-copy space."""
    m = np.asarray(m, dtype=complex)
    if d < 2:
        raise InvalidDimensionError(f"dimension must be >= 2, got {d}")
    if m.shape != (d * d, d * d):
        raise DimensionMismatchError(f"effect for d={d} must be {d*d}x{d*d}, got {m.shape}")
    herm = float(np.max(np.abs(m - m.conj().T)))
    if herm > EFFECT_HERMITIAN_TOL:
        raise InvalidEffectError(f"effect is not Hermitian (max deviation {herm:.3e})", herm)
    w = np.linalg.eigvalsh(m)
    if w[0] < -EFFECT_SPECTRUM_TOL:
        raise InvalidEffectError(f"eigenvalue {w[0]:.6g} below 0", float(-w[0]))
    if w[-1] > 1 + EFFECT_SPECTRUM_TOL:
        raise InvalidEffectError(f"eigenvalue {w[-1]:.6g} above 1", float(w[-1] - 1))
    return Effect(d, _frozen(m), label, twin_range)


def validate_povm(effects: Sequence, labels=None, name: str = "custom", params=None) -> Povm:
    effects = list(effects)
    if len(effects) < 2:
        raise InvalidPovmError(f"a POVM needs at least 2 effects, got {len(effects)}")
    d = effects[0].dim
    if any(e.dim != d for e in effects):
        raise DimensionMismatchError("effects act on different dimensions")
    total = sum(e.matrix for e in effects)
    dev = float(np.max(np.abs(total - np.eye(d * d))))
    if dev > POVM_SUM_TOL:
        raise InvalidPovmError(f"effects do not sum to identity (max deviation {dev:.3e})", dev)
    if labels is None:
        labels = [e.label or str(i) for i, e in enumerate(effects)]
    if len(labels) != len(effects):
        raise InvalidPovmError("number of labels does not match number of effects")
    return Povm(tuple(effects), tuple(str(x) for x in labels), name, dict(params or {}))


def two_outcome(e: Effect, labels=None, name="custom", params=None, complement_range=None) -> Povm:
    return validate_povm(
        [e, e.complement(twin_range=complement_range)],
        labels=labels or [e.label or "E", "not-" + (e.label or "E")],
        name=name,
        params=params,
    )


# --- operators -------------------------------------------------------------


def swap_operator(d: int) -> np.ndarray:
    s = np.zeros((d * d, d * d))
    for j in range(d):
        for k in range(d):
            s[k * d + j, j * d + k] = 1.0
    return s


def product(rho, xi) -> np.ndarray:
    a = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    b = xi.matrix if isinstance(xi, DensityMatrix) else np.asarray(xi)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return np.kron(a, b)


# --- diagonal qubit family ---------------------------------------------------

_DIAG_SIGNS = np.array(
    [
        [1, -1, -1, -1],
        [1, -1, 1, 1],
        [1, 1, -1, 1],
        [1, 1, 1, -1],
    ],
    dtype=float,
)


@dataclass(frozen=True)
class DiagonalQubitEffect:
    """Coefficients ``(k0, k1, k2, k3)`` of ``sum_m k_m sigma_m (x) sigma_m``."""

    kappa: tuple

    def __post_init__(self):
        k = tuple(float(x) for x in self.kappa)
        if len(k) != 4:
            raise ValueError("kappa needs four components (k0, k1, k2, k3)")
        object.__setattr__(self, "kappa", k)

    @property
    def spectrum(self) -> np.ndarray:
        """Eigenvalues of the effect, one per polytope inequality."""
        return _DIAG_SIGNS @ np.array(self.kappa)

    def violations(self, tol: float = EFFECT_SPECTRUM_TOL):
        """Indices (1-based) of the inequalities ``0 <= . <= 1`` that fail."""
        s = self.spectrum
        return [i + 1 for i, v in enumerate(s) if v < -tol or v > 1 + tol]

    @property
    def twin_range(self) -> tuple:
        k0, *km = self.kappa
        return (k0 + min(0.0, *km), k0 + max(0.0, *km))

    @property
    def diff_range(self) -> tuple:
        k0, *km = self.kappa
        kmax = max(abs(x) for x in km)
        return (k0 - kmax, k0 + kmax)


def polytope_membership(kappa123, kappa0: float, tol: float = 0.0) -> bool:
    """True iff ``(kappa0, kappa123)`` satisfies the four positivity lines."""
    k = np.concatenate([[kappa0], np.asarray(kappa123, dtype=float)])
    s = _DIAG_SIGNS @ k
    return bool(np.all(s >= -tol) and np.all(s <= 1 + tol))


def polytope_membership_batch(kappa123: np.ndarray, kappa0: float) -> np.ndarray:
    k = np.asarray(kappa123, dtype=float)
    s = kappa0 + k @ _DIAG_SIGNS[:, 1:].T
    return np.all((s >= 0) & (s <= 1), axis=-1)


def diagonal_effect(kappa, label: str = "diag") -> Effect:
    if not isinstance(kappa, DiagonalQubitEffect):
        kappa = DiagonalQubitEffect(tuple(kappa))
    bad = kappa.violations()
    if bad:
        s = kappa.spectrum
        detail = ", ".join(f"line {i}: {s[i-1]:.6g} not in [0, 1]" for i in bad)
        raise InvalidEffectError(f"kappa={kappa.kappa} violates positivity ({detail})")
    k0, k1, k2, k3 = kappa.kappa
    m = np.array(
        [
            [k0 + k3, 0, 0, k1 - k2],
            [0, k0 - k3, k1 + k2, 0],
            [0, k1 + k2, k0 - k3, 0],
            [k1 - k2, 0, 0, k0 + k3],
        ],
        dtype=complex,
    )
    return Effect(2, _frozen(m), label, kappa.twin_range)


def diagonal_povm(kappa, name="diag") -> Povm:
    k = DiagonalQubitEffect(tuple(kappa))
    e = diagonal_effect(k, label="E")
    comp = DiagonalQubitEffect((1 - k.kappa[0], -k.kappa[1], -k.kappa[2], -k.kappa[3]))
    return two_outcome(e, labels=["E", "I-E"], name=name,
                       params={"kappa": list(k.kappa)}, complement_range=comp.twin_range)


def pauli_expansion(e: Effect) -> np.ndarray:
    """Coefficients ``eps[l, m] = tr[E sigma_l (x) sigma_m] / 4``."""
    if e.dim != 2:
        raise InvalidDimensionError(f"Pauli expansion requires qubits, got d={e.dim}")
    basis = np.einsum("lab,mcd->lmacbd", PAULI, PAULI).reshape(4, 4, 4, 4)
    return np.einsum("ij,lmji->lm", e.matrix, basis).real / 4.0


def from_pauli_expansion(eps: np.ndarray) -> np.ndarray:
    basis = np.einsum("lab,mcd->lmacbd", PAULI, PAULI).reshape(4, 4, 4, 4)
    return np.einsum("lm,lmij->ij", np.asarray(eps, dtype=float), basis)


# --- named comparators -------------------------------------------------------


def swap_povm(d: int = 2) -> Povm:
    if d < 2:
        raise InvalidDimensionError(f"dimension must be >= 2, got {d}")
    s = swap_operator(d)
    eye = np.eye(d * d)
    sym = Effect(d, _frozen((eye + s) / 2), "sym", ((d + 1) / (2 * d), 1.0))
    asym = Effect(d, _frozen((eye - s) / 2), "asym", (0.0, (d - 1) / (2 * d)))
    return validate_povm([sym, asym], labels=["sym", "asym"], name="swap", params={"d": d})


# Face centres of the diagonal polytope; the same distances as 3/4, 1/4 offsets
# but positive as operators.
XY_PLUS = (0.5, 0.25, 0.25, 0.0)
XY_MINUS = (0.5, -0.25, -0.25, 0.0)
Z_PLUS = (0.5, 0.0, 0.0, 0.5)
Z_MINUS = (0.5, 0.0, 0.0, -0.5)
SYM = (0.75, 0.25, 0.25, 0.25)
ASYM = (0.25, -0.25, -0.25, -0.25)


def xy_povm() -> Povm:
    plus = diagonal_effect(XY_PLUS, "xy+")
    minus = diagonal_effect(XY_MINUS, "xy-")
    return validate_povm([plus, minus], labels=["xy+", "xy-"], name="xy")


def z_povm() -> Povm:
    plus = diagonal_effect(Z_PLUS, "z+")
    minus = diagonal_effect(Z_MINUS, "z-")
    return validate_povm([plus, minus], labels=["z+", "z-"], name="z")


def _as_state(x) -> DensityMatrix:
    if isinstance(x, DensityMatrix):
        return x
    return DensityMatrix(x)


def nondiag_povm(xi) -> Povm:
    """Two outcomes ``|Xi_2 Xi_1><Xi_2 Xi_1|`` and its complement.

    ``|Xi_1>, |Xi_2>`` are eigenvectors of the qubit state ``xi`` with
    eigenvalues ``Xi_1 >= Xi_2`` (ties resolved by :func:`sorted_eigh`).
    """
    xi = _as_state(xi)
    if xi.dim != 2:
        raise InvalidDimensionError("the non-diagonal comparator is defined for qubits")
    _, v = sorted_eigh(xi.matrix)
    vec = np.kron(v[:, 1], v[:, 0])
    e1 = Effect(2, _frozen(np.outer(vec, vec.conj())), "E1", (0.0, 0.25))
    return two_outcome(e1, labels=["E1", "E2"], name="nondiag", complement_range=(0.75, 1.0))


ETALON_DIAG = (0.25, 0.375, 0.125, 0.625)


def etalon_povm(psi) -> Povm:
    """Two-outcome comparator certifying copies of a fixed pure qubit state."""
    if not isinstance(psi, DensityMatrix):
        a = np.asarray(psi, dtype=complex)
        if a.ndim == 1:
            a = np.outer(a, a.conj()) / np.vdot(a, a).real
        psi = DensityMatrix(a)
    if psi.dim != 2:
        raise InvalidDimensionError("the etalon comparator is defined for qubits")
    if abs(purity(psi) - 1.0) > 1e-9:
        raise NotAStateError(f"etalon comparator needs a pure state (purity {purity(psi):.6g})")
    _, v = sorted_eigh(psi.matrix)
    u = np.kron(v, v)
    m = u @ np.diag(ETALON_DIAG) @ u.conj().T
    m = (m + m.conj().T) / 2
    e1 = Effect(2, _frozen(m), "E1", (0.25, 0.625))
    return two_outcome(e1, labels=["E1", "E2"], name="etalon", complement_range=(0.375, 0.75))


@dataclass(frozen=True)
class Au2Params:
    lam: float = 0.5
    mu: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise QCompareError(f"lambda must lie in [0, 1], got {self.lam}")
        bound = min(self.lam, 1.0 - self.lam)
        if abs(self.mu) > bound + 1e-15:
            raise QCompareError(f"|mu| must not exceed min(lambda, 1 - lambda) = {bound}, got {self.mu}")


def au2_qubit(p: Au2Params = Au2Params()) -> Povm:
    lam, mu = p.lam, p.mu
    e = Effect(2, _frozen(np.diag([lam, lam + mu, lam - mu, lam]).astype(complex)), "E", (lam, lam))
    return two_outcome(e, labels=["E", "I-E"], name="au2",
                       params={"lambda": lam, "mu": mu}, complement_range=(1 - lam, 1 - lam))


def au2_scale(d: int, j: int) -> float:
    """Scale ``s`` in ``A_j = (I + s Lambda_j) / 2`` keeping ``O <= A_j <= I``.

    ``sqrt(2/d)`` is used whenever it is admissible; for diagonal generators
    whose spectral radius exceeds ``sqrt(d/2)`` the scale shrinks to
    ``1 / ||Lambda_j||``.
    """
    lam = build_basis(d).elements[j]
    radius = float(np.max(np.abs(np.linalg.eigvalsh(lam))))
    return min(np.sqrt(2.0 / d), 1.0 / radius)


def au2_general(d: int, j: int) -> Povm:
    """``E = (A (x) I + I (x) (I - A)) / 2`` with ``A = (I + s Lambda_j) / 2``."""
    basis = build_basis(d)
    if not 0 <= j < len(basis):
        raise QCompareError(f"basis index must lie in [0, {len(basis) - 1}], got {j}")
    s = au2_scale(d, j)
    a = (np.eye(d) + s * basis.elements[j]) / 2
    eye = np.eye(d)
    m = (np.kron(a, eye) + np.kron(eye, eye - a)) / 2
    e = Effect(d, _frozen(m), "E", (0.5, 0.5))
    return two_outcome(e, labels=["E", "I-E"], name="au2d",
                       params={"d": d, "j": j, "scale": s}, complement_range=(0.5, 0.5))


def au3_qubit() -> Povm:
    e1 = Effect(2, _frozen(np.diag([0, 1, 0, 0]).astype(complex)), "01", (0.0, 0.25))
    e2 = Effect(2, _frozen(np.diag([0, 0, 1, 0]).astype(complex)), "10", (0.0, 0.25))
    e3 = Effect(2, _frozen(np.diag([1, 0, 0, 1]).astype(complex)), "00+11", (0.5, 1.0))
    return validate_povm([e1, e2, e3], labels=["01", "10", "00+11"], name="au3")


def aucg_povm(d: int, basis=None) -> Povm:
    """Coarse-grained local projective measurement with ``d(d-1)+1`` outcomes.

    ``basis`` holds the orthonormal vectors as columns (default: standard).
    """
    if d < 2:
        raise InvalidDimensionError(f"dimension must be >= 2, got {d}")
    u = np.eye(d, dtype=complex) if basis is None else np.asarray(basis, dtype=complex)
    if u.shape != (d, d):
        raise DimensionMismatchError(f"basis must be {d}x{d}, got {u.shape}")
    dev = float(np.max(np.abs(u.conj().T @ u - np.eye(d))))
    if dev > 1e-10:
        raise QCompareError(f"basis is not orthonormal (max deviation {dev:.3e})")
    q = [np.outer(u[:, j], u[:, j].conj()) for j in range(d)]
    e0 = sum(np.kron(qj, qj) for qj in q)
    effects = [Effect(d, _frozen(e0), "0", (1.0 / d, 1.0))]
    labels = ["0"]
    for j in range(d):
        for k in range(d):
            if j != k:
                lab = f"{j}{k}"
                effects.append(Effect(d, _frozen(np.kron(q[j], q[k])), lab, (0.0, 0.25)))
                labels.append(lab)
    return validate_povm(effects, labels=labels, name="aucg", params={"d": d})


# --- probabilities -----------------------------------------------------------


def probabilities(p: Povm, omega) -> np.ndarray:
    """``p_j = tr[E_j omega]`` for a state on the two-copy space."""
    w = omega.matrix if isinstance(omega, DensityMatrix) else np.asarray(omega, dtype=complex)
    n = p.dim * p.dim
    if w.shape != (n, n):
        raise DimensionMismatchError(f"state of shape {w.shape} does not match POVM on {n}x{n}")
    probs = np.array([np.einsum("ab,ba->", e.matrix, w).real for e in p.effects])
    if probs.min() < -PROB_CLAMP_TOL:
        raise QCompareError(f"negative probability {probs.min():.3e}")
    probs = np.clip(probs, 0.0, 1.0)
    if abs(probs.sum() - 1.0) > 1e-10:
        raise QCompareError(f"probabilities sum to {probs.sum()!r}")
    return probs


def product_probabilities(p: Povm, rho, xi) -> np.ndarray:
    return probabilities(p, product(rho, xi))
