"""Density operators and their Bloch-vector parameterization.

A state in dimension ``d`` is written as ``rho = (I + r . Lambda) / d`` where
``Lambda`` is the generalized Gell-Mann basis scaled so that
``tr[Lambda_j Lambda_k] = d delta_jk``.  For ``d = 2`` the basis is the Pauli
triple ``(sigma_x, sigma_y, sigma_z)``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InvalidDimensionError, NotAStateError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
ROUNDTRIP_TOL = 1e-10


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class OperatorBasis:
    """Traceless Hermitian basis ``Lambda_1 .. Lambda_{d^2-1}``.

    ``elements`` has shape ``(d*d - 1, d, d)``.
    """

    dim: int
    elements: np.ndarray

    def __len__(self):
        return self.elements.shape[0]

    @functools.cached_property
    def extended(self) -> np.ndarray:
        """Basis with the identity prepended, shape ``(d*d, d, d)``."""
        eye = np.eye(self.dim, dtype=complex)[None]
        return _frozen(np.concatenate([eye, self.elements]))


@functools.lru_cache(maxsize=None)
def build_basis(d: int) -> OperatorBasis:
    """Generalized Gell-Mann basis with ``tr[L_j L_k] = d delta_jk``.

    Ordering is symmetric off-diagonal generators first, then the
    antisymmetric ones, then the diagonal ones; off-diagonal pairs are
    enumerated as ``(j, k)`` with ``j < k`` in lexicographic order.
    """
    if not isinstance(d, (int, np.integer)) or d < 2:
        raise InvalidDimensionError(f"dimension must be an integer >= 2, got {d!r}")
    d = int(d)
    scale = np.sqrt(d / 2.0)
    pairs = [(j, k) for j in range(d) for k in range(j + 1, d)]
    sym, asym, diag = [], [], []
    for j, k in pairs:
        m = np.zeros((d, d), dtype=complex)
        m[j, k] = m[k, j] = 1.0
        sym.append(m * scale)
        m = np.zeros((d, d), dtype=complex)
        m[j, k] = -1j
        m[k, j] = 1j
        asym.append(m * scale)
    for l in range(1, d):
        v = np.zeros(d)
        v[:l] = 1.0
        v[l] = -float(l)
        v *= np.sqrt(2.0 / (l * (l + 1)))
        diag.append(np.diag(v).astype(complex) * scale)
    return OperatorBasis(d, _frozen(np.array(sym + asym + diag)))


def check_state_matrix(m: np.ndarray) -> np.ndarray:
    """Validate a candidate density matrix; returns it as a complex array."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotAStateError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] < 2:
        raise InvalidDimensionError(f"dimension must be >= 2, got {m.shape[0]}")
    herm = np.max(np.abs(m - m.conj().T))
    if herm > HERMITIAN_TOL:
        raise NotAStateError(f"matrix is not Hermitian (max deviation {herm:.3e})")
    tr = np.trace(m).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise NotAStateError(f"trace is {tr!r}, expected 1")
    lo = float(np.linalg.eigvalsh(m)[0])
    if lo < -PSD_TOL:
        raise NotAStateError(f"matrix is not positive semidefinite (min eigenvalue {lo:.3e})", lo)
    return m


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Validated unit-trace positive semidefinite Hermitian operator."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(check_state_matrix(self.matrix)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def bloch(self) -> "BlochVector":
        return to_bloch(self)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    def to_json(self):
        return {"dim": self.dim, "matrix": matrix_to_json(self.matrix)}

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, dict) and "bloch" in obj:
            return from_bloch(BlochVector(int(obj["dim"]), obj["bloch"]))
        m = matrix_from_json(obj["matrix"] if isinstance(obj, dict) else obj)
        if isinstance(obj, dict) and "dim" in obj and int(obj["dim"]) != m.shape[0]:
            raise DimensionMismatchError(f"dim field {obj['dim']} disagrees with matrix size {m.shape[0]}")
        return cls(m)


@dataclass(frozen=True, eq=False)
class BlochVector:
    dim: int
    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float).reshape(-1)
        if self.dim < 2:
            raise InvalidDimensionError(f"dimension must be >= 2, got {self.dim}")
        if c.size != self.dim**2 - 1:
            raise DimensionMismatchError(f"expected {self.dim**2 - 1} coordinates for d={self.dim}, got {c.size}")
        norm = float(np.linalg.norm(c))
        if norm > np.sqrt(self.dim - 1) + PSD_TOL:
            raise NotAStateError(f"Bloch vector norm {norm:.6g} exceeds sqrt(d-1)")
        object.__setattr__(self, "coords", _frozen(c))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))

    def to_json(self):
        return {"dim": self.dim, "coords": [float(x) for x in self.coords]}

    @classmethod
    def from_json(cls, obj):
        return cls(int(obj["dim"]), obj["coords"])


def matrix_from_bloch_coords(coords: np.ndarray, d: int) -> np.ndarray:
    """Unvalidated ``(I + r . Lambda) / d``; broadcasts over leading axes."""
    basis = build_basis(d)
    coords = np.asarray(coords, dtype=float)
    m = np.tensordot(coords, basis.elements, axes=([-1], [0]))
    return (m + np.eye(d)) / d


def bloch_coords(m: np.ndarray) -> np.ndarray:
    """``r_j = tr[rho Lambda_j]`` for a matrix or a stack of matrices."""
    m = np.asarray(m)
    d = m.shape[-1]
    basis = build_basis(d)
    # tr[A B] = sum_ab A_ab B_ba
    return np.einsum("...ab,jba->...j", m, basis.elements).real


def from_bloch(r: BlochVector) -> DensityMatrix:
    m = matrix_from_bloch_coords(r.coords, r.dim)
    lo = float(np.linalg.eigvalsh(m)[0])
    if lo < -PSD_TOL:
        raise NotAStateError(
            f"Bloch vector does not describe a state (min eigenvalue {lo:.3e})", lo
        )
    return DensityMatrix(m)


def to_bloch(rho: DensityMatrix) -> BlochVector:
    return BlochVector(rho.dim, bloch_coords(rho.matrix))


def qubit(x: float, y: float, z: float) -> DensityMatrix:
    """Qubit state from Bloch coordinates."""
    return from_bloch(BlochVector(2, [x, y, z]))


def maximally_mixed(d: int) -> DensityMatrix:
    return DensityMatrix(np.eye(d) / d)


def pure_state(psi) -> DensityMatrix:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    psi = psi / np.linalg.norm(psi)
    return DensityMatrix(np.outer(psi, psi.conj()))


def _matrix(x):
    return x.matrix if isinstance(x, DensityMatrix) else np.asarray(x, dtype=complex)


def _check_same_dim(a, b):
    if a.shape != b.shape:
        raise DimensionMismatchError(f"dimension mismatch: {a.shape} vs {b.shape}")


def purity(rho) -> float:
    m = _matrix(rho)
    return float(np.einsum("ab,ba->", m, m).real)


def trace_distance(rho, xi) -> float:
    """``tr|rho - xi|``, the sum of absolute eigenvalues (range ``[0, 2]``)."""
    a, b = _matrix(rho), _matrix(xi)
    _check_same_dim(a, b)
    return float(np.sum(np.abs(np.linalg.eigvalsh(a - b))))


def overlap(rho, xi) -> float:
    """``tr[rho xi]``."""
    a, b = _matrix(rho), _matrix(xi)
    _check_same_dim(a, b)
    return float(np.einsum("ab,ba->", a, b).real)


def sorted_eigh(m: np.ndarray):
    """Eigen-decomposition with eigenvalues descending and fixed phases.

    Each eigenvector is rescaled so that its first component with modulus
    above 1e-12 is real and positive; this makes the basis deterministic.
    """
    w, v = np.linalg.eigh(np.asarray(m, dtype=complex))
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    for i in range(v.shape[1]):
        col = v[:, i]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size:
            ph = col[nz[0]] / abs(col[nz[0]])
            v[:, i] = col / ph
    return w, v


def matrix_to_json(m: np.ndarray):
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_json(rows) -> np.ndarray:
    a = np.asarray(rows, dtype=float)
    if a.ndim == 3 and a.shape[-1] == 2:
        return a[..., 0] + 1j * a[..., 1]
    if a.ndim == 2:
        return a.astype(complex)
    raise ValueError("matrix JSON must be rows of [re, im] pairs")
