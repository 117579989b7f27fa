import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_state, random_unitary
from qcompare import effects as fx
from qcompare.effects import (
    ASYM,
    SYM,
    Au2Params,
    DiagonalQubitEffect,
    Povm,
    au2_general,
    au2_qubit,
    au3_qubit,
    aucg_povm,
    diagonal_effect,
    etalon_povm,
    from_pauli_expansion,
    nondiag_povm,
    pauli_expansion,
    polytope_membership,
    polytope_membership_batch,
    probabilities,
    product,
    product_probabilities,
    swap_operator,
    swap_povm,
    validate_effect,
    validate_povm,
    xy_povm,
    z_povm,
)
from qcompare.errors import InvalidDimensionError, InvalidEffectError, InvalidPovmError, NotAStateError, QCompareError
from qcompare.states import DensityMatrix, maximally_mixed, pure_state, qubit


def _check_povm(p: Povm):
    d2 = p.dim**2
    total = sum(e.matrix for e in p.effects)
    assert np.max(np.abs(total - np.eye(d2))) <= 1e-10
    for e in p.effects:
        assert np.max(np.abs(e.matrix - e.matrix.conj().T)) <= 1e-12
        w = np.linalg.eigvalsh(e.matrix)
        assert w[0] >= -1e-10 and w[-1] <= 1 + 1e-10


def test_validate_effect_rejects_large_eigenvalue():
    with pytest.raises(InvalidEffectError, match="above 1") as exc:
        validate_effect(np.diag([1.2, 0, 0, 0]), 2)
    assert exc.value.magnitude == pytest.approx(0.2)


def test_validate_effect_rejects_non_hermitian():
    m = np.zeros((4, 4))
    m[0, 1] = 0.5
    with pytest.raises(InvalidEffectError, match="Hermitian"):
        validate_effect(m, 2)


def test_validate_povm_rejections():
    e = validate_effect(np.eye(4) * 0.5, 2)
    with pytest.raises(InvalidPovmError):
        validate_povm([e])
    f = validate_effect(np.eye(4) * 0.4, 2)
    with pytest.raises(InvalidPovmError, match="identity"):
        validate_povm([e, f])


def test_complement_pair_is_valid(rng):
    for _ in range(20):
        u = random_unitary(rng, 4)
        m = u @ np.diag(rng.random(4)) @ u.conj().T
        e = validate_effect((m + m.conj().T) / 2, 2)
        _check_povm(fx.two_outcome(e))


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_swap_effects_are_projectors(d):
    p = swap_povm(d)
    _check_povm(p)
    for e in p.effects:
        assert np.allclose(e.matrix @ e.matrix, e.matrix, atol=1e-12)
        w = np.linalg.eigvalsh(e.matrix)
        assert np.allclose(w[np.abs(w) > 0.5], 1) and np.allclose(w[np.abs(w) <= 0.5], 0)
    assert np.trace(p.effects[1].matrix).real == pytest.approx(d * (d - 1) / 2)


def test_asym_vanishes_on_identical_pure_states(rng):
    asym = swap_povm(2).effects[1].matrix
    for _ in range(100):
        phi = rng.normal(size=2) + 1j * rng.normal(size=2)
        v = np.kron(phi, phi)
        v /= np.linalg.norm(v)
        assert abs(np.vdot(v, asym @ v)) < 1e-12


def test_diagonal_effect_examples():
    asym = diagonal_effect(ASYM)
    assert np.allclose(asym.matrix, swap_povm(2).effects[1].matrix)
    sym = diagonal_effect(SYM)
    assert np.allclose(sym.matrix, swap_povm(2).effects[0].matrix)
    with pytest.raises(InvalidEffectError, match="line 1"):
        diagonal_effect((0.25, 0.25, 0.25, 0.25))


def test_diagonal_effect_matches_pauli_sum(rng):
    sig = fx.PAULI
    for _ in range(30):
        k0 = rng.random()
        k = rng.uniform(-1, 1, 3)
        if not polytope_membership(k, k0):
            continue
        m = k0 * np.eye(4) + sum(k[i] * np.kron(sig[i + 1], sig[i + 1]) for i in range(3))
        assert np.allclose(diagonal_effect((k0, *k)).matrix, m)


def test_polytope_examples():
    assert polytope_membership([0.5, 0, 0], 0.5)
    assert not polytope_membership([0.5, 0.5, 0.5], 0.5)
    # vertices of the kappa0 = 1/2 octahedron and the swap pair
    for v in np.vstack([np.eye(3), -np.eye(3)]) * 0.5:
        assert polytope_membership(v, 0.5)
    assert polytope_membership([-0.25] * 3, 0.25)
    assert polytope_membership([0.25] * 3, 0.75)


def test_polytope_inversion_symmetry(rng):
    pts = rng.uniform(-1, 1, size=(200_000, 3))
    a = polytope_membership_batch(pts, 3 / 8).mean()
    b = polytope_membership_batch(pts, 5 / 8).mean()
    se = np.sqrt(a * (1 - a) / len(pts))
    assert abs(a - b) < 5 * se * np.sqrt(2)
    # exact pointwise form of the symmetry
    assert np.array_equal(polytope_membership_batch(pts, 3 / 8), polytope_membership_batch(-pts, 5 / 8))


def test_batch_membership_agrees_with_scalar(rng):
    pts = rng.uniform(-1, 1, size=(500, 3))
    k0 = 0.4
    assert [polytope_membership(p, k0) for p in pts] == list(polytope_membership_batch(pts, k0))


def test_diagonal_twin_and_diff_ranges(rng):
    """Twin probabilities stay inside the closure of the product-state range."""
    from conftest import random_qubit
    from qcompare.states import bloch_coords

    for _ in range(20):
        k0 = rng.random()
        k = rng.uniform(-1, 1, 3)
        if not polytope_membership(k, k0):
            continue
        dq = DiagonalQubitEffect((k0, *k))
        e = diagonal_effect(dq)
        lo, hi = dq.twin_range
        dlo, dhi = dq.diff_range
        assert dlo - 1e-12 <= lo and hi <= dhi + 1e-12
        for _ in range(50):
            a, b = random_qubit(rng), random_qubit(rng)
            pd = np.einsum("ab,ba->", e.matrix, product(a, b)).real
            ps = np.einsum("ab,ba->", e.matrix, product(a, a)).real
            assert dlo - 1e-12 <= pd <= dhi + 1e-12
            assert lo - 1e-12 <= ps <= hi + 1e-12


def test_pauli_expansion_examples():
    eps = pauli_expansion(swap_povm(2).effects[1])
    expected = np.zeros((4, 4))
    expected[0, 0] = 0.25
    for m in (1, 2, 3):
        expected[m, m] = -0.25
    assert np.allclose(eps, expected)
    ident = fx.Effect(2, np.eye(4, dtype=complex))
    e2 = pauli_expansion(ident)
    assert e2[0, 0] == pytest.approx(1) and np.allclose(np.delete(e2.ravel(), 0), 0)
    with pytest.raises(InvalidDimensionError):
        pauli_expansion(swap_povm(3).effects[0])


def test_pauli_roundtrip(rng):
    for _ in range(20):
        u = random_unitary(rng, 4)
        m = u @ np.diag(rng.random(4)) @ u.conj().T
        e = validate_effect((m + m.conj().T) / 2, 2)
        assert np.max(np.abs(from_pauli_expansion(pauli_expansion(e)) - e.matrix)) < 1e-10


def test_named_qubit_builders_are_valid():
    for p in (xy_povm(), z_povm(), au3_qubit(), au2_qubit(), nondiag_povm(qubit(0.1, 0.2, 0.3)),
              etalon_povm(pure_state([1, 1j]))):
        _check_povm(p)


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_dimensional_builders_are_valid(d):
    _check_povm(swap_povm(d))
    _check_povm(aucg_povm(d))
    for j in range(d * d - 1):
        _check_povm(au2_general(d, j))
    assert len(aucg_povm(d)) == d * (d - 1) + 1


def test_au2_matrix():
    e = au2_qubit(Au2Params(0.5, 0.5)).effects[0]
    assert np.allclose(e.matrix, np.diag([0.5, 1, 0, 0.5]))


def test_au2_params_validation():
    with pytest.raises(QCompareError):
        Au2Params(0.3, 0.4)
    with pytest.raises(QCompareError):
        Au2Params(1.2, 0.0)
    Au2Params(0.3, -0.3)


def test_au2_rescale_for_deep_diagonal_generators():
    # sqrt(2/d) keeps A_j positive except for the last diagonal generators
    assert fx.au2_scale(3, 0) == pytest.approx(np.sqrt(2 / 3))
    d = 5
    s = fx.au2_scale(d, d * d - 2)
    assert s < np.sqrt(2 / d)
    _check_povm(au2_general(d, d * d - 2))


def test_aucg_three_has_seven_effects():
    p = aucg_povm(3)
    assert len(p) == 7
    assert np.allclose(sum(e.matrix for e in p.effects), np.eye(9))


def test_aucg_rejects_non_orthonormal_basis():
    with pytest.raises(QCompareError, match="orthonormal"):
        aucg_povm(2, np.array([[1, 1], [0, 1]]))


def test_aucg_custom_basis(rng):
    u = random_unitary(rng, 3)
    _check_povm(aucg_povm(3, u))


def test_nondiag_example():
    p = nondiag_povm(DensityMatrix(np.diag([1.0, 0.0])))
    assert np.allclose(p.effects[0].matrix, np.diag([0, 0, 1, 0]))


def test_nondiag_degenerate_reference_is_deterministic():
    a = nondiag_povm(maximally_mixed(2))
    b = nondiag_povm(maximally_mixed(2))
    assert np.array_equal(a.effects[0].matrix, b.effects[0].matrix)
    _check_povm(a)


def test_etalon_requires_pure_state():
    with pytest.raises(NotAStateError):
        etalon_povm(qubit(0, 0, 0.5))


def test_swap_probability_identity(rng):
    p = swap_povm(2)
    for _ in range(50):
        a, b = random_state(rng, 2), random_state(rng, 2)
        probs = product_probabilities(p, a, b)
        ov = np.einsum("ab,ba->", a.matrix, b.matrix).real
        assert probs[0] == pytest.approx((1 + ov) / 2, abs=1e-12)


def test_au3_twin_outcomes_balance(rng):
    p = au3_qubit()
    for _ in range(50):
        eta = random_state(rng, 2)
        pr = product_probabilities(p, eta, eta)
        assert pr[0] == pytest.approx(pr[1], abs=1e-12)


def test_etalon_twin_probability(rng):
    p = etalon_povm(pure_state([1, 0]))
    for _ in range(100):
        eta = random_state(rng, 2)
        p1 = product_probabilities(p, eta, eta)[0]
        e22 = eta.matrix[1, 1].real
        assert p1 == pytest.approx((2 + 3 * e22**2) / 8, abs=1e-12)
        assert 0.25 - 1e-12 <= p1 <= 0.625 + 1e-12


@pytest.mark.parametrize("d", [2, 3, 4])
def test_swap_probability_ranges(rng, d):
    sym = swap_povm(d).effects[0].matrix
    for _ in range(100):
        a, b = random_state(rng, d), random_state(rng, d)
        pd = np.einsum("ab,ba->", sym, product(a, b)).real
        ps = np.einsum("ab,ba->", sym, product(a, a)).real
        assert 0.5 - 1e-12 <= pd <= 1 + 1e-12
        assert (d + 1) / (2 * d) - 1e-12 <= ps <= 1 + 1e-12


def test_au2_twin_probability_constant(rng):
    e = au2_qubit(Au2Params(0.4, -0.3)).effects[0]
    vals = [np.einsum("ab,ba->", e.matrix, product(eta, eta)).real for eta in (random_state(rng, 2) for _ in range(1000))]
    assert np.ptp(vals) <= 1e-10 and vals[0] == pytest.approx(0.4, abs=1e-12)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_au2_general_twin_probability_constant(rng, d):
    for j in (0, d * d - 2):
        e = au2_general(d, j).effects[0]
        vals = [np.einsum("ab,ba->", e.matrix, product(eta, eta)).real for eta in (random_state(rng, d) for _ in range(300))]
        assert max(abs(v - 0.5) for v in vals) <= 1e-10


def test_probabilities_validation():
    p = swap_povm(2)
    with pytest.raises(Exception):
        probabilities(p, np.eye(9) / 9)
    # tiny negative values are clamped
    omega = product(pure_state([1, 0]), pure_state([1, 0]))
    pr = probabilities(p, omega)
    assert pr[1] == 0.0 and pr.sum() == pytest.approx(1)


def test_swap_operator_exchanges_factors(rng):
    a, b = random_state(rng, 3), random_state(rng, 3)
    s = swap_operator(3)
    assert np.allclose(s @ product(a, b) @ s, product(b, a))


def test_povm_json_roundtrip():
    p = etalon_povm(pure_state([1, 1]))
    obj = json.loads(json.dumps(p.to_json()))
    q = Povm.from_json(obj)
    assert q.labels == p.labels
    for a, b in zip(p.effects, q.effects):
        assert np.array_equal(a.matrix, b.matrix)


@given(st.floats(0, 1), st.floats(-1, 1))
def test_au2_params_property(lam, frac):
    mu = frac * min(lam, 1 - lam)
    _check_povm(au2_qubit(Au2Params(lam, mu)))
