import numpy as np
import pytest

from conftest import random_qubit, random_state, random_unitary
from qcompare import comparison as cmp
from qcompare.comparators import get_comparator
from qcompare.effects import Au2Params, au2_qubit, au3_qubit, diagonal_povm, swap_povm, xy_povm, z_povm
from qcompare.errors import DimensionMismatchError, OutOfDomainError
from qcompare.states import DensityMatrix, bloch_coords, maximally_mixed, pure_state, qubit, trace_distance


def test_swap_closed_form_examples():
    assert cmp.swap_distance(pure_state([1, 0]), pure_state([0, 1])) == pytest.approx(0.5)
    assert cmp.swap_distance(maximally_mixed(2), pure_state([1, 0])) == 0.0
    assert cmp.swap_distance(pure_state([1, 0, 0]), pure_state([0, 1, 0])) == pytest.approx(1 / 3)


def test_distance_rejects_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        cmp.distance(swap_povm(2), maximally_mixed(2), maximally_mixed(3))
    with pytest.raises(DimensionMismatchError):
        cmp.distance(swap_povm(3), maximally_mixed(2), maximally_mixed(2))


@pytest.mark.parametrize("povm", [swap_povm(2), xy_povm(), z_povm(), au3_qubit(), au2_qubit(Au2Params(0.5, 0.5))],
                         ids=["swap", "xy", "z", "au3", "au2"])
def test_twin_states_have_zero_distance(rng, povm):
    for _ in range(20):
        eta = random_state(rng, 2)
        assert cmp.distance(povm, eta, eta).value <= cmp.TAU


def test_swap_closed_form_matches_optimizer(rng):
    for d in (2, 3):
        p = swap_povm(d)
        for _ in range(6 if d == 2 else 3):
            a, b = random_state(rng, d), random_state(rng, d)
            opt = cmp.distance(p, a, b).value
            assert opt == pytest.approx(cmp.swap_distance(a, b), abs=1e-6)


def test_swap_distance_is_twice_gap():
    # Bloch form: D = max(0, -r.k / d) for the two-outcome pair
    a, b = qubit(0, 0, 0.8), qubit(0, 0, -0.5)
    assert cmp.distance_two_outcome(swap_povm(2).effects[1], a, b).value == pytest.approx(0.4 / 2)


def test_diagonal_closed_form_matches_optimizer(rng):
    kappas = [(0.5, 0.5, 0.0, 0.0), (0.5, 0.25, 0.25, 0.0), (0.25, -0.25, -0.25, -0.25), (0.5, -0.2, 0.1, 0.1)]
    for kappa in kappas:
        p = diagonal_povm(kappa)
        for _ in range(4):
            a, b = random_qubit(rng), random_qubit(rng)
            closed = cmp.diagonal_distance(kappa, a, b)
            assert closed == pytest.approx(cmp.distance(p, a, b).value, abs=1e-6)


def test_au2_closed_form(rng):
    prm = Au2Params(0.5, 0.3)
    p = au2_qubit(prm)
    for _ in range(5):
        a, b = random_qubit(rng), random_qubit(rng)
        assert cmp.au2_distance(prm, a, b) == pytest.approx(cmp.distance(p, a, b).value, abs=1e-6)


def test_au3_closed_form(rng):
    p = au3_qubit()
    for _ in range(5):
        a, b = random_qubit(rng), random_qubit(rng)
        assert cmp.au3_distance(a, b) == pytest.approx(cmp.distance(p, a, b).value, abs=1e-6)
    assert cmp.au3_distance(qubit(0, 0, 1), qubit(0, 0, -0.25)) == pytest.approx(0.75)


def test_au3_z_examples():
    assert cmp.au3_distance_z(0.5, 0.5) == 0.0
    assert cmp.au3_distance_z(0.5, -0.5) == pytest.approx(0.5 * (1 + 0.25))
    assert cmp.au3_distance_z(0.5, 0.1) == pytest.approx(0.2)


def test_nondiag_closed_form(rng):
    xi = qubit(0.2, -0.1, 0.5)
    c = get_comparator("nondiag", ref_bloch=bloch_coords(xi.matrix))
    for _ in range(10):
        rho = random_qubit(rng)
        assert cmp.nondiag_distance(xi, rho) == pytest.approx(cmp.distance(c.povm, rho, xi).value, abs=1e-6)
    assert cmp.nondiag_distance(pure_state([1, 0]), maximally_mixed(2)) == pytest.approx(0.5)


def test_two_outcome_route_matches_optimizer(rng):
    c = get_comparator("etalon", ref_bloch=(0.6, 0, 0.8))
    for _ in range(5):
        a, b = random_qubit(rng), random_qubit(rng)
        res = cmp.distance_two_outcome(c.povm.effects[0], a, b)
        assert res.method == "closed-form"
        assert res.value == pytest.approx(cmp.distance(c.povm, a, b).value, abs=1e-6)


def test_minimizer_is_a_twin_achieving_the_bound(rng):
    p = xy_povm()
    a, b = random_qubit(rng), random_qubit(rng)
    res = cmp.distance(p, a, b)
    eta = res.minimizer
    omega = np.kron(a.matrix, b.matrix)
    twin = np.kron(eta.matrix, eta.matrix)
    val = sum(abs(np.trace(e.matrix @ (omega - twin)).real) for e in p.effects)
    assert val == pytest.approx(res.value, abs=1e-8) or res.value == 0.0


def test_twin_range_closed_vs_optimizer():
    for e in (swap_povm(2).effects[1], z_povm().effects[1], xy_povm().effects[1], au2_qubit(Au2Params(0.4, 0.2)).effects[0]):
        lo, hi = cmp.twin_range(e)
        olo, ohi = cmp.twin_range(e, method="optimize")
        assert olo == pytest.approx(lo, abs=1e-8) and ohi == pytest.approx(hi, abs=1e-8)
    with pytest.raises(ValueError):
        cmp.twin_range(z_povm().effects[0], method="bogus")


@pytest.mark.parametrize("d", [2, 3])
def test_swap_twin_and_product_ranges(d):
    sym, asym = swap_povm(d).effects
    assert cmp.twin_range(asym, method="optimize") == pytest.approx((0.0, (d - 1) / (2 * d)), abs=1e-7)
    assert cmp.product_range(asym) == pytest.approx((0.0, 0.5), abs=1e-9)
    assert cmp.product_range(sym) == pytest.approx((0.5, 1.0), abs=1e-9)


def test_twin_parameterization_produces_states(rng):
    param = cmp.TwinParameterization(3)
    for _ in range(50):
        x = rng.normal(size=8) * 2
        param.state(x)  # raises NotAStateError if invalid
    inside = bloch_coords(random_state(rng, 3).matrix)
    assert np.allclose(param(inside), inside)


def test_halfspaces_match_batch_distance(rng):
    xi = qubit(0.0, 0.0, 0.6)
    c = get_comparator("z")
    hp = cmp.comparable_halfspaces(c.povm.effects[0], xi)
    assert not hp.degenerate
    r = rng.uniform(-1, 1, size=(4000, 3))
    r = r[np.einsum("ij,ij->i", r, r) <= 1]
    pos = c.batch_distance(r, np.tile([0, 0, 0.6], (len(r), 1))) > 0
    geo = np.array([hp.comparable(x) for x in r])
    assert np.array_equal(pos, geo)
    assert np.array_equal(geo, r[:, 2] < 0)


def test_halfspaces_for_mixed_reference():
    e = au2_qubit(Au2Params(0.5, 0.5)).effects[0]
    hp = cmp.comparable_halfspaces(e, maximally_mixed(2))
    assert not hp.degenerate
    hp_swap = cmp.comparable_halfspaces(swap_povm(2).effects[1], maximally_mixed(2))
    assert hp_swap.degenerate and not hp_swap.upper_feasible and not hp_swap.lower_feasible


@pytest.mark.parametrize("eps", [0.1, 0.01, 0.001])
def test_epsilon_construction(rng, eps):
    for d in (2, 3):
        eta = random_state(rng, d)
        pair = cmp.epsilon_construction(eta, eps)
        assert pair.max_deviation <= eps
        assert trace_distance(pair.rho, pair.xi) > 0
        pair2 = cmp.epsilon_construction(eta, eps, swap_povm(d))
        assert pair2.max_deviation <= pair.max_deviation + 1e-15
    with pytest.raises(OutOfDomainError):
        cmp.epsilon_construction(maximally_mixed(2), 0.0)


def test_trace_distance_bound(rng):
    for d in (2, 3):
        asym = swap_povm(d).effects[1]
        for _ in range(200):
            a, b = random_state(rng, d), random_state(rng, d)
            p = float(np.trace(asym.matrix @ np.kron(a.matrix, b.matrix)).real)
            assert trace_distance(a, b) <= cmp.trace_distance_bound(p) + 1e-12
    with pytest.raises(OutOfDomainError):
        cmp.trace_distance_bound(0.6)


def test_swap_unitary_covariance(rng):
    for d in (2, 3, 4):
        for _ in range(10):
            a, b = random_state(rng, d), random_state(rng, d)
            u = random_unitary(rng, d)
            ua = DensityMatrix(u @ a.matrix @ u.conj().T)
            ub = DensityMatrix(u @ b.matrix @ u.conj().T)
            assert abs(cmp.swap_distance(ua, ub) - cmp.swap_distance(a, b)) <= 1e-10


def test_diagonal_distance_validates_kappa():
    from qcompare.errors import InvalidEffectError

    with pytest.raises(InvalidEffectError, match="line"):
        cmp.diagonal_distance((0.25, 0.25, 0.25, 0.25), maximally_mixed(2), maximally_mixed(2))


def test_distance_result_json(rng):
    res = cmp.distance(swap_povm(2), random_qubit(rng), random_qubit(rng))
    obj = res.to_json()
    assert obj["method"] == "optimized" and len(obj["minimizer_bloch"]) == 3
