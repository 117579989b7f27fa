import math

import numpy as np
import pytest
from scipy import special

from qcompare import analytic as an
from qcompare.errors import ConvergenceError, OutOfDomainError, QCompareError


@pytest.mark.parametrize("a", an.all_densities(), ids=lambda a: f"{a.effect}-{a.kind}-{a.measure}")
def test_every_curve_normalizes(a):
    assert an.normalization(a) == pytest.approx(1.0, abs=1e-8)


def test_curve_count():
    curves = an.all_densities()
    assert len(curves) == 16
    assert sum(a.point_mass is not None for a in curves) == 2


@pytest.mark.parametrize(
    "effect, measure, exact",
    [
        ("asym", "hs", 9 / 128),
        ("asym", "bures", 8 / (9 * math.pi**2)),
        ("z-", "hs", 9 / 128),
        ("z-", "bures", 8 / (9 * math.pi**2)),
        ("xy-", "hs", 9 * math.pi / 512),
        ("au2", "hs", 9 / 35),
        ("au2", "bures", 128 / (45 * math.pi**2)),
    ],
)
def test_exact_means(effect, measure, exact):
    assert an.mean_distance(an.density(effect, "diff", measure)) == pytest.approx(exact, abs=1e-8)


def test_xy_bures_mean():
    assert an.mean_distance(an.density("xy-", "diff", "bures")) == pytest.approx(0.07074, abs=1e-5)


def test_g_kernel_matches_elliptic_form():
    # g(c) = E(m) - (1 - m) K(m), m = 1 - c^2
    for c in (0.1, 0.37, 0.5, 0.9, 0.999):
        m = 1 - c * c
        assert an.g_kernel(c) == pytest.approx(special.ellipe(m) - (1 - m) * special.ellipk(m), abs=1e-10)
    assert an.g_kernel(1.0) == 0.0
    assert an.g_kernel(0.0) == pytest.approx(1.0)


def test_hs_asym_value_at_frontier():
    a = an.density("asym", "diff", "hs")
    assert a(0.25) == pytest.approx(4.5)
    assert a(0.0) == pytest.approx(0.0, abs=1e-12) and a(0.5) == pytest.approx(0.0, abs=1e-12)


def test_same_curves_closed_form_values():
    assert an.density("xy-", "same", "hs")(0.5) == pytest.approx(6.0)
    assert an.density("xy-", "same", "bures")(0.3) == 4.0
    assert an.density("asym", "same", "hs")(0.0) == pytest.approx(6.0)
    assert math.isinf(an.density("z-", "same", "hs")(0.5))


def test_vectorized_call():
    a = an.density("au2", "diff", "hs")
    p = np.linspace(0, 1, 7)
    assert np.allclose(a(p), [a(float(x)) for x in p])
    assert a(0.5) == pytest.approx(2.4)


def test_domain_errors():
    a = an.density("asym", "diff", "hs")
    with pytest.raises(OutOfDomainError):
        a(0.6)
    a(0.5 + 1e-13)  # within tolerance
    with pytest.raises(QCompareError):
        an.density("swap", "diff", "hs")
    with pytest.raises(QCompareError):
        an.density("asym", "both", "hs")
    with pytest.raises(QCompareError):
        an.mean_distance(an.density("asym", "same", "hs"))


def test_point_mass_curves():
    a = an.density("au2", "same", "bures")
    assert a.point_mass == 0.5 and an.normalization(a) == 1.0
    assert an.csv_rows(a) == [(0.5, math.inf)]
    with pytest.raises(OutOfDomainError):
        a(0.3)


def test_frontier():
    assert an.density("asym", "diff", "hs").frontier == 0.25
    assert an.density("xy-", "diff", "hs").frontier == 0.5
    assert an.density("z-", "diff", "bures").frontier == 0.5
    assert an.density("au2", "diff", "hs").frontier == 0.5


def test_quadrature_endpoint_singularity():
    # int_0^1 1/sqrt(x) = 2 and int_0^1 1/sqrt(1-x) = 2
    assert an.quadrature(lambda x: 1 / math.sqrt(x) if x > 0 else math.inf, 0, 1, singular="left") == pytest.approx(2, abs=1e-10)
    assert an.quadrature(lambda x: 1 / math.sqrt(1 - x) if x < 1 else math.inf, 0, 1, singular="right") == pytest.approx(2, abs=1e-10)
    f = lambda x: 1 / math.sqrt(x * (1 - x)) if 0 < x < 1 else math.inf
    assert an.quadrature(f, 0, 1, singular="both") == pytest.approx(math.pi, abs=1e-10)
    assert an.quadrature(math.sin, math.pi, 0) == pytest.approx(-2)
    with pytest.raises(ValueError):
        an.quadrature(math.sin, 0, 1, singular="middle")
    with pytest.raises(QCompareError):
        an.quadrature(math.sin, 0, 1, tol=1e-14)


def test_quadrature_reports_failure():
    with pytest.raises(ConvergenceError):
        an.quadrature(lambda x: math.sin(1 / x) / x if x else 0.0, 0, 1, tol=1e-12)


def test_csv_rows_grid():
    rows = an.csv_rows(an.density("asym", "same", "hs"), points=11)
    assert len(rows) == 11 and rows[0][0] == 0.0 and rows[-1][0] == 0.25


@pytest.mark.parametrize("effect", ["asym", "xy-", "z-"])
def test_hs_diff_curves_against_monte_carlo(effect):
    """Bin averages of each HS diff curve match a 10^6 sample histogram."""
    from qcompare.comparators import get_comparator
    from qcompare.estimators import density_estimate

    cid, idx = an.EFFECT_SOURCES[effect]
    e = get_comparator(cid).povm.effects[idx]
    a = an.density(effect, "diff", "hs")
    h = density_estimate(e, "diff", "hs", 40, 1_000_000, seed=17)
    assert h.edges[0] == pytest.approx(a.domain[0]) and h.edges[-1] == pytest.approx(a.domain[1])
    avg = np.array([an.quadrature(a, lo, hi, tol=1e-9) / (hi - lo) for lo, hi in zip(h.edges[:-1], h.edges[1:])])
    keep = np.ones(len(avg), bool)
    keep[[0, -1]] = False
    assert np.max(np.abs(h.values - avg)[keep]) < 0.08
