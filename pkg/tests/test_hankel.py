import math
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hardedge import hankel
from hardedge.hankel import (
    HankelProblem,
    det_adaptive,
    entry_table,
    entry_values,
    exact_moments,
    logdet_derivative,
    logdet_jet,
    logdet_third_richardson,
    moments_quadrature,
    quadrature_entries,
)
from hardedge.special import LaurentPair, PrecisionError, PrecisionRequest


def catalan(k):
    return math.comb(2 * k, k) // (k + 1)


def test_odd_moments_are_catalan_numbers():
    mu = exact_moments("odd", 20)
    for n, v in enumerate(mu):
        if n % 2:
            assert v == 0
        else:
            k = n // 2
            assert v == Fraction(catalan(k), 2 * 4**k)


@pytest.mark.parametrize("parity", ["odd", "even"])
def test_moments_match_quadrature_at_zero(parity):
    exact = np.array([float(v) for v in exact_moments(parity, 15)])
    quad = quadrature_entries(parity, 0.0, 15)
    np.testing.assert_allclose(quad, exact, rtol=1e-12, atol=1e-15)


def test_entry_table_shape_and_errors():
    tab = entry_table("odd", 2)
    assert len(tab) == 3
    assert tab[2] == LaurentPair.from_dicts({-2: -3}, {-1: 1, -3: 6})
    with pytest.raises(ValueError):
        entry_table("odd", -1)
    with pytest.raises(ValueError):
        entry_table("none", 2)


@pytest.mark.parametrize("parity", ["odd", "even"])
@pytest.mark.parametrize("s", [0.5, 3.0, 12.0, -4.0])
def test_entries_match_quadrature(parity, s):
    with mp.workprec(200):
        values = [float(v) for v in entry_values(parity, s, 14)]
    quad = quadrature_entries(parity, s, 15)
    np.testing.assert_allclose(values, quad, rtol=1e-10)


def test_entries_continuous_at_zero():
    with mp.workprec(200):
        at0 = entry_values("odd", 0, 6)
        near = entry_values("odd", 1e-12, 6)
    for a, b in zip(at0, near):
        assert abs(a - b) < 1e-10


def test_problem_validation():
    with pytest.raises(ValueError):
        HankelProblem("odd", -1, 1.0)
    with pytest.raises(ValueError):
        HankelProblem("odd", 1.5, 1.0)
    with pytest.raises(ValueError):
        HankelProblem("odd", 1, float("nan"))


def test_small_determinants():
    assert det_adaptive(HankelProblem("odd", 0, 3.0)).value == 1
    r = det_adaptive(HankelProblem("even", 1, 2.0))
    with mp.workprec(r.achieved_precision):
        assert abs(r.value - (mp.besseli(0, 2) + mp.besseli(1, 2))) < mp.mpf(10) ** -40
    assert r.estimated_relative_error <= 1e-40


@pytest.mark.parametrize("parity", ["odd", "even"])
def test_large_argument_determinant_is_stable(parity):
    problem = HankelProblem(parity, 8, 40.0)
    a = det_adaptive(problem)
    b = det_adaptive(HankelProblem(parity, 8, 40.0, PrecisionRequest(2 * a.achieved_precision, 1e-40)))
    assert a.value > 0
    with mp.workprec(b.achieved_precision):
        assert abs(a.value - b.value) / b.value < 1e-38


def test_determinant_matches_quadrature_gram_matrix():
    problem = HankelProblem("odd", 5, 2.0)
    G = moments_quadrature(problem)
    assert float(det_adaptive(problem).value) == pytest.approx(np.linalg.det(G), rel=1e-6)
    assert moments_quadrature(HankelProblem("odd", 0, 1.0)).shape == (0, 0)


def test_precision_cap_raises(monkeypatch):
    problem = HankelProblem("even", 4, 5.0, PrecisionRequest(64, 1e-12))
    monkeypatch.setattr(hankel, "MAX_BITS", hankel.start_bits(problem))
    with pytest.raises(PrecisionError) as info:
        det_adaptive(problem)
    assert len(info.value.candidates) == 1


@given(
    st.sampled_from(["odd", "even"]),
    st.integers(min_value=1, max_value=5),
    st.floats(min_value=-8, max_value=12).filter(lambda v: abs(v) > 0.05),
)
def test_logdet_derivatives_against_finite_differences(parity, m, s):
    prec = PrecisionRequest(192, 1e-40)
    jet = logdet_jet(HankelProblem(parity, m, s, prec), 3)
    with mp.workprec(400):
        x = mp.mpf(s)

        def logdet(t):
            return mp.log(det_adaptive(HankelProblem(parity, m, t, prec)).value)

        for k in (1, 2, 3):
            fd = mp.diff(logdet, x, k, h=mp.mpf(10) ** -8)
            assert abs(fd - jet.logdet_derivatives[k - 1]) < 1e-12 * max(1, abs(fd))


def test_logdet_derivative_order_checks():
    problem = HankelProblem("odd", 2, 1.0)
    with pytest.raises(ValueError):
        logdet_derivative(problem, 4)
    with pytest.raises(ValueError):
        logdet_jet(problem, 5)
    assert logdet_jet(HankelProblem("odd", 0, 1.0), 2).logdet_derivatives == (0, 0)


@pytest.mark.parametrize("parity,m,s", [("odd", 3, 2.0), ("even", 4, 6.5)])
def test_third_derivative_two_paths(parity, m, s):
    problem = HankelProblem(parity, m, s)
    a = logdet_derivative(problem, 3)
    b = logdet_third_richardson(problem)
    assert abs(a - b) < 1e-9 * max(1, abs(a))


def test_quadrature_rejects_bad_parity():
    with pytest.raises(ValueError):
        quadrature_entries("x", 1.0, 3)


@pytest.mark.parametrize("parity", ["odd", "even"])
@pytest.mark.parametrize("s", [0.3, -0.75, 0.99])
def test_moment_series_agrees_with_bessel_form(parity, s):
    with mp.workprec(256):
        near = hankel._taylor_entries(parity, Fraction(s), 16)
        with mp.workprec(1024):
            far = hankel._laurent_entries(parity, Fraction(s), 16)
        for a, b in zip(near, far):
            assert abs(a - b) <= mp.mpf(2) ** -240 * abs(b)


def test_determinant_near_zero_approaches_norm_constant():
    from hardedge.gap import norm_constant

    for parity in ("odd", "even"):
        c = norm_constant(parity, 4).value
        d = det_adaptive(HankelProblem(parity, 4, 1e-9)).value
        assert float(d) == pytest.approx(float(c), rel=1e-7)
