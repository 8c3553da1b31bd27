import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from madm import qcalc
from madm.errors import ConvergenceError
from madm.qcalc import (Constant, Geometric, PowerFactor, PowerSeries, Product, QParam,
                        TruncationPolicy, jackson_integral, jackson_integral_zero, phi, phi_table,
                        q_derivative, q_number)

gammas = st.floats(0.05, 0.95)


def test_qparam_rejects_out_of_range():
    for g in (0.0, 1.0, -0.2, 1.3):
        with pytest.raises(ValueError):
            QParam(g)


def test_policy_validation():
    with pytest.raises(ValueError):
        TruncationPolicy(rel_tol=0.0)
    with pytest.raises(ValueError):
        TruncationPolicy(max_terms=0)


def test_q_number_examples():
    assert q_number(0, 0.5) == 0.0
    assert q_number(1, 0.3) == 1.0
    assert q_number(2, 0.5) == 1.5
    # large k saturates at 1/(1-gamma)
    assert q_number(10_000, 0.5) == 2.0


@given(gammas, st.integers(1, 40), st.integers(1, 40))
def test_q_number_addition(g, j, k):
    # [j + k] = [j] + gamma^j [k]
    assert q_number(j + k, g) == pytest.approx(q_number(j, g) + g ** j * q_number(k, g), rel=1e-13)


@given(st.integers(1, 30))
def test_q_number_rational_limit(k):
    assert q_number(k, 1 - 1e-9) == pytest.approx(k, rel=1e-6)


def test_q_derivative_of_cube():
    # D t^3 = [3] x^2; at x = 0.5, gamma = 0.5: 1.75 * 0.25
    assert q_derivative(lambda t: t ** 3, 0.5, 0.5) == pytest.approx(0.4375, rel=1e-15)


def test_q_derivative_undefined_at_zero():
    with pytest.raises(ValueError):
        q_derivative(lambda t: t, 0.0, 0.5)


def test_jackson_integral_of_identity():
    # int_0^a t = a^2 / [2]
    assert jackson_integral_zero(lambda t: t, 0.5, 0.5) == pytest.approx(0.25 / 1.5, rel=1e-14)


def test_jackson_integral_empty_range():
    assert jackson_integral(lambda t: 1.0 / (1.0 - t), 0.3, 0.3, 0.5) == 0.0


def test_jackson_integral_scalar_only_integrand():
    def f(t):
        return math.exp(t)  # rejects arrays

    vec = jackson_integral(np.exp, 0.1, 0.7, 0.6)
    assert jackson_integral(f, 0.1, 0.7, 0.6) == pytest.approx(vec, rel=1e-14)


@given(gammas, st.floats(0.05, 0.9), st.floats(0.05, 0.9))
def test_antiderivative_relation(g, a, b):
    # int_a^b D G = G(b) - G(a) for G(t) = 1/(1-t)
    G = lambda t: 1.0 / (1.0 - t)
    val = jackson_integral(lambda t: q_derivative(G, t, g), a, b, g)
    assert val == pytest.approx(G(b) - G(a), rel=1e-11, abs=1e-13)


@given(gammas, st.floats(0.01, 0.9), st.integers(0, 30))
def test_phi_matches_jackson_form(g, beta, m):
    # sum_{k>m} beta^k / [k] = int_0^beta t^m / (1 - t)
    jack = jackson_integral_zero(lambda t: t ** m / (1.0 - t), beta, g)
    assert phi(m, beta, g) == pytest.approx(jack, rel=1e-12, abs=1e-300)


def test_phi_table_matches_phi():
    tab = phi_table(0.6, 0.7, 25)
    for m in (0, 3, 25):
        assert tab[m] == pytest.approx(phi(m, 0.6, 0.7), rel=1e-13)


def test_sum_series_reports_non_convergence():
    with pytest.raises(ConvergenceError):
        qcalc.sum_series(lambda n: 1.0 / (n + 1.0), 0, TruncationPolicy(max_terms=500))


def test_grid_length_cap():
    with pytest.raises(ConvergenceError):
        qcalc.grid_length(0.999, TruncationPolicy())
    assert qcalc.grid_length(0.999, TruncationPolicy(max_terms=100_000)) > 30_000


factors = [PowerFactor(0, 2), PowerFactor(3, 1), PowerFactor(1, 3), PowerFactor(5, 0), Geometric(0.7),
           PowerSeries([0.5, -1.0, 0.25], 0.8), Constant(2.0),
           Product(Geometric(1.0), Geometric(0.4), PowerSeries([1.0, 2.0]))]


@pytest.mark.parametrize("h", factors, ids=lambda h: type(h).__name__)
@given(x=st.floats(0.0, 0.9), y=st.floats(0.0, 0.9))
def test_factor_divided_difference(h, x, y):
    dd = float(h.dd(np.array([x]), np.array([y]))[0])
    if abs(x - y) > 1e-3:
        fd = (float(h(np.array([x]))[0]) - float(h(np.array([y]))[0])) / (x - y)
        assert dd == pytest.approx(fd, rel=1e-9, abs=1e-12)
    # symmetric in its two arguments
    assert dd == pytest.approx(float(h.dd(np.array([y]), np.array([x]))[0]), rel=1e-12, abs=1e-14)


def test_nested_single_level_is_jackson_integral():
    f = lambda t: t ** 2 / (1.0 - t)
    ref = jackson_integral(f, 0.15, 0.45, 0.6)
    assert qcalc.nested_jackson([f], 0.15, 0.45, 0.6) == pytest.approx(ref, rel=1e-13)


def test_nested_two_levels_against_literal_double_sum():
    g, a, b = 0.5, 0.1, 0.35
    f1 = lambda t: 1.0 / (1.0 - t)
    f2 = lambda t: t / (1.0 - t)
    inner = lambda t: jackson_integral(f2, t, b, g)
    ref = jackson_integral(lambda t: f1(t) * inner(t), a, b, g)
    assert qcalc.nested_jackson([f1, f2], a, b, g) == pytest.approx(ref, rel=1e-12)


def test_reduced_form_is_finite_at_confluence():
    # a == b: the limit of int/(b-a) for N = 1 is sum_k k b^(k-1) / [k]
    g, b = 0.5, 0.3
    ref = sum(k * b ** (k - 1) / q_number(k, g) for k in range(1, 200))
    assert qcalc.nested_jackson_reduced([PowerFactor(0, 1)], b, b, g) == pytest.approx(ref, rel=1e-13)
    assert qcalc.nested_jackson([PowerFactor(0, 1)], b, b, g) == 0.0


def test_reduced_form_needs_dd_at_confluence():
    with pytest.raises(ValueError):
        qcalc.nested_jackson_reduced([lambda t: t], 0.3, 0.3, 0.5)
