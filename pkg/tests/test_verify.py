import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from madm import steady, verify
from madm.model import ModelParams
from madm.qcalc import TruncationPolicy, q_number
from madm.verify import LambdaVector, Residual

DEFAULT = ModelParams(0.5, 0.2, 0.4, 2)


def test_residual_relative_and_pass():
    r = Residual(-1e-12, -2.0)
    assert r.scale == 2.0 and r.relative == pytest.approx(5e-13)
    assert r.passes(1e-8) and r.passes(1e-8, min_scale=1e-6)
    assert not Residual(1e-12, 1e-9).passes(1e-8, min_scale=1e-6)
    assert Residual(0.0, 0.0).relative == 0.0
    assert Residual(1.0, 0.0).relative == math.inf


def test_lambda_vector_validation():
    with pytest.raises(ValueError):
        LambdaVector(())
    with pytest.raises(ValueError):
        LambdaVector((0.5, 1.0))
    lam = LambdaVector.random(3, np.random.default_rng(0))
    assert len(lam.lambdas) == 3 and all(0.05 <= x <= 0.95 for x in lam.lambdas)


# stationarity

def test_stationarity_n1_example():
    r = verify.stationarity_residual((3,), ModelParams(0.5, 0.2, 0.8, 1))
    assert r.relative < 1e-8 and r.scale > 1e-6


def test_stationarity_detects_perturbation():
    r = verify.stationarity_residual((0, 0), DEFAULT, perturb=0.01)
    assert r.relative > 1e-4
    # neighbours of the empty state see it through their inflow
    assert verify.stationarity_residual((1, 0), DEFAULT, perturb=0.01).relative > 1e-4


@pytest.mark.parametrize("n", [1, 2, 3])
def test_stationarity_with_geometric_measure(n):
    beta = 0.4
    p = ModelParams(0.6, beta, beta, n)
    mu = lambda m: steady.equilibrium_probability(m, beta)
    for m in [(0,) * n, (1,) * n, tuple(range(n)), (3,) + (0,) * (n - 1)]:
        assert verify.stationarity_residual(m, p, mu=mu).relative < 1e-10


def test_stationarity_wrong_geometric_fails():
    p = ModelParams(0.6, 0.3, 0.5, 1)
    mu = lambda m: steady.equilibrium_probability(m, 0.3)
    assert verify.stationarity_residual((1,), p, mu=mu).relative > 1e-3


# projected identity

@pytest.mark.parametrize("lam", [0.1, 0.5, 0.93])
def test_master_identity_one_site(lam):
    r = verify.master_identity_residual(LambdaVector((lam,)), ModelParams(0.5, 0.2, 0.4, 1))
    assert r.relative < 1e-9


def test_master_identity_two_sites():
    r = verify.master_identity_residual(LambdaVector((0.3, 0.7)), DEFAULT)
    assert r.relative < 1e-8
    terms = verify.master_identity_terms(LambdaVector((0.3, 0.7)), DEFAULT)
    assert terms.shape == (2, 4)
    assert r.scale == pytest.approx(np.max(np.abs(terms)))


@pytest.mark.parametrize("shift", [0.5, -3.0, 10.0])
def test_master_identity_independent_of_constant(shift):
    lam = LambdaVector((0.3, 0.7))
    base = verify.master_identity_residual(lam, DEFAULT)
    moved = verify.master_identity_residual(lam, DEFAULT, shift=shift)
    assert moved.relative < 1e-8
    assert abs(moved.value - base.value) < 1e-8 * max(moved.scale, base.scale)


def test_master_identity_terms_vanish_linearly_as_lambda_to_one():
    p = ModelParams(0.5, 0.2, 0.4, 1)
    s = [np.max(np.abs(verify.master_identity_terms(LambdaVector((1 - e,)), p))) for e in (1e-2, 1e-3, 1e-4)]
    assert s[0] / s[1] == pytest.approx(10, rel=0.05)
    assert s[1] / s[2] == pytest.approx(10, rel=0.05)


def test_master_identity_wrong_length():
    with pytest.raises(ValueError):
        verify.master_identity_terms(LambdaVector((0.5,)), DEFAULT)


# interchange and integration by parts

def test_interchange_constant_closed_form():
    a, b, g = 0.1, 0.4, 0.5
    c = g * b
    lhs, rhs, corr = verify._interchange_parts(lambda t, s: np.ones(np.broadcast(t, s).shape), a, b, g,
                                               verify.DEFAULT_POLICY)
    assert lhs == pytest.approx(c * (c - a) - (c * c - a * a) / (1 + g), rel=1e-13)
    assert corr == pytest.approx((1 - g) * (c * c - a * a) / (1 + g), rel=1e-13)
    assert verify.interchange_residual(lambda t, s: np.ones(np.broadcast(t, s).shape), a, b, g).relative < 1e-12


def test_interchange_product_against_closed_form():
    # int_a^c t dt int_t^c s ds with int_0^x t^j = x^(j+1)/[j+1]
    a, b, g = 0.1, 0.4, 0.5
    c = g * b
    exact = (c * c * (c * c - a * a) / q_number(2, g) - (c ** 4 - a ** 4) / q_number(4, g)) / q_number(2, g)
    lhs, _, _ = verify._interchange_parts(lambda t, s: t * s, a, b, g, verify.DEFAULT_POLICY)
    assert lhs == pytest.approx(exact, rel=1e-13)
    assert verify.interchange_residual(lambda t, s: t * s, a, b, g).relative < 1e-11


def test_interchange_degenerate_range():
    # gamma * b == a leaves an empty range
    r = verify.interchange_residual(lambda t, s: t * s, 0.2, 0.4, 0.5)
    assert r.value == 0.0 and r.relative == 0.0


def test_interchange_correction_bound_near_one():
    g2 = lambda t, s: t * s
    a, b, g = 0.1, 0.5, 0.999
    pol = TruncationPolicy(max_terms=100_000)
    corr = verify.interchange_correction(g2, a, b, g, pol)
    bound = (g * b) ** 2 * (g * b) ** 2
    assert 0 < corr <= (1 - g) * bound


def test_ibp_examples():
    assert verify.ibp_residual(lambda t: t, 0.1, 0.5, 0.5).relative < 1e-13
    assert verify.ibp_residual(lambda t: 1 / (1 - t), 0.1, 0.5, 0.5).relative < 1e-11
    r = verify.ibp_residual(lambda t: 1 / (1 - t), 0.3, 0.3, 0.5)
    assert r.value == 0.0 and r.relative == 0.0


# subnormal endpoints put grid points at 0, where the q-derivative is undefined
@given(st.just(0.0) | st.floats(1e-3, 0.8), st.floats(0.05, 0.9), st.floats(0.1, 0.95),
       st.lists(st.floats(-2, 2), min_size=1, max_size=5))
def test_ibp_polynomials(a, width, g, coeffs):
    G = np.polynomial.Polynomial(coeffs)
    r = verify.ibp_residual(G, a, a + width, g)
    assert r.relative < 1e-11 or r.scale < 1e-12


# one-site coefficients

@pytest.mark.parametrize("m", range(0, 7))
@pytest.mark.parametrize("g", [0.3, 0.9])
def test_symmetric_case_cancels(m, g):
    terms = [1 / q_number(k, g) - 1 / q_number(m + 1 - k, g) for k in range(1, m + 1)]
    assert math.fsum(terms) == 0.0
    assert verify._case_closed_form(m, m + 1, g) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("m,p", [(1, 3), (2, 5), (3, 7)])
def test_odd_power_case_cancels(m, p):
    parts = verify._case_parts(m, p, 0.5)
    assert verify.case_label(m, p) == "p=2m+1"
    assert abs(sum(parts)) < 1e-15 * max(map(abs, parts))


def test_case_labels():
    assert verify.case_label(2, 3) == "p=m+1"
    assert verify.case_label(3, 5) == "m+2<=p<=2m"
    assert verify.case_label(1, 4) == "p>=2m+2"


@pytest.mark.parametrize("g", [0.3, 0.5, 0.9])
def test_coefficient_cancellation_report(g):
    rep = verify.n1_coefficient_cancellation(12, g)
    assert set(rep.cases) == {"p=m+1", "m+2<=p<=2m", "p=2m+1", "p>=2m+2"}
    assert rep.max_residual < 1e-12
    with pytest.raises(ValueError):
        verify.n1_coefficient_cancellation(0, g)


# truncated generator

def test_kernel_single_state_equals_leak():
    kc = verify.kernel_check(ModelParams(0.5, 0.2, 0.4, 1), 0)
    assert kc.residual.value == pytest.approx(kc.leak, rel=1e-12)
    assert kc.explained


def test_kernel_residual_decreases_within_leak():
    prev = math.inf
    for cap in (2, 4, 6, 8):
        kc = verify.kernel_check(DEFAULT, cap)
        assert kc.explained and kc.residual.value < prev
        assert kc.l1 == pytest.approx(kc.leak, rel=1e-9)
        prev = kc.residual.value


@pytest.mark.parametrize("cap", [2, 3, 5])
def test_kernel_equilibrium(cap):
    kc = verify.kernel_check(ModelParams(0.6, 0.3, 0.3, 2), cap)
    assert kc.explained


# battery

def test_battery_records_are_json():
    recs = verify.run_battery(ModelParams(0.5, 0.2, 0.4, 1), checks=("ibp", "kernel", "appendixB"))
    text = json.dumps(recs)
    back = json.loads(text)
    assert {r["check"] for r in back} == {"ibp", "kernel", "appendixB"}
    for r in back:
        assert {"check", "inputs", "residual", "scale", "relative", "tolerance", "passed"} <= set(r)
        assert r["passed"] is True
    assert sum(r["check"] == "ibp" for r in back) == 10


def test_battery_deterministic_and_threaded():
    p = ModelParams(0.5, 0.2, 0.4, 1)
    a = verify.run_battery(p, checks=("master", "interchange"))
    b = verify.run_battery(p, checks=("master", "interchange"), threads=2)
    assert a == b
    assert sum(r["check"] == "master" for r in a) == 20
    assert all(r["passed"] for r in a)


def test_battery_rejects_unknown_check():
    with pytest.raises(ValueError):
        verify.run_battery(DEFAULT, checks=("nope",))


def test_battery_perturbed_fails():
    recs = verify.run_battery(ModelParams(0.5, 0.2, 0.4, 1), checks=("stationarity",), perturb=1e-2)
    assert not all(r["passed"] for r in recs)
