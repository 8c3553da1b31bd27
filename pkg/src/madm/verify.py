"""Numerical checks of the identities behind the stationary measure.

Every check returns a :class:`Residual` whose ``relative`` field is the
pass/fail quantity: the absolute residual divided by the largest term that
enters the cancellation.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import qcalc, steady
from .model import ModelParams, as_configuration, build_truncated_generator, site_exit_rate
from .qcalc import (DEFAULT_POLICY, Geometric, PowerSeries, Product, TruncationPolicy,
                    jackson_integral, q_derivative, q_numbers)

VERIFY_SEED = 20240531

CHECKS = ("stationarity", "master", "interchange", "ibp", "appendixB", "kernel")


@dataclass(frozen=True)
class Residual:
    value: float
    scale: float
    relative: float = field(init=False)

    def __post_init__(self):
        v, s = abs(float(self.value)), abs(float(self.scale))
        object.__setattr__(self, "scale", s)
        object.__setattr__(self, "relative", 0.0 if v == 0.0 else (v / s if s > 0 else math.inf))

    def passes(self, tol: float, min_scale: float = 0.0) -> bool:
        return self.relative < tol and (self.scale > min_scale or self.value == 0.0)


@dataclass(frozen=True)
class LambdaVector:
    lambdas: tuple

    def __post_init__(self):
        lam = tuple(float(x) for x in self.lambdas)
        if not lam:
            raise ValueError("need at least one lambda")
        if not all(0.0 < x < 1.0 for x in lam):
            raise ValueError(f"every lambda must lie in (0, 1), got {lam}")
        object.__setattr__(self, "lambdas", lam)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "LambdaVector":
        return cls(tuple(rng.uniform(0.05, 0.95, size=n)))


# ---------------------------------------------------------------------------
# pointwise stationarity
# ---------------------------------------------------------------------------

def stationarity_residual(m: Sequence[int], p: ModelParams, pol: TruncationPolicy = DEFAULT_POLICY,
                          mu: Optional[Callable[[tuple], float]] = None,
                          perturb: float = 0.0) -> Residual:
    """Balance of probability flow into and out of ``m``.

    ``mu`` defaults to the exact measure. ``perturb`` multiplies the weight
    of the empty configuration by ``1 + perturb`` (detector test).
    """
    m = as_configuration(m, p.n_sites)
    n = p.n_sites
    g = p.gamma
    a, b = p.left_fugacity, p.right_fugacity
    base = steady.evaluator(p, pol).probability if mu is None else mu
    empty = (0,) * n

    def weight(c):
        w = base(c)
        return w * (1.0 + perturb) if c == empty else w

    def shifted(i, k):
        c = list(m)
        c[i] += k
        return tuple(c)

    def moved(src, dst, k):
        c = list(m)
        c[src] -= k
        c[dst] += k
        return tuple(c)

    rate_l = qcalc.phi(0, a, g, pol)
    rate_r = qcalc.phi(0, b, g, pol)
    lhs = (sum(site_exit_rate(x, g) for x in m) + rate_l + rate_r) * weight(m)

    def extract_left(k):
        return np.array([g ** int(j) / qcalc.q_number(int(j), g) * weight(shifted(0, int(j))) for j in k])

    def extract_right(k):
        return np.array([weight(shifted(n - 1, int(j))) / qcalc.q_number(int(j), g) for j in k])

    rhs = qcalc.sum_series(extract_left, 1, pol, chunk=16)
    rhs += qcalc.sum_series(extract_right, 1, pol, chunk=16)
    for k in range(1, m[0] + 1):
        rhs += a ** k / qcalc.q_number(k, g) * weight(shifted(0, -k))
    for k in range(1, m[-1] + 1):
        rhs += b ** k / qcalc.q_number(k, g) * weight(shifted(n - 1, -k))
    for j in range(n - 1):
        # site j+1 jumps left onto j, or site j jumps right onto j+1
        for k in range(1, m[j] + 1):
            rhs += g ** k / qcalc.q_number(k, g) * weight(moved(j, j + 1, k))
        for k in range(1, m[j + 1] + 1):
            rhs += weight(moved(j + 1, j, k)) / qcalc.q_number(k, g)
    return Residual(lhs - rhs, lhs)


# ---------------------------------------------------------------------------
# generating-function (lambda-projected) identity
# ---------------------------------------------------------------------------

def _antiderivative_coeffs(lam: float, p: ModelParams, pol: TruncationPolicy) -> np.ndarray:
    """Coefficients of ``(1 - lam) F_lam(t) = sum_k t^k (1 - lam^k) / [k]``."""
    envelope = max(p.left_fugacity, p.right_fugacity)
    k = np.arange(1, qcalc.series_length(envelope, pol) + 2)
    return (1.0 - lam ** k.astype(np.float64)) / q_numbers(k, p.gamma)


def master_identity_terms(lam: LambdaVector, p: ModelParams, pol: TruncationPolicy = DEFAULT_POLICY,
                          shift: float = 0.0) -> np.ndarray:
    """The ``4 N`` nested integrals of the projected identity, signed, divided by ``b - a``.

    Row ``j`` holds the terms ``G_j(t_{j-1}), G_j(gamma t_{j+1}), -G_j(t_j),
    -G_j(gamma t_j)`` with ``G_j = (1 - lam_j)(F_{lam_j} + shift)``,
    ``t_0 = beta_l`` and ``gamma t_{N+1} = gamma beta_r``.
    """
    n = p.n_sites
    if len(lam.lambdas) != n:
        raise ValueError(f"need {n} lambdas, got {len(lam.lambdas)}")
    g = p.gamma
    a, b = p.left_fugacity, p.right_fugacity
    weights = [Product(Geometric(1.0), Geometric(x)) for x in lam.lambdas]
    out = np.zeros((n, 4))

    def integral(extra):
        fs = [Product(weights[i], extra[i]) if i in extra else weights[i] for i in range(n)]
        return qcalc.nested_jackson_reduced(fs, a, b, g, pol)

    for j, lj in enumerate(lam.lambdas):
        coeffs = _antiderivative_coeffs(lj, p, pol)
        c0 = (1.0 - lj) * shift

        def G_at(scale):
            series = PowerSeries(coeffs, scale)
            return series if c0 == 0.0 else _Shifted(series, c0)

        def G_const(x):
            return float(PowerSeries(coeffs)(np.array([x]))[0]) + c0

        # left neighbour
        if j == 0:
            out[j, 0] = G_const(a) * integral({})
        else:
            out[j, 0] = integral({j - 1: G_at(1.0)})
        # right neighbour, scaled by gamma
        if j == n - 1:
            out[j, 1] = G_const(b) * integral({})
        else:
            out[j, 1] = integral({j + 1: G_at(g)})
        out[j, 2] = -integral({j: G_at(1.0)})
        out[j, 3] = -integral({j: G_at(g)})
    return out


class _Shifted:
    """``f(t) + c``."""

    def __init__(self, f, c: float):
        self.f = f
        self.c = float(c)

    def __call__(self, t):
        return self.f(t) + self.c

    def dd(self, x, y):
        return self.f.dd(x, y)


def master_identity_residual(lam: LambdaVector, p: ModelParams, pol: TruncationPolicy = DEFAULT_POLICY,
                             shift: float = 0.0) -> Residual:
    """Projected stationarity identity; scale is the largest single nested integral.

    Each per-site group of four terms vanishes on its own, so the largest
    single group would be a vacuous scale.
    """
    terms = master_identity_terms(lam, p, pol, shift)
    return Residual(float(terms.sum()), float(np.max(np.abs(terms))))


# ---------------------------------------------------------------------------
# q-calculus lemmas
# ---------------------------------------------------------------------------

def _interchange_parts(g2: Callable, a: float, b: float, gamma: float, pol: TruncationPolicy,
                       chunk: int = 512):
    """``(lhs, rhs_double, correction)`` on the grids ``{a g^n}``, ``{gamma b g^n}``."""
    n = qcalc.grid_length(gamma, pol)
    pw = gamma ** np.arange(n, dtype=np.float64)
    A = a * pw
    B = gamma * b * pw
    w = 1.0 - gamma
    lhs = 0.0
    rhs = 0.0
    for lo in range(0, n, chunk):
        rows = slice(lo, min(lo + chunk, n))
        r = np.arange(n)[rows][:, None]
        cols = np.arange(n)[None, :]
        gBB = np.asarray(g2(B[rows][:, None], B[None, :]), dtype=np.float64) * np.ones((1, n))
        gAB = np.asarray(g2(A[rows][:, None], B[None, :]), dtype=np.float64) * np.ones((1, n))
        gAA = np.asarray(g2(A[rows][:, None], A[None, :]), dtype=np.float64) * np.ones((1, n))
        gBB_T = np.asarray(g2(B[None, :], B[rows][:, None]), dtype=np.float64) * np.ones((1, n))
        gAB_T = np.asarray(g2(A[None, :], B[rows][:, None]), dtype=np.float64) * np.ones((1, n))
        gAA_T = np.asarray(g2(A[None, :], A[rows][:, None]), dtype=np.float64) * np.ones((1, n))
        # inner integral from t to gamma b, outer variable t on row grids
        i_b = w * np.sum(np.where(cols < r, B[None, :] * gBB, 0.0), axis=1)
        i_a = w * (np.sum(B[None, :] * gAB, axis=1) - np.sum(np.where(cols >= r, A[None, :] * gAA, 0.0), axis=1))
        lhs += w * (np.dot(B[rows], i_b) - np.dot(A[rows], i_a))
        # inner integral from a to s, outer variable s on row grids
        j_b = w * (np.sum(np.where(cols >= r, B[None, :] * gBB_T, 0.0), axis=1) - np.sum(A[None, :] * gAB_T, axis=1))
        j_a = -w * np.sum(np.where(cols < r, A[None, :] * gAA_T, 0.0), axis=1)
        rhs += w * (np.dot(B[rows], j_b) - np.dot(A[rows], j_a))
    return lhs, rhs, interchange_correction(g2, a, b, gamma, pol)


def interchange_correction(g2: Callable, a: float, b: float, gamma: float,
                           pol: TruncationPolicy = DEFAULT_POLICY) -> float:
    """``(1 - gamma) int_a^{gamma b} g(s, s) s d_gamma s``."""
    return (1.0 - gamma) * jackson_integral(lambda s: g2(s, s) * s, a, gamma * b, gamma, pol)


def interchange_residual(g2: Callable, a: float, b: float, q, pol: TruncationPolicy = DEFAULT_POLICY) -> Residual:
    """Swapping the order of a nested Jackson double integral.

    ``int_a^{gb} dt int_t^{gb} ds g = int_a^{gb} ds int_a^s dt g
    - (1 - gamma) int_a^{gb} g(s, s) s ds``.
    """
    gamma = qcalc._g(q)
    lhs, rhs, corr = _interchange_parts(g2, float(a), float(b), gamma, pol)
    return Residual(lhs - (rhs - corr), max(abs(lhs), abs(rhs), abs(corr)))


def ibp_residual(G: Callable, a: float, b: float, q, pol: TruncationPolicy = DEFAULT_POLICY) -> Residual:
    """``int_a^b (G(t) + G(gamma t)) D G(t) d t = G(b)^2 - G(a)^2``."""
    gamma = qcalc._g(q)
    if a == b:
        return Residual(0.0, 0.0)

    def integrand(t):
        t = np.asarray(t, dtype=np.float64)
        return (qcalc._evaluate(G, t) + qcalc._evaluate(G, gamma * t)) * q_derivative(G, t, gamma)

    lhs = jackson_integral(integrand, a, b, gamma, pol)
    gb = float(qcalc._evaluate(G, np.array([b]))[0])
    ga = float(qcalc._evaluate(G, np.array([a]))[0])
    rhs = gb * gb - ga * ga
    return Residual(lhs - rhs, max(abs(lhs), gb * gb, ga * ga))


# ---------------------------------------------------------------------------
# one-site coefficient bookkeeping
# ---------------------------------------------------------------------------

@dataclass
class CoefficientReport:
    """Largest relative coefficient of each kind; all should vanish."""

    brute_force: float
    cases: dict
    mixed: float

    @property
    def max_residual(self) -> float:
        return max([self.brute_force, self.mixed, *self.cases.values()])


def _one_site_polynomial(m: int, deg: int, gamma: float):
    """Coefficients of the one-site balance in ``y = beta_l``, ``x = gamma beta_r``.

    Returns ``(value, magnitude)``, arrays indexed ``[power of y, power of x]``;
    ``magnitude`` sums the absolute contributions and serves as the scale.
    """
    k = np.arange(deg + 1)
    inv = np.zeros(deg + 1)
    inv[1:] = 1.0 / q_numbers(k[1:], gamma)
    both = inv * (1.0 + gamma ** k.astype(np.float64))
    both[0] = 0.0

    def mu_poly(j):
        # sum_{k>j} (x^k - y^k) / [k]
        P = np.zeros((deg + 1, deg + 1))
        if j + 1 <= deg:
            P[0, j + 1:] = inv[j + 1:]
            P[j + 1:, 0] = -inv[j + 1:]
        return P

    def reservoir():
        R = np.zeros((deg + 1, deg + 1))
        R[0, 1:] = inv[1:]
        R[1:, 0] = inv[1:]
        return R

    def mul(P, Q):
        out = np.zeros_like(P)
        for i, j in zip(*np.nonzero(P)):
            out[i:, j:] += P[i, j] * Q[: deg + 1 - i, : deg + 1 - j]
        return out

    def keep(P):
        total = np.add.outer(k, k)
        return np.where(total <= deg, P, 0.0)

    terms = []
    mu_m = mu_poly(m)
    terms.append(np.sum(both[1: m + 1]) * mu_m)
    terms.append(keep(mul(reservoir(), mu_m)))
    for j in range(1, deg + 1):
        terms.append(-both[j] * mu_poly(m + j))
    for j in range(1, m + 1):
        inj = np.zeros((deg + 1, deg + 1))
        inj[0, j] = inv[j]
        inj[j, 0] = inv[j]
        terms.append(-keep(mul(inj, mu_poly(m - j))))
    value = np.sum(terms, axis=0)
    magnitude = np.sum(np.abs(terms), axis=0)
    return value, magnitude


def _case_parts(m: int, p: int, gamma: float):
    """Four contributions to the single-fugacity coefficient of ``beta**p``."""
    def qn(j):
        return qcalc.q_number(j, gamma)

    both = [0.0] + [(1.0 + gamma ** j) / qn(j) for j in range(1, p + 1)]
    A = sum(both[1: m + 1]) / qn(p) if p >= m + 1 else 0.0
    B = sum(1.0 / (qn(j) * qn(p - j)) for j in range(1, p - m))
    C = -sum(both[j] for j in range(1, p - m)) / qn(p)
    D = -sum(1.0 / (qn(j) * qn(p - j)) for j in range(1, min(m, p - 1) + 1)) if p >= m + 1 else 0.0
    return A, B, C, D


def _case_closed_form(m: int, p: int, gamma: float) -> float:
    def qn(j):
        return qcalc.q_number(j, gamma)

    if p == m + 1:
        ks = range(1, m + 1)
    elif m + 2 <= p <= 2 * m:
        ks = range(p - m, m + 1)
    elif p == 2 * m + 1:
        return 0.0
    else:
        ks = range(m + 1, p - m)
    return sum(1.0 / qn(j) - 1.0 / qn(p - j) for j in ks) / qn(p)


def case_label(m: int, p: int) -> str:
    if p == m + 1:
        return "p=m+1"
    if m + 2 <= p <= 2 * m:
        return "m+2<=p<=2m"
    if p == 2 * m + 1:
        return "p=2m+1"
    return "p>=2m+2"


def n1_coefficient_cancellation(p_max: int, q, pol: TruncationPolicy = DEFAULT_POLICY,
                                m_max: int = 3) -> CoefficientReport:
    """One-site balance, coefficient by coefficient, for ``m <= m_max``.

    Three independent views: the brute-force truncated double power series
    of the balance; the four-term single-fugacity sums grouped by case,
    together with their closed forms; the antisymmetric mixed double sums.
    """
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    gamma = qcalc._g(q)
    brute = 0.0
    cases = {"p=m+1": 0.0, "m+2<=p<=2m": 0.0, "p=2m+1": 0.0, "p>=2m+2": 0.0}
    mixed = 0.0
    for m in range(m_max + 1):
        value, magnitude = _one_site_polynomial(m, p_max, gamma)
        scale = np.where(magnitude > 0, magnitude, 1.0)
        brute = max(brute, float(np.max(np.abs(value) / scale)))
        for p in range(m + 1, p_max + 1):
            parts = _case_parts(m, p, gamma)
            s = max(abs(x) for x in parts)
            closed = _case_closed_form(m, p, gamma)
            label = case_label(m, p)
            if s == 0.0:
                # m = 0, p = 1: every sum is empty
                continue
            r = max(abs(sum(parts)), abs(closed), abs(sum(parts) - closed)) / s
            cases[label] = max(cases[label], r)
        # mixed sums: full square and the finite triangle, both antisymmetric
        inv = 1.0 / q_numbers(np.arange(1, p_max + 1), gamma)
        square = np.outer(inv, inv)
        anti = square - square.T
        tri = np.zeros_like(anti)
        for l in range(1, m + 1):
            for k in range(1, m - l + 1):
                tri[k - 1, l - 1] += inv[k - 1] * inv[l - 1]
                tri[l - 1, k - 1] -= inv[k - 1] * inv[l - 1]
        mixed = max(mixed, float(np.max(np.abs(anti + tri))) / float(np.max(square)))
    return CoefficientReport(brute, cases, mixed)


# ---------------------------------------------------------------------------
# truncated master equation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelCheck:
    residual: Residual
    leak: float
    l1: float
    m_cap: int

    @property
    def explained(self) -> bool:
        return self.residual.value <= self.leak * (1.0 + 1e-9) + 1e-300


def kernel_check(p: ModelParams, m_cap: int, pol: TruncationPolicy = DEFAULT_POLICY) -> KernelCheck:
    """Exact measure restricted to ``{m_i <= m_cap}`` against the truncated rate matrix.

    Inside the box the residual ``Q mu`` is minus the inflow from states
    outside it, so its l1 norm equals ``sum_s lost(s) mu(s)``, the leak bound.
    """
    Q, lost, states = build_truncated_generator(p, m_cap, pol)
    ev = steady.evaluator(p, pol)
    mu = np.array([ev.probability(tuple(s)) for s in states])
    r = Q @ mu
    diag = np.abs(Q.diagonal()) * mu
    leak = float(np.dot(lost, mu))
    return KernelCheck(Residual(float(np.max(np.abs(r))), float(np.max(diag))), leak,
                       float(np.sum(np.abs(r))), m_cap)


# ---------------------------------------------------------------------------
# battery
# ---------------------------------------------------------------------------

PARAM_GRID = tuple(itertools.product((0.3, 0.6, 0.9), ((0.2, 0.4), (0.5, 0.5), (0.7, 0.3))))


def _interchange_integrands():
    return [
        ("one", lambda t, s: np.ones(np.broadcast(t, s).shape), 0.1, 0.4, 0.5),
        ("t*s", lambda t, s: t * s, 0.1, 0.4, 0.5),
        ("t*s", lambda t, s: t * s, 0.1, 0.8, 0.7),
        ("t^2+s", lambda t, s: t ** 2 + s, 0.05, 0.6, 0.3),
        ("1/((1-t)(1-s))", lambda t, s: 1.0 / ((1 - t) * (1 - s)), 0.2, 0.7, 0.5),
        ("1/((1-t)(1-s))", lambda t, s: 1.0 / ((1 - t) * (1 - s)), 0.1, 0.9, 0.8),
        ("exp(t-s)", lambda t, s: np.exp(t - s), 0.3, 0.7, 0.6),
        ("s^3/(1-t)", lambda t, s: s ** 3 / (1 - t), 0.1, 0.5, 0.9),
        ("cos(t s)", lambda t, s: np.cos(t * s), 0.2, 0.95, 0.4),
        ("t/(1-0.5s)", lambda t, s: t / (1 - 0.5 * s), 0.0, 0.6, 0.5),
    ]


def _ibp_functions():
    return [
        ("t", lambda t: t, 0.1, 0.5, 0.5),
        ("1/(1-t)", lambda t: 1.0 / (1.0 - t), 0.1, 0.5, 0.5),
        ("1/(1-t)", lambda t: 1.0 / (1.0 - t), 0.0, 0.9, 0.9),
        ("t^3-t", lambda t: t ** 3 - t, 0.2, 0.8, 0.3),
        ("exp(t)", np.exp, 0.05, 0.7, 0.6),
        ("log(1+t)", np.log1p, 0.1, 0.9, 0.7),
        ("sin(3t)", lambda t: np.sin(3 * t), 0.2, 1.0, 0.4),
        ("1/(1-0.5t)^2", lambda t: 1.0 / (1.0 - 0.5 * t) ** 2, 0.3, 1.5, 0.8),
        ("sqrt(1+t)", lambda t: np.sqrt(1 + t), 0.5, 2.0, 0.5),
        ("t^7", lambda t: t ** 7, 0.1, 0.9, 0.95),
    ]


def _record(check: str, inputs: dict, res: Residual, tol: Optional[float], passed: Optional[bool] = None, **extra) -> dict:
    rec = {"check": check, "inputs": inputs, "residual": res.value, "scale": res.scale,
           "relative": res.relative, "tolerance": tol,
           "passed": bool(res.passes(tol) if passed is None else passed)}
    rec.update(extra)
    return rec


def _params_dict(p: ModelParams) -> dict:
    return {"gamma": p.gamma, "beta_l": p.beta_l, "beta_r": p.beta_r, "n_sites": p.n_sites}


def run_stationarity(p: ModelParams, pol: TruncationPolicy, m_max: int = 3, perturb: float = 0.0,
                     tol: float = 1e-8) -> list:
    out = []
    for m in itertools.product(range(m_max + 1), repeat=p.n_sites):
        res = stationarity_residual(m, p, pol, perturb=perturb)
        out.append(_record("stationarity", {**_params_dict(p), "m": list(m)}, res, tol))
    return out


def run_master(p: ModelParams, pol: TruncationPolicy, n_lambda: int = 20, seed: int = VERIFY_SEED,
               tol: float = 1e-8) -> list:
    rng = np.random.default_rng([seed, p.n_sites])
    out = []
    for _ in range(n_lambda):
        lam = LambdaVector.random(p.n_sites, rng)
        res = master_identity_residual(lam, p, pol)
        out.append(_record("master", {**_params_dict(p), "lambdas": list(lam.lambdas)}, res, tol))
    return out


def run_interchange(pol: TruncationPolicy, tol: float = 1e-10) -> list:
    out = []
    for name, g2, a, b, gamma in _interchange_integrands():
        res = interchange_residual(g2, a, b, gamma, pol)
        out.append(_record("interchange", {"g": name, "a": a, "b": b, "gamma": gamma}, res, tol))
    return out


def run_ibp(pol: TruncationPolicy, tol: float = 1e-11) -> list:
    out = []
    for name, G, a, b, gamma in _ibp_functions():
        res = ibp_residual(G, a, b, gamma, pol)
        out.append(_record("ibp", {"G": name, "a": a, "b": b, "gamma": gamma}, res, tol))
    return out


def run_appendix_b(pol: TruncationPolicy, gammas=(0.3, 0.5, 0.9), p_max: int = 12, tol: float = 1e-12) -> list:
    out = []
    for gamma in gammas:
        rep = n1_coefficient_cancellation(p_max, gamma, pol)
        res = Residual(rep.max_residual, 1.0)
        out.append(_record("appendixB", {"gamma": gamma, "p_max": p_max, "m_max": 3}, res, tol,
                           cases=rep.cases, brute_force=rep.brute_force, mixed=rep.mixed))
    return out


def run_kernel(p: ModelParams, pol: TruncationPolicy, caps=(2, 4, 6, 8)) -> list:
    out = []
    prev = math.inf
    for cap in caps:
        kc = kernel_check(p, cap, pol)
        ok = kc.explained and kc.residual.value < prev
        prev = kc.residual.value
        out.append(_record("kernel", {**_params_dict(p), "m_cap": cap}, kc.residual, None, passed=ok,
                           leak=kc.leak, l1=kc.l1))
    return out


def run_battery(p: ModelParams, pol: TruncationPolicy = DEFAULT_POLICY, checks: Sequence[str] = CHECKS,
                threads: int = 1, perturb: float = 0.0) -> list:
    """Deterministic verification report for ``p``: one record per check instance."""
    unknown = set(checks) - set(CHECKS)
    if unknown:
        raise ValueError(f"unknown checks: {sorted(unknown)}")
    jobs = []
    if "stationarity" in checks:
        jobs.append(lambda: run_stationarity(p, pol, m_max=3 if p.n_sites <= 2 else 2, perturb=perturb))
    if "master" in checks:
        jobs.append(lambda: run_master(p, pol))
    if "interchange" in checks:
        jobs.append(lambda: run_interchange(pol))
    if "ibp" in checks:
        jobs.append(lambda: run_ibp(pol))
    if "appendixB" in checks:
        jobs.append(lambda: run_appendix_b(pol))
    if "kernel" in checks:
        if p.n_sites <= 3:
            jobs.append(lambda: run_kernel(p, pol, caps=(2, 4, 6, 8) if p.n_sites <= 2 else (2, 4, 6)))
    records = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for recs in pool.map(lambda job: job(), jobs):
                records.extend(recs)
    else:
        for job in jobs:
            records.extend(job())
    return records
