"""Exact stationary measure of the boundary-driven MADM.

The unnormalised weight of ``m = (m_1, ..., m_N)`` is the nested Jackson
integral

    w(m) = int_{beta_l}^{gamma beta_r} dt_1 int_{t_1}^{gamma beta_r} dt_2 ...
           prod_i t_i**m_i / (1 - t_i)

and ``mu(m) = w(m) / c_N`` with ``c_N = sum_m w(m)``. Every integral here
runs from ``a = beta_l`` up to ``b = gamma * beta_r``, so both ``w`` and
``c_N`` carry an overall factor ``(b - a)``. Internally everything is computed
in the *reduced* form ``w / (b - a)``. It has no cancellation for ``a ~ b``,
keeps a fixed sign, and stays finite at ``a == b``, where ``w`` and ``c_N``
both vanish but ``mu`` does not.

Two independent algorithms evaluate the reduced weight:

* the geometric-grid expansion of the nested integral (:meth:`grid_reduced`);
* site peeling, ``w_N(.., m_{N-1}, m_N) = w_{N-1}(.., m_{N-1}) phi_{m_N}(b)
  - sum_{k > m_N} w_{N-1}(.., m_{N-1} + k) / [k]`` (:meth:`reduced`).
"""
from __future__ import annotations

import functools
import threading
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from . import _kernels, qcalc
from .model import ModelParams, as_configuration
from .qcalc import DEFAULT_POLICY, PowerFactor, TruncationPolicy


def divided_powers(a: float, b: float, k_max: int) -> np.ndarray:
    """``e_k = (b**k - a**k) / (b - a)`` for ``k = 1..k_max`` (``k b**(k-1)`` at ``a == b``)."""
    # e_{k+1} = b e_k + a^k, all terms positive
    x = a ** np.arange(k_max, dtype=np.float64)
    return lfilter([1.0], [1.0, -b], x)


class SteadyStateEvaluator:
    """Stationary measure for one parameter set.

    Read-only after construction apart from its memo tables, which are
    filled under a lock; instances may be shared between threads.
    """

    def __init__(self, params: ModelParams, pol: TruncationPolicy = DEFAULT_POLICY):
        self.params = params
        self.pol = pol
        self.a = params.left_fugacity
        self.b = params.right_fugacity
        self.gamma = params.gamma
        self.envelope = max(self.a, self.b)
        self.k_tail = qcalc.series_length(self.envelope, pol)
        self._lock = threading.RLock()
        self._rows: dict[tuple, np.ndarray] = {}
        self._phi_b = np.zeros(0)
        self._grid_cache: dict[tuple, tuple] = {}
        self._norm_reduced = None

    # -- site-peeling recursion ------------------------------------------------

    def _phi_upper(self, length: int) -> np.ndarray:
        if self._phi_b.shape[0] < length:
            self._phi_b = qcalc.phi_table(self.b, self.gamma, max(length, 2 * self._phi_b.shape[0]) - 1, self.pol)
        return self._phi_b

    def _row(self, prefix: tuple, length: int) -> np.ndarray:
        """Reduced weights ``(prefix, x)`` for ``x = 0..length-1`` (at least)."""
        row = self._rows.get(prefix)
        if row is not None and row.shape[0] >= length:
            return row
        with self._lock:
            row = self._rows.get(prefix)
            if row is not None and row.shape[0] >= length:
                return row
            if row is not None:
                length = max(length, 2 * row.shape[0])
            length = max(length, 16)
            g = self.gamma
            if not prefix:
                k_max = length + self.k_tail
                terms = divided_powers(self.a, self.b, k_max) / qcalc.q_numbers(np.arange(1, k_max + 1), g)
                row = np.cumsum(terms[::-1])[::-1][:length]
            else:
                y = prefix[-1]
                v = self._row(prefix[:-1], y + length + self.k_tail)
                s = np.arange(y + 1, v.shape[0])
                u = v[y + 1:] / qcalc.q_numbers(s - y, g)
                suffix = np.cumsum(u[::-1])[::-1]
                row = v[y] * self._phi_upper(length)[:length] - suffix[:length]
            row = np.ascontiguousarray(row)
            self._rows[prefix] = row
            return row

    def reduced(self, m: Sequence[int]) -> float:
        """``w(m) / (b - a)`` by site peeling."""
        m = as_configuration(m, self.params.n_sites)
        return float(self._row(m[:-1], m[-1] + 1)[m[-1]])

    def unnormalized(self, m: Sequence[int]) -> float:
        return (self.b - self.a) * self.reduced(m)

    # -- geometric grid ---------------------------------------------------------

    def _factor_arrays(self, m: int, p: int):
        key = (m, p)
        hit = self._grid_cache.get(key)
        if hit is None:
            n = qcalc.grid_length(self.gamma, self.pol)
            pw = self.gamma ** np.arange(n, dtype=np.float64)
            za, zb = self.a * pw, self.b * pw
            h = PowerFactor(m, p)
            hit = (h(za), h(zb), h.dd(za, zb))
            with self._lock:
                self._grid_cache[key] = hit
        return hit

    def _nested(self, factors: Sequence[tuple[int, int]]) -> float:
        arrays = [self._factor_arrays(m, p) for m, p in factors]
        Ha = np.array([x[0] for x in arrays])
        Hb = np.array([x[1] for x in arrays])
        Hdd = np.array([x[2] for x in arrays])
        return float(_kernels.nested_grid(Ha, Hb, Hdd, self.a, self.b, self.gamma))

    def grid_reduced(self, m: Sequence[int]) -> float:
        """``w(m) / (b - a)`` from the geometric-grid expansion."""
        m = as_configuration(m, self.params.n_sites)
        return self._nested([(mi, 1) for mi in m])

    def grid_unnormalized(self, m: Sequence[int]) -> float:
        return (self.b - self.a) * self.grid_reduced(m)

    # -- normalised quantities ----------------------------------------------------

    def normalization_reduced(self) -> float:
        """``c_N / (b - a)``: the nested integral of ``prod 1/(1 - t_i)**2``."""
        if self._norm_reduced is None:
            self._norm_reduced = self._nested([(0, 2)] * self.params.n_sites)
        return self._norm_reduced

    def normalization(self) -> float:
        return (self.b - self.a) * self.normalization_reduced()

    def probability(self, m: Sequence[int]) -> float:
        return self.reduced(m) / self.normalization_reduced()

    def _site_factors(self, site: int, factor: tuple[int, int]):
        n = self.params.n_sites
        if not 1 <= site <= n:
            raise ValueError(f"site must lie in 1..{n}, got {site}")
        fs = [(0, 2)] * n
        fs[site - 1] = factor
        return fs

    def marginal(self, site: int, m: int) -> float:
        """``P(m_site = m)``; the other sites are summed inside the integral."""
        if m < 0:
            return 0.0
        return self._nested(self._site_factors(site, (m, 1))) / self.normalization_reduced()

    def tail(self, site: int, m: int) -> float:
        """``P(m_site > m)`` without subtracting from one."""
        return self._nested(self._site_factors(site, (m + 1, 2))) / self.normalization_reduced()

    def mean_occupation(self, site: int) -> float:
        return self._nested(self._site_factors(site, (1, 3))) / self.normalization_reduced()


@functools.lru_cache(maxsize=64)
def evaluator(params: ModelParams, pol: TruncationPolicy = DEFAULT_POLICY) -> SteadyStateEvaluator:
    """Shared evaluator per ``(params, pol)``."""
    return SteadyStateEvaluator(params, pol)


def steady_n1_sum(m: int, p: ModelParams, pol: TruncationPolicy = DEFAULT_POLICY) -> float:
    """Unnormalised one-site weight ``sum_{k > m} ((gamma beta_r)**k - beta_l**k) / [k]``."""
    if p.n_sites != 1:
        raise ValueError("steady_n1_sum is the one-site formula")
    a, b, g = p.left_fugacity, p.right_fugacity, p.gamma

    def terms(k):
        kf = k.astype(np.float64)
        return (b ** kf - a ** kf) / qcalc.q_numbers(k, g)

    return qcalc.sum_series(terms, m + 1, pol)


def steady_unnormalized_grid(m: Sequence[int], p: ModelParams, pol: TruncationPolicy = DEFAULT_POLICY) -> float:
    return evaluator(p, pol).grid_unnormalized(m)


def steady_recursive(m: Sequence[int], p: ModelParams, pol: TruncationPolicy = DEFAULT_POLICY) -> float:
    return evaluator(p, pol).unnormalized(m)


def normalization(p: ModelParams, pol: TruncationPolicy = DEFAULT_POLICY) -> float:
    return evaluator(p, pol).normalization()


def probability(m: Sequence[int], p: ModelParams, pol: TruncationPolicy = DEFAULT_POLICY) -> float:
    return evaluator(p, pol).probability(m)


def marginal(site: int, m: int, p: ModelParams, pol: TruncationPolicy = DEFAULT_POLICY) -> float:
    return evaluator(p, pol).marginal(site, m)


# -- closed forms -------------------------------------------------------------------

def equilibrium_probability(m: Sequence[int], beta: float) -> float:
    """Product of geometric laws, ``prod beta**m_i (1 - beta)``."""
    return float(np.prod([beta ** mi * (1.0 - beta) for mi in m]))


def equilibrium_unnormalized(m: Sequence[int], beta: float, gamma: float) -> float:
    n = len(m)
    return (gamma - 1.0) ** n * float(np.prod([beta ** (mi + 1) / (1.0 - beta) for mi in m]))


def equilibrium_normalization(beta: float, gamma: float, n_sites: int) -> float:
    return (gamma - 1.0) ** n_sites * beta ** n_sites / (1.0 - beta) ** (2 * n_sites)


def rational_limit_probability(m: int, beta_l: float, beta_r: float,
                               pol: TruncationPolicy = DEFAULT_POLICY) -> float:
    """One-site stationary law of the ``gamma -> 1`` model.

    ``(1 - beta_l)(1 - beta_r) sum_{k > m} (beta_r**k - beta_l**k) / ((beta_r - beta_l) k)``;
    normalised to one and finite at ``beta_l == beta_r``.
    """
    k_max = m + qcalc.series_length(max(beta_l, beta_r), pol) + 1
    e = divided_powers(beta_l, beta_r, k_max)
    k = np.arange(1, k_max + 1)
    return (1.0 - beta_l) * (1.0 - beta_r) * float(np.sum((e / k)[m:][::-1]))
