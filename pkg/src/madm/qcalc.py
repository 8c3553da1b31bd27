"""q-numbers, q-derivatives and Jackson integrals in double precision.

Integrands are plain callables. They are called with numpy arrays of grid
points where possible; a callable that only handles scalars is evaluated
point by point instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .errors import ConvergenceError


@dataclass(frozen=True)
class QParam:
    """Asymmetry parameter ``gamma`` in the open interval (0, 1)."""

    gamma: float

    def __post_init__(self):
        g = float(self.gamma)
        if not (0.0 < g < 1.0):
            raise ValueError(f"gamma must lie strictly inside (0, 1), got {self.gamma!r}")
        object.__setattr__(self, "gamma", g)


@dataclass(frozen=True)
class TruncationPolicy:
    """Stopping rule shared by every infinite series and geometric grid.

    A series stops once ``|term| <= rel_tol * |partial_sum| + abs_tol`` holds for
    two consecutive terms; hitting ``max_terms`` first raises
    :class:`ConvergenceError`. Geometric grids are cut where ``gamma**n``
    drops below ``rel_tol * 1e-3`` and are subject to the same cap.
    """

    rel_tol: float = 1e-13
    abs_tol: float = 1e-300
    max_terms: int = 10_000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if not self.abs_tol >= 0:
            raise ValueError("abs_tol must be >= 0")
        if int(self.max_terms) < 1:
            raise ValueError("max_terms must be >= 1")


DEFAULT_POLICY = TruncationPolicy()


def _g(q) -> float:
    return q.gamma if isinstance(q, QParam) else QParam(q).gamma


def q_number(k: int, q) -> float:
    """``[k] = (1 - gamma**k) / (1 - gamma)``; saturates at ``1 / (1 - gamma)``."""
    if k < 0:
        raise ValueError("q_number needs k >= 0")
    g = _g(q)
    gk = g ** k
    if gk < 1e-17:
        return 1.0 / (1.0 - g)
    return (1.0 - gk) / (1.0 - g)


def q_numbers(k, gamma: float) -> np.ndarray:
    """Vectorised :func:`q_number` for an integer array ``k``."""
    k = np.asarray(k, dtype=np.float64)
    return (1.0 - gamma ** k) / (1.0 - gamma)


def q_derivative(G: Callable, x, q):
    """``(G(gamma x) - G(x)) / (gamma x - x)``."""
    g = _g(q)
    x = np.asarray(x, dtype=np.float64)
    if np.any(x == 0):
        raise ValueError("the q-derivative is undefined at x = 0")
    out = (_evaluate(G, g * x) - _evaluate(G, x)) / (g * x - x)
    return float(out) if out.ndim == 0 else out


def _evaluate(fn: Callable, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    try:
        out = np.asarray(fn(t), dtype=np.float64)
    except (TypeError, ValueError):
        out = None
    if out is None or out.shape != t.shape:
        if out is not None and out.ndim == 0:
            return np.full(t.shape, float(out))
        out = np.array([fn(float(x)) for x in t.ravel()], dtype=np.float64).reshape(t.shape)
    return out


def sum_series(terms: Callable[[np.ndarray], np.ndarray], start: int, pol: TruncationPolicy,
               chunk: int = 64) -> float:
    """Sum ``terms(n)`` for ``n = start, start + 1, ...`` under ``pol``.

    ``terms`` receives an integer array and returns the matching terms.
    """
    total = 0.0
    n0 = start
    calm = 0
    used = 0
    last = np.nan
    while used < pol.max_terms:
        size = min(chunk, pol.max_terms - used)
        vals = np.asarray(terms(np.arange(n0, n0 + size)), dtype=np.float64)
        partial = total + np.cumsum(vals)
        # bound the remaining tail by a geometric continuation of the last ratio
        mag = np.abs(vals)
        prev = np.abs(np.concatenate([[last], vals[:-1]]))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(mag == 0.0, 0.0, mag / prev)
            tail = np.where(ratio < 1.0, mag / (1.0 - ratio), np.inf)
        ok = tail <= pol.rel_tol * np.abs(partial) + pol.abs_tol
        for i in range(size):
            calm = calm + 1 if ok[i] else 0
            if calm >= 2:
                return float(partial[i])
        total = float(partial[-1])
        last = vals[-1]
        n0 += size
        used += size
        chunk = min(chunk * 2, 4096)
    raise ConvergenceError(f"series did not converge within {pol.max_terms} terms")


def jackson_integral_zero(g: Callable, a: float, q, pol: TruncationPolicy = DEFAULT_POLICY) -> float:
    """``int_0^a g(t) d_gamma t = a (1 - gamma) sum_n g(a gamma^n) gamma^n``."""
    gam = _g(q)
    a = float(a)
    if a == 0.0:
        return 0.0

    def terms(n):
        pw = gam ** n.astype(np.float64)
        return _evaluate(g, a * pw) * pw

    return a * (1.0 - gam) * sum_series(terms, 0, pol)


def jackson_integral(g: Callable, a: float, b: float, q, pol: TruncationPolicy = DEFAULT_POLICY) -> float:
    """``int_a^b g(t) d_gamma t`` as the difference of two integrals from 0."""
    if a == b:
        return 0.0
    return jackson_integral_zero(g, b, q, pol) - jackson_integral_zero(g, a, q, pol)


def phi(m: int, beta: float, q, pol: TruncationPolicy = DEFAULT_POLICY) -> float:
    """Series tail ``sum_{k > m} beta**k / [k]``."""
    gam = _g(q)
    if not (0.0 < beta < 1.0):
        raise ValueError("phi needs 0 < beta < 1")

    def terms(k):
        return beta ** k.astype(np.float64) / q_numbers(k, gam)

    return sum_series(terms, m + 1, pol)


def phi_table(beta: float, gamma: float, m_max: int, pol: TruncationPolicy = DEFAULT_POLICY) -> np.ndarray:
    """``phi_m(beta)`` for ``m = 0..m_max`` via suffix sums (no cancellation)."""
    n_tail = series_length(beta, pol)
    k = np.arange(1, m_max + n_tail + 2)
    terms = beta ** k.astype(np.float64) / q_numbers(k, gamma)
    suffix = np.cumsum(terms[::-1])[::-1]
    return suffix[: m_max + 1].copy()


def series_length(ratio: float, pol: TruncationPolicy) -> int:
    """Terms needed for a geometric envelope with this ratio to fall below tolerance."""
    ratio = abs(ratio)
    if ratio == 0.0:
        return 1
    target = pol.rel_tol * 1e-3 * (1.0 - ratio)
    n = int(math.ceil(math.log(target) / math.log(ratio))) + 1
    if n > pol.max_terms:
        raise ConvergenceError(f"geometric series with ratio {ratio} needs {n} > {pol.max_terms} terms")
    return max(n, 1)


def grid_length(gamma: float, pol: TruncationPolicy) -> int:
    """Points kept on a Jackson grid ``{x gamma^n}``."""
    n = int(math.ceil(math.log(pol.rel_tol * 1e-3) / math.log(gamma))) + 1
    if n > pol.max_terms:
        raise ConvergenceError(
            f"Jackson grid for gamma={gamma} needs {n} points per level, above max_terms={pol.max_terms}")
    return n


# ---------------------------------------------------------------------------
# nested integrals  int_a^b dt_1 int_{t_1}^b dt_2 ... int_{t_{N-1}}^b dt_N  prod h_j(t_j)
# ---------------------------------------------------------------------------

class PowerFactor:
    """``t**m / (1 - t)**p`` with a closed-form divided difference."""

    def __init__(self, m: int, p: int = 1):
        if m < 0 or p < 0:
            raise ValueError("PowerFactor needs m >= 0 and p >= 0")
        self.m = int(m)
        self.p = int(p)

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        return t ** self.m / (1.0 - t) ** self.p

    def dd(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """``(h(x) - h(y)) / (x - y)``, finite and exact in the limit ``x == y``."""
        # (x^m - y^m) / (x - y) = sum_i x^i y^(m-1-i): every term has one sign
        e = np.zeros_like(x)
        xm = np.ones_like(x)
        for _ in range(self.m):
            e = y * e + xm
            xm = xm * x
        if self.p == 0:
            return e
        ux, uy = 1.0 / (1.0 - x), 1.0 / (1.0 - y)
        # ((1-x)^-p - (1-y)^-p) / (x - y) = sum_{i<p} (1-x)^-(i+1) (1-y)^-(p-i)
        dv = np.zeros_like(x)
        for i in range(self.p):
            dv = dv + ux ** (i + 1) * uy ** (self.p - i)
        return xm * dv + e * uy ** self.p


class Constant:
    """A constant factor."""

    def __init__(self, c: float):
        self.c = float(c)

    def __call__(self, t):
        return np.full(np.shape(t), self.c)

    def dd(self, x, y):
        return np.zeros(np.shape(x))


class Geometric:
    """``1 / (1 - c t)``."""

    def __init__(self, c: float = 1.0):
        self.c = float(c)

    def __call__(self, t):
        return 1.0 / (1.0 - self.c * np.asarray(t, dtype=np.float64))

    def dd(self, x, y):
        return self.c / ((1.0 - self.c * x) * (1.0 - self.c * y))


class PowerSeries:
    """``sum_{k>=1} coeffs[k-1] (s t)**k`` for a finite coefficient list."""

    def __init__(self, coeffs, scale: float = 1.0):
        self.coeffs = np.asarray(coeffs, dtype=np.float64)
        self.scale = float(scale)

    def __call__(self, t):
        u = self.scale * np.asarray(t, dtype=np.float64)
        out = np.zeros_like(u)
        for c in self.coeffs[::-1]:
            out = (out + c) * u
        return out

    def dd(self, x, y):
        sx, sy = self.scale * x, self.scale * y
        # e_k = (sx^k - sy^k) / (sx - sy) = sy e_{k-1} + sx^(k-1)
        e = np.zeros_like(sx)
        xp = np.ones_like(sx)
        out = np.zeros_like(sx)
        for c in self.coeffs:
            e = sy * e + xp
            xp = xp * sx
            out += c * e
        return self.scale * out


class Product:
    """Pointwise product of factors; ``dd`` by the discrete product rule."""

    def __init__(self, *factors):
        self.factors = factors

    def __call__(self, t):
        out = np.ones(np.shape(t))
        for f in self.factors:
            out = out * f(t)
        return out

    def dd(self, x, y):
        # d(fg) = f(x) dg + g(y) df, folded left to right
        val_x = np.ones(np.shape(x))
        out = np.zeros(np.shape(x))
        for f in self.factors:
            out = out * f(y) + val_x * f.dd(x, y)
            val_x = val_x * f(x)
        return out


def _grid_arrays(factors: Sequence[Callable], a: float, b: float, gamma: float,
                 pol: TruncationPolicy, need_dd: bool):
    n = grid_length(gamma, pol)
    pw = gamma ** np.arange(n, dtype=np.float64)
    za, zb = a * pw, b * pw
    Ha = np.empty((len(factors), n))
    Hb = np.empty((len(factors), n))
    Hdd = np.empty((len(factors), n))
    for j, h in enumerate(factors):
        Ha[j] = _evaluate(h, za)
        Hb[j] = _evaluate(h, zb)
        if hasattr(h, "dd"):
            Hdd[j] = h.dd(za, zb)
        elif a != b:
            Hdd[j] = (Ha[j] - Hb[j]) / (za - zb)
        elif need_dd:
            raise ValueError("a divided difference at a == b needs factors with a .dd method")
        else:
            Hdd[j] = 0.0
    return Ha, Hb, Hdd


def nested_jackson_reduced(factors: Sequence[Callable], a: float, b: float, q,
                           pol: TruncationPolicy = DEFAULT_POLICY) -> float:
    """Nested integral divided by ``(b - a)``.

    ``factors[j]`` multiplies the integrand in ``t_{j+1}``. The divided form
    stays finite and accurate as ``a -> b``; at ``a == b`` every factor must
    provide ``dd(x, y)``.
    """
    gam = _g(q)
    if not factors:
        raise ValueError("need at least one factor")
    Ha, Hb, Hdd = _grid_arrays(factors, float(a), float(b), gam, pol, need_dd=True)
    return float(_kernels.nested_grid(Ha, Hb, Hdd, float(a), float(b), gam))


def nested_jackson(factors: Sequence[Callable], a: float, b: float, q,
                   pol: TruncationPolicy = DEFAULT_POLICY) -> float:
    """``int_a^b dt_1 int_{t_1}^b dt_2 ... prod_j factors[j](t_j)`` (Jackson)."""
    if a == b:
        return 0.0
    gam = _g(q)
    Ha, Hb, Hdd = _grid_arrays(factors, float(a), float(b), gam, pol, need_dd=False)
    return (float(b) - float(a)) * float(_kernels.nested_grid(Ha, Hb, Hdd, float(a), float(b), gam))
