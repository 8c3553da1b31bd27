"""The boundary-driven multiparticle asymmetric diffusion model (MADM).

Sites are numbered ``1..N`` in the public API. A configuration is a tuple of
non-negative occupation numbers. From site ``i`` a bunch of ``k`` particles
jumps right with rate ``1/[k]`` and left with rate ``gamma**k/[k]``. Jumps
off either end leave the system. The left reservoir injects ``k`` particles
with rate ``beta_l**k/[k]`` and the right one with ``(gamma*beta_r)**k/[k]``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from . import qcalc
from .errors import StateSpaceTooLarge
from .qcalc import DEFAULT_POLICY, QParam, TruncationPolicy

Configuration = tuple  # tuple[int, ...] of length n_sites

MAX_STATES = 10 ** 7


@dataclass(frozen=True)
class ModelParams:
    gamma: float
    beta_l: float
    beta_r: float
    n_sites: int

    def __post_init__(self):
        object.__setattr__(self, "gamma", QParam(self.gamma).gamma)
        for name in ("beta_l", "beta_r"):
            v = float(getattr(self, name))
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name} must lie strictly inside (0, 1), got {v}")
            object.__setattr__(self, name, v)
        if int(self.n_sites) != self.n_sites or self.n_sites < 1:
            raise ValueError(f"n_sites must be a positive integer, got {self.n_sites!r}")
        object.__setattr__(self, "n_sites", int(self.n_sites))

    @property
    def q(self) -> QParam:
        return QParam(self.gamma)

    @property
    def left_fugacity(self) -> float:
        """Lower integration limit and left injection parameter, ``beta_l``."""
        return self.beta_l

    @property
    def right_fugacity(self) -> float:
        """Upper integration limit and right injection parameter, ``gamma*beta_r``."""
        return self.gamma * self.beta_r

    @property
    def equilibrium(self) -> bool:
        return self.beta_l == self.beta_r


class EventKind(enum.IntEnum):
    BULK_RIGHT = 0
    BULK_LEFT = 1
    INJECT_LEFT = 2
    EXTRACT_LEFT = 3
    INJECT_RIGHT = 4
    EXTRACT_RIGHT = 5


INJECTIONS = (EventKind.INJECT_LEFT, EventKind.INJECT_RIGHT)


@dataclass(frozen=True)
class Event:
    """One transition. ``site`` is the source site (the receiving site for
    injections). ``k == 0`` marks a reservoir aggregate whose total rate is
    ``rate`` and whose size is drawn with
    :func:`madm.simulate.sample_injection_size`."""

    kind: EventKind
    site: int
    k: int
    rate: float

    @property
    def aggregate(self) -> bool:
        return self.k == 0


def as_configuration(c: Sequence[int], n_sites: int) -> Configuration:
    c = tuple(int(x) for x in c)
    if len(c) != n_sites:
        raise ValueError(f"configuration has {len(c)} sites, expected {n_sites}")
    if any(x < 0 for x in c):
        raise ValueError(f"negative occupation in {c}")
    return c


def bulk_rates(m: int, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Rightward and leftward rates ``1/[k]``, ``gamma**k/[k]`` for ``k = 1..m``."""
    k = np.arange(1, m + 1)
    qk = qcalc.q_numbers(k, gamma)
    return 1.0 / qk, gamma ** k.astype(np.float64) / qk


def injection_rates(p: ModelParams, pol: TruncationPolicy = DEFAULT_POLICY) -> tuple[float, float]:
    """Total injection rates ``phi_0(beta_l)``, ``phi_0(gamma*beta_r)``."""
    return (qcalc.phi(0, p.left_fugacity, p.gamma, pol),
            qcalc.phi(0, p.right_fugacity, p.gamma, pol))


def enabled_events(c: Sequence[int], p: ModelParams, pol: TruncationPolicy = DEFAULT_POLICY) -> list[Event]:
    c = as_configuration(c, p.n_sites)
    n = p.n_sites
    events = []
    for i, m in enumerate(c, start=1):
        if m == 0:
            continue
        right, left = bulk_rates(m, p.gamma)
        for k in range(1, m + 1):
            kind = EventKind.EXTRACT_RIGHT if i == n else EventKind.BULK_RIGHT
            events.append(Event(kind, i, k, float(right[k - 1])))
            kind = EventKind.EXTRACT_LEFT if i == 1 else EventKind.BULK_LEFT
            events.append(Event(kind, i, k, float(left[k - 1])))
    rate_l, rate_r = injection_rates(p, pol)
    events.append(Event(EventKind.INJECT_LEFT, 1, 0, rate_l))
    events.append(Event(EventKind.INJECT_RIGHT, n, 0, rate_r))
    return events


def apply_event(c: Configuration, event: Event) -> Configuration:
    """Configuration after ``event``; aggregates must be resolved to a size first."""
    if event.k <= 0:
        raise ValueError("cannot apply an aggregate injection event; sample its size first")
    m = list(c)
    i = event.site - 1
    k = event.k
    if event.kind in INJECTIONS:
        m[i] += k
        return tuple(m)
    if m[i] < k:
        raise ValueError(f"cannot move {k} particles from site {event.site} holding {m[i]}")
    m[i] -= k
    if event.kind == EventKind.BULK_RIGHT:
        m[i + 1] += k
    elif event.kind == EventKind.BULK_LEFT:
        m[i - 1] += k
    return tuple(m)


def site_exit_rate(m: int, gamma: float) -> float:
    """``sum_{k<=m} (1 + gamma**k) / [k]``, the rate of leaving a site holding ``m``."""
    if m == 0:
        return 0.0
    right, left = bulk_rates(m, gamma)
    return float(np.sum(right + left))


def total_exit_rate(c: Sequence[int], p: ModelParams, pol: TruncationPolicy = DEFAULT_POLICY) -> float:
    c = as_configuration(c, p.n_sites)
    rate_l, rate_r = injection_rates(p, pol)
    return sum(site_exit_rate(m, p.gamma) for m in c) + rate_l + rate_r


def apply_generator(f: Callable[[Configuration], float], c: Sequence[int], p: ModelParams,
                    pol: TruncationPolicy = DEFAULT_POLICY) -> float:
    """``(L f)(c)``; the two injection sums are truncated under ``pol``."""
    c = as_configuration(c, p.n_sites)
    f0 = f(c)
    out = 0.0
    for ev in enabled_events(c, p, pol):
        if not ev.aggregate:
            out += ev.rate * (f(apply_event(c, ev)) - f0)
    g = p.gamma
    for kind, site, beta in ((EventKind.INJECT_LEFT, 1, p.left_fugacity),
                             (EventKind.INJECT_RIGHT, p.n_sites, p.right_fugacity)):
        def terms(k, kind=kind, site=site, beta=beta):
            return np.array([beta ** int(j) / qcalc.q_number(int(j), g)
                             * (f(apply_event(c, Event(kind, site, int(j), 0.0))) - f0) for j in k])
        out += qcalc.sum_series(terms, 1, pol, chunk=16)
    return out


def state_index(states: np.ndarray, m_cap: int) -> np.ndarray:
    """Mixed-radix index, ``m_1`` most significant."""
    n_sites = states.shape[-1]
    return np.ravel_multi_index(tuple(states.T), (m_cap + 1,) * n_sites)


def enumerate_states(n_sites: int, m_cap: int) -> np.ndarray:
    """All configurations with ``m_i <= m_cap``, lexicographic in ``(m_1, ..., m_N)``."""
    size = (m_cap + 1) ** n_sites
    if size > MAX_STATES:
        raise StateSpaceTooLarge(f"(m_cap+1)^N = {size} states exceeds {MAX_STATES}")
    return np.indices((m_cap + 1,) * n_sites).reshape(n_sites, -1).T.copy()


def build_truncated_generator(p: ModelParams, m_cap: int, pol: TruncationPolicy = DEFAULT_POLICY):
    """Master-equation rate matrix on ``{m : m_i <= m_cap}``.

    Returns ``(Q, lost, states)`` with ``Q[target, source]`` the rate of
    ``source -> target`` and ``Q[s, s]`` minus the full exit rate of ``s``.
    Transitions that leave the box are dropped; ``lost[s]`` is their summed
    rate, so the column sums of ``Q`` equal ``-lost``.
    """
    if m_cap < 0:
        raise ValueError("m_cap must be >= 0")
    n = p.n_sites
    g = p.gamma
    states = enumerate_states(n, m_cap)
    n_states = states.shape[0]
    src_all = np.arange(n_states)
    rows, cols, vals = [], [], []

    def add(src_mask, delta, rate):
        tgt = states[src_mask] + delta
        ok = np.all((tgt >= 0) & (tgt <= m_cap), axis=1)
        rows.append(state_index(tgt[ok], m_cap))
        cols.append(src_all[src_mask][ok])
        vals.append(np.full(int(ok.sum()), rate))

    k_all = np.arange(1, m_cap + 1)
    inv_q = 1.0 / qcalc.q_numbers(k_all, g)
    for k, iq in zip(k_all, inv_q):
        gk = g ** k * iq
        for i in range(n):
            has = states[:, i] >= k
            right = np.zeros(n, dtype=np.int64)
            right[i] = -k
            if i + 1 < n:
                right[i + 1] = k
            add(has, right, iq)
            left = np.zeros(n, dtype=np.int64)
            left[i] = -k
            if i > 0:
                left[i - 1] = k
            add(has, left, gk)
        inj = np.zeros(n, dtype=np.int64)
        inj[0] = k
        add(np.ones(n_states, bool), inj, p.left_fugacity ** k * iq)
        inj = np.zeros(n, dtype=np.int64)
        inj[-1] = k
        add(np.ones(n_states, bool), inj, p.right_fugacity ** k * iq)

    rate_l, rate_r = injection_rates(p, pol)
    cum = np.concatenate([[0.0], np.cumsum(inv_q * (1.0 + g ** k_all.astype(np.float64)))])
    exit_rate = rate_l + rate_r + cum[states].sum(axis=1)
    r = np.concatenate(rows) if rows else np.zeros(0, np.int64)
    cidx = np.concatenate(cols) if cols else np.zeros(0, np.int64)
    v = np.concatenate(vals) if vals else np.zeros(0)
    off = sp.coo_matrix((v, (r, cidx)), shape=(n_states, n_states)).tocsr()
    inside = np.asarray(off.sum(axis=0)).ravel()
    lost = exit_rate - inside
    Q = (off - sp.diags(exit_rate)).tocsr()
    return Q, lost, states
