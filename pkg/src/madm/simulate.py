"""Gillespie simulation of the MADM with unbounded occupations.

Replica ``i`` draws from ``PCG64(seed ^ stream_mix(i))``; see
:func:`stream_seed`. Uniforms are generated in NumPy and handed to the event
loop in blocks, so the numba and pure-Python kernels consume identical
random numbers and produce identical trajectories.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels, qcalc
from .errors import ConvergenceError
from .model import Event, EventKind, ModelParams, apply_event, as_configuration, enabled_events
from .qcalc import DEFAULT_POLICY, QParam, TruncationPolicy

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

UNIFORM_BLOCK = 3 * 65536
INITIAL_CAPACITY = 64


def stream_mix(i: int) -> int:
    """splitmix64 finaliser applied to ``(i + 1) * golden``."""
    z = ((i + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def stream_seed(seed: int, i: int) -> int:
    return (int(seed) & _MASK64) ^ stream_mix(i)


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    seed: int = 42
    t_burn: float = 1e3
    t_measure: float = 1e5
    replicas: int = 8
    batches: int = 10
    joint_box: int = 4
    pol: TruncationPolicy = DEFAULT_POLICY

    def __post_init__(self):
        if not self.t_burn >= 0:
            raise ValueError("t_burn must be >= 0")
        if not self.t_measure > 0:
            raise ValueError("t_measure must be > 0")
        if int(self.replicas) < 1:
            raise ValueError("replicas must be >= 1")
        if int(self.batches) < 1:
            raise ValueError("batches must be >= 1")
        if int(self.joint_box) < 0:
            raise ValueError("joint_box must be >= 0")


@dataclass
class EmpiricalStats:
    """Sojourn-time statistics merged over replicas in replica order.

    ``occupation_time[i, m]`` is the measured time site ``i + 1`` spent holding
    ``m`` particles; ``batch_fraction[b, i, m]`` the same as a fraction of one
    batch, over all ``replicas * batches`` batches.
    """

    params: ModelParams
    total_time: float
    occupation_time: np.ndarray
    batch_fraction: np.ndarray
    event_counts: dict
    joint_time: np.ndarray
    joint_box: int
    replicas: int
    batches: int
    mean_occupation: np.ndarray = field(init=False)
    mean_occupation_se: np.ndarray = field(init=False)

    def __post_init__(self):
        m = np.arange(self.occupation_time.shape[1])
        self.mean_occupation = self.occupation_time @ m / self.total_time
        batch_means = self.batch_fraction @ m
        self.mean_occupation_se = _standard_error(batch_means)

    @property
    def marginals(self) -> np.ndarray:
        return self.occupation_time / self.total_time

    @property
    def marginal_se(self) -> np.ndarray:
        return _standard_error(self.batch_fraction)

    def joint_fraction(self, m) -> float:
        """Fraction of time spent in configuration ``m`` (all ``m_i < joint_box``)."""
        m = as_configuration(m, self.params.n_sites)
        if any(x >= self.joint_box for x in m):
            raise ValueError(f"{m} is outside the recorded box of side {self.joint_box}")
        return float(self.joint_time[np.ravel_multi_index(m, (self.joint_box,) * len(m))] / self.total_time)

    def z_scores(self, exact: np.ndarray, min_prob: float = 1e-3) -> np.ndarray:
        """``(empirical - exact) / se`` for bins with ``exact >= min_prob``; NaN elsewhere."""
        n_sites, width = self.occupation_time.shape
        ex = np.zeros((n_sites, width))
        cols = min(width, exact.shape[1])
        ex[:, :cols] = exact[:, :cols]
        se = self.marginal_se
        z = np.full((n_sites, width), np.nan)
        ok = (ex >= min_prob) & (se > 0)
        z[ok] = (self.marginals[ok] - ex[ok]) / se[ok]
        return z


def _standard_error(samples: np.ndarray) -> np.ndarray:
    n = samples.shape[0]
    if n < 2:
        return np.full(samples.shape[1:], np.nan)
    return samples.std(axis=0, ddof=1) / np.sqrt(n)


# ---------------------------------------------------------------------------
# reference implementation
# ---------------------------------------------------------------------------

def sample_injection_size(beta_eff: float, q, u: float, pol: TruncationPolicy = DEFAULT_POLICY) -> int:
    """Smallest ``k`` with ``sum_{j<=k} beta^j/[j] >= u * phi_0(beta)``."""
    gamma = q.gamma if isinstance(q, QParam) else QParam(q).gamma
    if not 0.0 < beta_eff < 1.0:
        raise ValueError("beta_eff must lie in (0, 1)")
    if not 0.0 <= u < 1.0:
        raise ValueError("u must lie in [0, 1)")
    target = u * qcalc.phi(0, beta_eff, gamma, pol)
    partial = 0.0
    for k in range(1, pol.max_terms + 1):
        nxt = partial + beta_eff ** k / qcalc.q_number(k, gamma)
        if nxt >= target or nxt == partial:
            return k
        partial = nxt
    raise ConvergenceError(f"injection size not found within {pol.max_terms} terms")


def step(state, rng: np.random.Generator, p: ModelParams, pol: TruncationPolicy = DEFAULT_POLICY):
    """One Gillespie step by explicit event enumeration.

    Returns ``(event, waiting_time, new_state)``; injection events come back
    with their sampled size ``k`` and the rate of that size.
    """
    state = as_configuration(state, p.n_sites)
    events = enabled_events(state, p, pol)
    rates = np.array([e.rate for e in events])
    total = rates.sum()
    wait = rng.exponential(1.0 / total)
    x = rng.random() * total
    idx = min(int(np.searchsorted(np.cumsum(rates), x, side="right")), len(events) - 1)
    ev = events[idx]
    if ev.aggregate:
        beta = p.left_fugacity if ev.kind == EventKind.INJECT_LEFT else p.right_fugacity
        k = sample_injection_size(beta, p.gamma, rng.random(), pol)
        ev = Event(ev.kind, ev.site, k, beta ** k / qcalc.q_number(k, p.gamma))
    return ev, wait, apply_event(state, ev)


# ---------------------------------------------------------------------------
# fast trajectories
# ---------------------------------------------------------------------------

def _injection_cdf(beta: float, gamma: float, pol: TruncationPolicy):
    k = np.arange(1, qcalc.series_length(beta, pol) + 1)
    w = beta ** k.astype(np.float64) / qcalc.q_numbers(k, gamma)
    c = np.cumsum(w)
    total = float(c[-1])
    cdf = c / total
    cdf[-1] = 1.0
    return total, cdf


class _Trajectory:
    def __init__(self, p: ModelParams, rng: np.random.Generator, pol: TruncationPolicy, joint_box: int):
        self.p = p
        self.rng = rng
        self.n = p.n_sites
        self.rate_l, self.cdf_l = _injection_cdf(p.left_fugacity, p.gamma, pol)
        self.rate_r, self.cdf_r = _injection_cdf(p.right_fugacity, p.gamma, pol)
        self.box = joint_box
        self.joint = np.zeros(max(joint_box ** self.n, 1))
        self.counts = np.zeros(6, dtype=np.int64)
        self.occ = np.zeros(self.n, dtype=np.int64)
        self.t = 0.0
        self.u = rng.random(UNIFORM_BLOCK)
        self.pos = 0
        self._set_capacity(INITIAL_CAPACITY)
        self.hist = np.zeros((self.n, self.capacity))

    def _set_capacity(self, cap: int):
        g = self.p.gamma
        k = np.arange(1, cap)
        inv = 1.0 / qcalc.q_numbers(k, g)
        self.inv_q = np.concatenate([[0.0], inv])
        self.site_cum = np.concatenate([[0.0], np.cumsum(inv * (1.0 + g ** k.astype(np.float64)))])
        self.capacity = cap

    def advance(self, t_rec: float, t_stop: float):
        while True:
            self.t, self.pos, status = _kernels.gillespie_chunk(
                self.occ, self.t, t_rec, t_stop, self.u, self.pos, self.inv_q, self.site_cum,
                self.rate_l, self.rate_r, self.cdf_l, self.cdf_r, self.hist, self.joint, self.box,
                self.counts)
            if status == _kernels.DONE:
                return
            if status == _kernels.NEED_UNIFORMS:
                self.u = self.rng.random(UNIFORM_BLOCK)
                self.pos = 0
            else:
                cap = self.capacity
                while cap <= int(self.occ.max()):
                    cap *= 2
                self._set_capacity(cap)
                self.hist = np.pad(self.hist, ((0, 0), (0, cap - self.hist.shape[1])))


def _run_replica(cfg: SimConfig, i: int):
    rng = np.random.Generator(np.random.PCG64(stream_seed(cfg.seed, i)))
    box = cfg.joint_box if cfg.joint_box ** cfg.params.n_sites <= 10 ** 6 else 0
    tr = _Trajectory(cfg.params, rng, cfg.pol, box)
    if cfg.t_burn > 0:
        tr.advance(cfg.t_burn, cfg.t_burn)
    width = cfg.t_measure / cfg.batches
    batch_hists = []
    for b in range(cfg.batches):
        tr.hist = np.zeros((tr.n, tr.capacity))
        lo = cfg.t_burn + b * width
        hi = cfg.t_burn + cfg.t_measure if b == cfg.batches - 1 else lo + width
        tr.advance(lo, hi)
        batch_hists.append((tr.hist, hi - lo))
    return batch_hists, tr.joint, tr.counts.copy(), box


def run(cfg: SimConfig, threads: Optional[int] = None) -> EmpiricalStats:
    """Independent replicas (in parallel threads), merged in replica order."""
    workers = max(1, min(int(threads or 1), cfg.replicas))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda i: _run_replica(cfg, i), range(cfg.replicas)))
    else:
        results = [_run_replica(cfg, i) for i in range(cfg.replicas)]
    n = cfg.params.n_sites
    width = max(h.shape[1] for res in results for h, _ in res[0])
    occupation = np.zeros((n, width))
    fractions = []
    for batch_hists, _, _, _ in results:
        for h, dt in batch_hists:
            padded = np.pad(h, ((0, 0), (0, width - h.shape[1])))
            occupation += padded
            fractions.append(padded / dt)
    box = results[0][3]
    joint = np.zeros_like(results[0][1])
    counts = np.zeros(6, dtype=np.int64)
    for _, j, c, _ in results:
        joint += j
        counts += c
    return EmpiricalStats(
        params=cfg.params,
        total_time=cfg.replicas * cfg.t_measure,
        occupation_time=occupation,
        batch_fraction=np.array(fractions),
        event_counts={kind.name: int(counts[kind]) for kind in EventKind},
        joint_time=joint,
        joint_box=box,
        replicas=cfg.replicas,
        batches=cfg.batches,
    )
