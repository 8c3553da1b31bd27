"""``madm`` command line: exact, simulate, verify, equilibrium.

Settings resolve as command-line flag, then JSON config file, then built-in
default. Exit codes: 0 success, 1 usage or invalid input, 2 numerical
non-convergence, 3 failed verification.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import simulate, steady, verify
from .errors import ConvergenceError, StateSpaceTooLarge
from .model import MAX_STATES, ModelParams
from .qcalc import TruncationPolicy

EXIT_OK, EXIT_USAGE, EXIT_CONVERGENCE, EXIT_FAILED = 0, 1, 2, 3

DEFAULTS = {
    "gamma": 0.5,
    "beta_l": 0.2,
    "beta_r": 0.4,
    "n_sites": 2,
    "rel_tol": 1e-13,
    "max_terms": 10_000,
    "seed": 42,
    "t_burn": 1e3,
    "t_measure": 1e5,
    "replicas": 8,
    "batches": 10,
    "m_max": None,
    "beta": None,
    "threads": None,
    "format": None,
    "output": None,
}

COVERAGE_TARGET = 1e-6
EQUILIBRIUM_TOL = 1e-10


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunSpec:
    command: str
    params: ModelParams
    pol: TruncationPolicy
    settings: dict
    output: Optional[str]
    fmt: str
    threads: int
    checks: tuple = field(default_factory=tuple)
    perturb_mu: float = 0.0


def fmt_real(x: float) -> str:
    """17 significant digits, '.' decimal separator, independent of locale."""
    if isinstance(x, float) and not math.isfinite(x):
        return ""
    return format(float(x), ".17g")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("model and numerics")
    g.add_argument("--config", help="JSON file with default settings")
    g.add_argument("--gamma", type=float)
    g.add_argument("--beta-l", dest="beta_l", type=float)
    g.add_argument("--beta-r", dest="beta_r", type=float)
    g.add_argument("-N", "--n-sites", dest="n_sites", type=int)
    g.add_argument("--rel-tol", dest="rel_tol", type=float)
    g.add_argument("--max-terms", dest="max_terms", type=int)
    g.add_argument("-o", "--output", help="output file (default: stdout)")
    g.add_argument("--format", choices=("csv", "json"))
    g.add_argument("--threads", type=int, help="worker threads (MADM_THREADS overrides)")

    parser = _Parser(prog="madm", description="Boundary-driven MADM: exact stationary measure, "
                                                "simulation and identity checks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ex = sub.add_parser("exact", parents=[common], help="exact stationary measure on a box")
    ex.add_argument("--m-max", dest="m_max", type=int, help="largest occupation per site (default 8)")

    sim = sub.add_parser("simulate", parents=[common], help="Gillespie simulation vs exact marginals")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--t-burn", dest="t_burn", type=float)
    sim.add_argument("--t-measure", dest="t_measure", type=float)
    sim.add_argument("--replicas", type=int)
    sim.add_argument("--batches", type=int)

    ver = sub.add_parser("verify", parents=[common], help="run the identity checks")
    ver.add_argument("--check", action="append", choices=verify.CHECKS,
                     help="run only this check (repeatable)")
    ver.add_argument("--perturb-mu", dest="perturb_mu", type=float, default=0.0, help=argparse.SUPPRESS)

    eq = sub.add_parser("equilibrium", parents=[common], help="compare with the geometric product law")
    eq.add_argument("--beta", type=float, help="beta_l = beta_r (default: --beta-l)")
    eq.add_argument("--m-max", dest="m_max", type=int, help="largest occupation per site (default 6)")
    return parser


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    unknown = set(cfg) - set(DEFAULTS)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def resolve(args: argparse.Namespace, environ=os.environ) -> RunSpec:
    settings = dict(DEFAULTS)
    settings.update(_load_config(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    if args.command == "equilibrium":
        beta = settings["beta"] if settings["beta"] is not None else settings["beta_l"]
        settings["beta_l"] = settings["beta_r"] = beta
        settings["beta"] = beta
    if settings["m_max"] is None:
        settings["m_max"] = 6 if args.command == "equilibrium" else 8
    if settings["m_max"] < 0:
        raise ValueError("m_max must be >= 0")
    params = ModelParams(settings["gamma"], settings["beta_l"], settings["beta_r"], settings["n_sites"])
    pol = TruncationPolicy(rel_tol=settings["rel_tol"], max_terms=settings["max_terms"])
    threads = settings["threads"] or os.cpu_count() or 1
    env = environ.get("MADM_THREADS")
    if env:
        try:
            threads = int(env)
        except ValueError as exc:
            raise UsageError(f"MADM_THREADS must be an integer, got {env!r}") from exc
    if threads < 1:
        raise ValueError("threads must be >= 1")
    if settings["format"] is None:
        settings["format"] = "json" if args.command == "verify" else "csv"
    if settings["format"] not in ("csv", "json"):
        raise UsageError(f"unknown format {settings['format']!r}")
    return RunSpec(args.command, params, pol, settings, settings["output"], settings["format"], threads,
                   tuple(getattr(args, "check", None) or verify.CHECKS), getattr(args, "perturb_mu", 0.0))


def _params_dict(p: ModelParams) -> dict:
    return {"gamma": p.gamma, "beta_l": p.beta_l, "beta_r": p.beta_r, "n_sites": p.n_sites}


def _emit(spec: RunSpec, text: str, suffix: str = ""):
    if spec.output is None:
        sys.stdout.write(text)
        return
    path = Path(spec.output)
    if suffix:
        path = path.with_name(path.stem + suffix + path.suffix)
    path.write_text(text, encoding="utf-8")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt_real(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def _note(spec: RunSpec, line: str):
    # summaries go to stderr when the table itself goes to stdout
    stream = sys.stderr if spec.output is None else sys.stdout
    print(line, file=stream)


def recommended_m_max(ev: steady.SteadyStateEvaluator, target: float = COVERAGE_TARGET, limit: int = 100_000) -> int:
    """Smallest box side whose exact outside mass (union bound) is below ``target``."""
    n = ev.params.n_sites
    for m in range(limit):
        if sum(ev.tail(i, m) for i in range(1, n + 1)) <= target:
            return m
    raise ConvergenceError(f"no box side below {limit} reaches coverage 1 - {target}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_exact(spec: RunSpec) -> int:
    p = spec.params
    n = p.n_sites
    M = spec.settings["m_max"]
    if (M + 1) ** n > MAX_STATES:
        raise StateSpaceTooLarge(f"(m_max+1)^N = {(M + 1) ** n} rows exceeds {MAX_STATES}")
    ev = steady.evaluator(p, spec.pol)
    rows = [(*m, ev.probability(m)) for m in itertools.product(range(M + 1), repeat=n)]
    marg = [(i, m, ev.marginal(i, m)) for i in range(1, n + 1) for m in range(M + 1)]
    means = [ev.mean_occupation(i) for i in range(1, n + 1)]
    coverage = float(math.fsum(r[-1] for r in rows))
    tail = float(sum(ev.tail(i, M) for i in range(1, n + 1)))
    rec = recommended_m_max(ev)
    header = [f"m_{i}" for i in range(1, n + 1)] + ["mu"]
    if spec.fmt == "json":
        doc = {"params": _params_dict(p), "m_max": M,
               "table": [{"m": list(r[:-1]), "mu": r[-1]} for r in rows],
               "marginals": {str(i): [x for (s, _, x) in marg if s == i] for i in range(1, n + 1)},
               "mean_occupation": means, "coverage": coverage, "tail_bound": tail,
               "recommended_m_max": rec}
        _emit(spec, json.dumps(doc, indent=2) + "\n")
    else:
        _emit(spec, _csv(header, rows))
        marg_csv = _csv(["site", "m", "marginal"], marg)
        if spec.output is None:
            sys.stdout.write("\n" + marg_csv)
        else:
            _emit(spec, marg_csv, suffix="_marginals")
    for i, mean in enumerate(means, start=1):
        _note(spec, f"mean occupation site {i}: {fmt_real(mean)}")
    _note(spec, f"coverage: {fmt_real(coverage)}")
    _note(spec, f"tail bound: {fmt_real(tail)}")
    _note(spec, f"recommended m_max for coverage 1-{COVERAGE_TARGET:g}: {rec}")
    return EXIT_OK


def cmd_simulate(spec: RunSpec) -> int:
    s = spec.settings
    cfg = simulate.SimConfig(spec.params, seed=int(s["seed"]), t_burn=float(s["t_burn"]),
                             t_measure=float(s["t_measure"]), replicas=int(s["replicas"]),
                             batches=int(s["batches"]), pol=spec.pol)
    stats = simulate.run(cfg, threads=spec.threads)
    ev = steady.evaluator(spec.params, spec.pol)
    n, width = stats.occupation_time.shape
    exact = np.array([[ev.marginal(i, m) for m in range(width)] for i in range(1, n + 1)])
    z = stats.z_scores(exact)
    se = stats.marginal_se
    emp = stats.marginals
    rows = []
    for i in range(n):
        last = int(np.max(np.nonzero(stats.occupation_time[i])[0], initial=0))
        for m in range(last + 1):
            rows.append((i + 1, m, float(emp[i, m]), float(se[i, m]), float(exact[i, m]), float(z[i, m])))
    zmax = float(np.nanmax(np.abs(z))) if np.any(np.isfinite(z)) else float("nan")
    exact_means = [ev.mean_occupation(i) for i in range(1, n + 1)]
    if spec.fmt == "json":
        doc = {"params": _params_dict(spec.params), "seed": cfg.seed, "t_burn": cfg.t_burn,
               "t_measure": cfg.t_measure, "replicas": cfg.replicas, "batches": cfg.batches,
               "total_time": stats.total_time, "event_counts": stats.event_counts,
               "histogram": [dict(zip(("site", "m", "time_fraction", "se", "exact", "z"), r)) for r in rows],
               "mean_occupation": stats.mean_occupation.tolist(),
               "mean_occupation_se": stats.mean_occupation_se.tolist(),
               "exact_mean_occupation": exact_means, "max_abs_z": zmax}
        _emit(spec, json.dumps(_nan_to_none(doc), indent=2) + "\n")
    else:
        _emit(spec, _csv(["site", "m", "time_fraction", "se", "exact", "z"], rows))
    _note(spec, f"total measured time: {fmt_real(stats.total_time)}")
    _note(spec, "events: " + ", ".join(f"{k}={v}" for k, v in stats.event_counts.items()))
    for i in range(n):
        _note(spec, f"mean occupation site {i + 1}: {fmt_real(float(stats.mean_occupation[i]))} "
                    f"+- {fmt_real(float(stats.mean_occupation_se[i]))} (exact {fmt_real(exact_means[i])})")
    _note(spec, f"max |z|: {fmt_real(zmax)}")
    return EXIT_OK


def _nan_to_none(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_nan_to_none(v) for v in obj]
    return obj


def cmd_verify(spec: RunSpec) -> int:
    records = verify.run_battery(spec.params, spec.pol, spec.checks, threads=spec.threads,
                                 perturb=spec.perturb_mu)
    ok = all(r["passed"] for r in records)
    if spec.fmt == "csv":
        rows = [(r["check"], json.dumps(r["inputs"], sort_keys=True), float(r["residual"]), float(r["scale"]),
                 float(r["relative"]), "" if r["tolerance"] is None else float(r["tolerance"]),
                 "pass" if r["passed"] else "FAIL") for r in records]
        _emit(spec, _csv(["check", "inputs", "residual", "scale", "relative", "tolerance", "status"], rows))
    else:
        doc = {"params": _params_dict(spec.params), "passed": ok, "records": records}
        _emit(spec, json.dumps(_nan_to_none(doc), indent=2) + "\n")
    failed = [r for r in records if not r["passed"]]
    _note(spec, f"{len(records) - len(failed)}/{len(records)} checks passed")
    for r in failed[:10]:
        _note(spec, f"FAIL {r['check']} {json.dumps(r['inputs'])} relative={fmt_real(r['relative'])}")
    return EXIT_OK if ok else EXIT_FAILED


def cmd_equilibrium(spec: RunSpec) -> int:
    p = spec.params
    beta = spec.settings["beta"]
    M = spec.settings["m_max"]
    if (M + 1) ** p.n_sites > MAX_STATES:
        raise StateSpaceTooLarge(f"(m_max+1)^N = {(M + 1) ** p.n_sites} rows exceeds {MAX_STATES}")
    ev = steady.evaluator(p, spec.pol)
    rows = []
    worst = 0.0
    for m in itertools.product(range(M + 1), repeat=p.n_sites):
        mu = ev.probability(m)
        geo = steady.equilibrium_probability(m, beta)
        raw = ev.unnormalized(m)
        raw_geo = steady.equilibrium_unnormalized(m, beta, p.gamma)
        dev = max(abs(mu - geo) / geo, abs(raw - raw_geo) / abs(raw_geo))
        worst = max(worst, dev)
        rows.append((*m, mu, geo, dev))
    if spec.output is not None or spec.fmt == "json":
        if spec.fmt == "json":
            doc = {"params": _params_dict(p), "beta": beta, "m_max": M, "max_relative_deviation": worst,
                   "table": [{"m": list(r[:-3]), "mu": r[-3], "geometric": r[-2], "deviation": r[-1]}
                             for r in rows]}
            _emit(spec, json.dumps(doc, indent=2) + "\n")
        else:
            header = [f"m_{i}" for i in range(1, p.n_sites + 1)] + ["mu", "geometric", "deviation"]
            _emit(spec, _csv(header, rows))
    print(f"max relative deviation from the geometric product law: {fmt_real(worst)}")
    return EXIT_OK if worst <= EQUILIBRIUM_TOL else EXIT_FAILED


COMMANDS = {"exact": cmd_exact, "simulate": cmd_simulate, "verify": cmd_verify, "equilibrium": cmd_equilibrium}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        spec = resolve(args)
        return COMMANDS[spec.command](spec)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"error: no convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ValueError, StateSpaceTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
