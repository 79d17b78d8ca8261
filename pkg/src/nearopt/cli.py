"""Command-line entry point: ``nearopt <command> [flags]``.

Every command writes an RFC-4180 CSV whose leading ``#`` lines echo the tool
version and the full resolved configuration, so a run is reproducible from
its own output.  Flags override values read from ``--config`` (flat
``key=value`` lines).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .chain import Instance, dp_solve, interior, read_instance, verify_optimal_invariants
from .cost_models import (
    exponential_limit_constant,
    exponential_stationary_cdf,
    iid_threshold_epsilon,
    limit_constant_c,
    parse_distribution,
    sample_costs,
    simulate_iid_epsilon,
    stationary_cdf,
)
from .near_optimal import exact_constrained_epsilon, pattern_swap_sweep, theta_sweep
from .nk import nk_table1
from .scaling import fit_scaling_exponent
from .seeding import derive_seed
from .stationary import (
    InvariantViolation,
    coupling_bound_check,
    estimate_alpha,
    estimate_c_mc,
    regenerative_sweep,
    simulate_triple,
)

EXIT_USAGE = 2
EXIT_INVARIANT = 3


def _floats(text):
    return [float(t) for t in str(text).split(",") if t.strip()]


# name -> (parser, default)
PARAMS = {
    "dist": (str, "exp:1"),
    "n": (int, 100_000),
    "reps": (int, 20),
    "theta": (_floats, "0.01,0.02,0.04,0.08"),
    "delta": (_floats, "0.005,0.01,0.02,0.05,0.1"),
    "tau": (float, None),
    "alpha": (_floats, "0.01,0.02,0.04"),
    "k": (int, 3),
    "K": (int, 3),
    "N": (int, 2000),
    "seed": (int, 0),
    "out": (str, None),
    "jobs": (int, 1),
    "cycles": (int, 10_000),
    "samples": (int, 10_000),
    "length": (int, 1_000_000),
    "input": (str, None),
}

COMMAND_DEFAULTS = {
    "solve": {"n": 20},
    "eps-delta": {"n": 2000},
    "regen": {"theta": "0.08,0.05,0.02"},
    "coupling": {"theta": "0.08,0.05,0.02"},
    "nk": {"theta": "0.002,0.004,0.008,0.016", "reps": 200},
    "pattern-swap": {"n": 1_000_000},
    "iid": {"dist": "uniform:0:2", "n": 1_000_000, "delta": "0.01"},
}

COMMANDS = {
    "solve": "solve one instance; print M_n, the optimal bit string and invariant report",
    "sweep-theta": "penalized sweep over θ on random instances, with a log-log fit",
    "eps-delta": "exact constrained gap ε_n(δ) over a δ grid",
    "stationary": "Monte Carlo c, quadrature c and stationary-law diagnostics",
    "regen": "regenerative estimates of δ(θ), ε(θ) and the α extrapolation",
    "coupling": "coupling bound |S^L| <= θ K^L on stationary samples",
    "nk": "NK-model sweep of δ, ε and excursion lengths over θ, with a log-log fit",
    "pattern-swap": "window-swap construction over α",
    "iid": "i.i.d. threshold model: simulated vs analytic ε(δ)",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="nearopt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"nearopt {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for name, help_text in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key=value file; flags override it")
        for key in PARAMS:
            p.add_argument(f"--{key}", dest=key, default=None)
    return parser


def read_config(path):
    cfg = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip().lstrip("-")
        if not sep or key not in PARAMS:
            raise ValueError(f"{path}:{lineno}: bad config line {line!r}")
        cfg[key] = value.strip()
    return cfg


def resolve(command, args):
    merged = {k: d for k, (_, d) in PARAMS.items()}
    merged.update(COMMAND_DEFAULTS.get(command, {}))
    if args.config:
        merged.update(read_config(args.config))
    for key in PARAMS:
        val = getattr(args, key)
        if val is not None:
            merged[key] = val
    cfg = {}
    for key, (conv, _) in PARAMS.items():
        val = merged[key]
        cfg[key] = None if val is None else conv(val)
    return cfg


def _echo(cfg):
    parts = []
    for key in PARAMS:
        val = cfg[key]
        if isinstance(val, list):
            val = ",".join(f"{v:g}" for v in val)
        parts.append(f"{key}={val}")
    return " ".join(parts)


def _fmt(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def emit(cfg, command, columns, rows, notes=()):
    buf = io.StringIO()
    buf.write(f"# nearopt {__version__}\n")
    buf.write(f"# command={command}\n")
    buf.write(f"# config: {_echo(cfg)}\n")
    for note in notes:
        buf.write(f"# {note}\n")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    text = buf.getvalue()
    if cfg["out"]:
        Path(cfg["out"]).write_text(text, newline="")
    else:
        sys.stdout.write(text)
    return text


def _fit_note(pairs):
    try:
        fit = fit_scaling_exponent(pairs)
    except ValueError as exc:
        return f"fit: unavailable ({exc})"
    return f"fit: slope={fit.slope:.6g} intercept={fit.intercept:.6g} r2={fit.r2:.6g}"


# commands -------------------------------------------------------------------------


def cmd_solve(cfg):
    if cfg["input"]:
        inst = read_instance(cfg["input"])
    else:
        dist = parse_distribution(cfg["dist"])
        inst = Instance.from_costs(sample_costs(dist, cfg["n"] - 1, derive_seed(cfg["seed"], "solve")))
    res = dp_solve(inst)
    viol = verify_optimal_invariants(inst, res.optimal)
    bad = interior(viol)
    value = f"{res.value:.12g}"
    print(value)
    print(res.bits)
    print(f"unique={res.unique} interior_violations={len(bad)} boundary_flags={len(viol) - len(bad)}")
    if cfg["out"]:
        emit(cfg, "solve", ["value", "bits", "unique", "interior_violations"],
             [dict(value=res.value, bits=res.bits, unique=res.unique, interior_violations=len(bad))])
    if bad:
        raise InvariantViolation("; ".join(f"rule ({v.rule}) at item {v.index}" for v in bad))
    return 0


def cmd_sweep_theta(cfg):
    dist = parse_distribution(cfg["dist"])
    rows = theta_sweep(dist, cfg["n"], cfg["theta"], cfg["reps"], cfg["seed"], cfg["jobs"])
    note = _fit_note([(r["mean_delta"], r["mean_eps"]) for r in rows])
    cols = ["theta", "mean_delta", "se_delta", "mean_eps", "se_eps", "reps", "n", "dist", "seed"]
    emit(cfg, "sweep-theta", cols, rows, [note])
    return 0


def cmd_eps_delta(cfg):
    dist = parse_distribution(cfg["dist"])
    costs = sample_costs(dist, cfg["n"] - 1, derive_seed(cfg["seed"], "eps-delta"))
    base = dp_solve(costs, with_x=False, check_unique=False)
    rows = []
    for d in cfg["delta"]:
        r = exact_constrained_epsilon(costs, base.optimal, d)
        rows.append(dict(delta=d, eps=r.epsExact, differences=r.differences, n=cfg["n"],
                         dist=str(dist), seed=cfg["seed"]))
    note = _fit_note([(r["delta"], r["eps"]) for r in rows])
    emit(cfg, "eps-delta", ["delta", "eps", "differences", "n", "dist", "seed"], rows, [note])
    return 0


def cmd_stationary(cfg):
    dist = parse_distribution(cfg["dist"])
    c_hat, c_se = estimate_c_mc(dist, cfg["n"], cfg["reps"], cfg["seed"], cfg["jobs"])
    rows = [dict(quantity="c_mc", value=c_hat, stderr=c_se)]
    rows.append(dict(quantity="c_quadrature", value=limit_constant_c(dist), stderr=0.0))
    if dist.kind == "exp":
        rows.append(dict(quantity="c_closed_form", value=exponential_limit_constant(dist.params[0]), stderr=0.0))
    tri = simulate_triple(dist, cfg["length"], derive_seed(cfg["seed"], "triple"), cfg["tau"])
    if dist.kind == "exp":
        lam = dist.params[0]
        F = lambda x: exponential_stationary_cdf(lam, x)  # noqa: E731
    else:
        F = lambda x: stationary_cdf(dist, np.clip(x, 0, 1))  # noqa: E731
    rows.append(dict(quantity="ks_xL", value=float(stats.kstest(tri.xL, F).statistic), stderr=0.0))
    rows.append(dict(quantity="ks_xR", value=float(stats.kstest(tri.xR, F).statistic), stderr=0.0))
    corr = np.corrcoef(np.vstack([tri.xL, tri.xi, tri.xR]))
    for (i, j), name in {(0, 1): "corr_xL_xi", (0, 2): "corr_xL_xR", (1, 2): "corr_xi_xR"}.items():
        rows.append(dict(quantity=name, value=float(corr[i, j]), stderr=0.0))
    flags = dist.check_assumptions()
    emit(cfg, "stationary", ["quantity", "value", "stderr"], rows,
         [f"assumption flags: {flags if flags else 'none'}"])
    return 0


def cmd_regen(cfg):
    dist = parse_distribution(cfg["dist"])
    thetas = cfg["theta"]
    alpha_note = "alpha: needs at least two θ"
    if len(thetas) >= 2:
        est = estimate_alpha(dist, thetas, cfg["tau"], cfg["cycles"], cfg["seed"], cfg["jobs"])
        ests = est.estimates
        alpha_note = (f"alpha: estimate={est.alphaHat:.6g} ci95={est.alphaCI:.3g} "
                      f"spread_smallest3={est.spread:.4g}")
    else:
        ests = regenerative_sweep(dist, thetas, cfg["tau"], cfg["cycles"], cfg["seed"], cfg["jobs"])
    rows = [dict(theta=e.theta, delta_hat=e.deltaHat, delta_ci=e.deltaCI, eps_hat=e.epsHat,
                 eps_ci=e.epsCI, cycles=e.cycles, mean_T=e.meanT, tau=e.tau) for e in ests]
    cols = ["theta", "delta_hat", "delta_ci", "eps_hat", "eps_ci", "cycles", "mean_T", "tau"]
    emit(cfg, "regen", cols, rows, [alpha_note])
    return 0


def cmd_coupling(cfg):
    dist = parse_distribution(cfg["dist"])
    rows = []
    diag = []
    for th in cfg["theta"]:
        checks = coupling_bound_check(dist, th, cfg["tau"], cfg["samples"],
                                      derive_seed(cfg["seed"], "coupling", int(round(th * 1e9))))
        nonint = sum(not c.qCandidate for c in checks)
        ratio = max((abs(c.sL) / (th * c.kL) for c in checks), default=0.0) if th > 0 else 0.0
        rows.append(dict(theta=th, samples=len(checks), violations=0,
                         frac_non_integer=nonint / len(checks), max_ratio=ratio))
        diag.extend(json.dumps(dict(theta=th, index=c.index, sL=c.sL, kL=c.kL,
                                    integer=c.qCandidate)) for c in checks)
    emit(cfg, "coupling", ["theta", "samples", "violations", "frac_non_integer", "max_ratio"], rows)
    if cfg["out"]:
        Path(cfg["out"] + ".jsonl").write_text("\n".join(diag) + "\n")
    return 0


def cmd_nk(cfg):
    rows, c_hat = nk_table1(cfg["K"], cfg["N"], cfg["reps"], cfg["theta"], cfg["seed"], cfg["jobs"])
    note = _fit_note([(r["delta"], r["eps"]) for r in rows])
    cols = ["theta", "delta", "eps", "eps_over_delta_sq", "mean_L", "reps", "N", "K", "seed"]
    emit(cfg, "nk", cols, rows, [f"c_K estimate: {c_hat:.6g}", note])
    return 0


def cmd_pattern_swap(cfg):
    dist = parse_distribution(cfg["dist"])
    rows = pattern_swap_sweep(dist, cfg["n"], cfg["k"], cfg["alpha"], cfg["seed"])
    cols = ["alpha", "k", "n", "windows", "accepted", "rate", "mean_loss", "loss_per_window",
            "delta", "eps", "dist", "seed"]
    emit(cfg, "pattern-swap", cols, rows)
    return 0


def cmd_iid(cfg):
    dist = parse_distribution(cfg["dist"])
    rows = []
    for i, d in enumerate(cfg["delta"]):
        eps_sim, flipped = simulate_iid_epsilon(dist, cfg["n"], d, derive_seed(cfg["seed"], "iid", i))
        a, eps = iid_threshold_epsilon(dist, d)
        h1 = float(dist.pdf(1.0))
        rows.append(dict(delta=d, eps_sim=eps_sim, eps_exact=eps, a=a,
                         eps_asymptotic=d * d / (4 * h1) if h1 > 0 else float("nan"),
                         flipped=flipped, n=cfg["n"]))
    emit(cfg, "iid", ["delta", "eps_sim", "eps_exact", "eps_asymptotic", "a", "flipped", "n"], rows)
    return 0


HANDLERS = {
    "solve": cmd_solve,
    "sweep-theta": cmd_sweep_theta,
    "eps-delta": cmd_eps_delta,
    "stationary": cmd_stationary,
    "regen": cmd_regen,
    "coupling": cmd_coupling,
    "nk": cmd_nk,
    "pattern-swap": cmd_pattern_swap,
    "iid": cmd_iid,
}


def run(command, cfg):
    """Dispatch one command; returns the process exit code."""
    try:
        return HANDLERS[command](cfg)
    except InvariantViolation as exc:
        target = Path(cfg["out"] + ".diag.txt") if cfg.get("out") else Path("nearopt-diagnostic.txt")
        target.write_text(f"nearopt {__version__}\ncommand={command}\nconfig: {_echo(cfg)}\n"
                          f"invariant failure: {exc}\n")
        print(f"invariant failure: {exc} (details in {target})", file=sys.stderr)
        return EXIT_INVARIANT
    except (ValueError, OSError) as exc:
        print(f"nearopt {command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args.command, args)
    except (ValueError, OSError) as exc:
        parser.error(str(exc))
    return run(args.command, cfg)


if __name__ == "__main__":
    sys.exit(main())
