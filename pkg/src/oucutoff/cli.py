"""Batch experiment CLI: analyze, simulate, cutoff, figure1.

Every subcommand takes --config PATH plus optional --out DIR, --seed U64 and
--threads N overrides, writes resolved_config.json (with the package version
for provenance) into the output directory, and emits CSV (%.17g, mandatory
header) and JSON (UTF-8, sorted keys).  Outputs are byte-deterministic in
(config, seed) and independent of the thread count.

Exit codes: 0 ok, 2 validation failure, 3 numerical failure, 4 capacity.
"""

from __future__ import annotations

import argparse
import os
import sys as _sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ExperimentConfig,
    build_from_config,
    default_state,
    load_config,
    parse_config,
    resolved_dict,
)
from .cutoff import dichotomy_sweep, observable_precutoff, rate_analysis, window_profile
from .errors import (
    CapacityError,
    CutoffError,
    GenericityError,
    NumericalFailure,
    ValidationError,
)
from .cutoff import mean_condition
from .linalg import DISTINCTNESS_RTOL
from .noise import RngStream
from .models import OscillatorParams, oscillator_band_curve
from .ou import sample_stationary, simulate_path, stationary_mean
from .serialize import fmt17, json_dumps, write_csv, write_json


def version_string() -> str:
    return f"oucutoff-{__version__}"


def _prepare(args):
    raw = load_config(args.config)
    cfg = parse_config(raw, seed_override=args.seed)
    out_dir = args.out or cfg.out_dir
    if out_dir is None:
        raise ValidationError("no output directory: set 'out_dir' in the config "
                              "or pass --out")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    threads = args.threads if args.threads is not None else cfg.threads
    if threads is None:
        threads = os.cpu_count() or 1
    write_json(out / "resolved_config.json",
               resolved_dict(cfg, str(out), version_string()))
    return cfg, out, int(threads), Path(args.config).resolve().parent


def cmd_analyze(args) -> int:
    cfg, out, _, cfg_dir = _prepare(args)
    system = build_from_config(cfg, cfg_dir)
    x = default_state(system, cfg)
    report = {
        "version": version_string(),
        "dim": system.dim,
        "noise_dim": system.noise_dim,
        "eigenvalues": [[float(l.real), float(l.imag)] for l in system.eigenvalues],
        "hurwitz_validated": system.hurwitz_validated,
        "generic": system.generic,
        "normal": system.normal,
        "rho_min": system.rho_min,
        "distinctness_tolerance": DISTINCTNESS_RTOL,
        "x": x.tolist(),
        "stationary_mean": stationary_mean(system).tolist(),
        "mean_condition": bool(mean_condition(system, x)),
    }
    if system.generic and np.any(x):
        ra = rate_analysis(system, x)
        report.update({
            "rho_x": ra.rho_x,
            "c1": ra.c1,
            "c2": ra.c2,
            "active_set": ra.active.tolist(),
            "resonant_set": ra.resonant.tolist(),
            "coefficient_tolerance": ra.coefficient_tol,
        })
    else:
        report["rho_x"] = None
    write_json(out / "analyze.json", report)
    _sys.stdout.write(json_dumps(report))
    return 0


def cmd_simulate(args) -> int:
    cfg, out, _, cfg_dir = _prepare(args)
    system = build_from_config(cfg, cfg_dir)
    x = default_state(system, cfg)
    sim = cfg.simulate
    master = RngStream(cfg.seed)
    header = ["t"] + [f"x{i + 1}" for i in range(system.dim)]
    with (out / "paths.csv").open("w", encoding="utf-8", newline="\n") as fh:
        for i in range(int(sim["n_paths"])):
            path = simulate_path(system, x, float(sim["t_end"]),
                                 int(sim["n_steps"]), master.substream(1 + i))
            fh.write(",".join(header) + "\n")
            for t, state in zip(path.times, path.states):
                fh.write(",".join([fmt17(t)] + [fmt17(v) for v in state]) + "\n")
    n_stat = int(sim["n_stationary"])
    stat_header = [f"x{i + 1}" for i in range(system.dim)]
    rows = []
    if n_stat > 0:
        draws = sample_stationary(system, n_stat, master.substream(0))
        rows = [[v for v in row] for row in draws]
    write_csv(out / "stationary.csv", stat_header, rows)
    return 0


def cmd_cutoff(args) -> int:
    cfg, out, threads, cfg_dir = _prepare(args)
    system = build_from_config(cfg, cfg_dir)
    x = default_state(system, cfg)
    master = RngStream(cfg.seed)

    report = dichotomy_sweep(system, x, cfg.p, cfg.eps_grid, cfg.delta_grid,
                             cfg.mc, master.substream(10), threads=threads)
    write_csv(out / "dichotomy.csv",
              ["eps", "delta", "t", "ratio", "route", "verdict"],
              [[c.eps, c.delta, c.t, c.ratio, c.route, report.verdicts[c.delta]]
               for c in report.cells])

    verdict = {
        "version": version_string(),
        "rho_x": report.rho_x,
        "lower_route_rho": report.lower_route_rho,
        "rate_mismatch": report.rate_mismatch,
        "mean_condition": report.mean_condition_ok,
        "exact_route": report.exact_route,
        "p": report.p,
        "eps_grid": list(report.eps_grid),
        "delta_grid": list(report.delta_grid),
        "t_eps": {fmt17(e): t for e, t in report.t_eps.items()},
        "thresholds": report.thresholds,
        "verdicts": {fmt17(d): v for d, v in report.verdicts.items()},
        "mc_n": report.mc_n,
        "seed": cfg.seed,
    }

    if cfg.window is not None:
        wp = window_profile(system, x, cfg.eps_grid, cfg.window["r_grid"],
                            cfg.mc, master.substream(11), p=cfg.p,
                            threads=threads)
        write_csv(out / "window.csv",
                  ["eps", "r", "t", "ratio", "route"],
                  [[c.eps, c.r, c.t, c.ratio, c.route] for c in wp.cells])
        verdict["window"] = {fmt17(r): {"inf": lo, "sup": hi}
                             for r, (lo, hi) in wp.per_r.items()}

    if cfg.observable is not None:
        obs = observable_precutoff(system, x, cfg.observable["q"], cfg.eps_grid,
                                   cfg.observable["delta"], cfg.mc,
                                   master.substream(12))
        write_csv(out / "observable.csv",
                  ["eps", "t", "gap", "ratio", "se"],
                  [[c.eps, c.t, c.gap, c.ratio, c.se] for c in obs.cells])
        verdict["observable"] = {"q": obs.q, "delta": obs.delta,
                                 "verdict": obs.verdict, "mc_n": obs.mc_n}

    write_json(out / "verdict.json", verdict)
    return 0


def cmd_figure1(args) -> int:
    cfg, out, _, _ = _prepare(args)
    fig = cfg.figure1
    params = OscillatorParams(kappa=float(fig["kappa"]), gamma=float(fig["gamma"]),
                              varsigma=float(fig["varsigma"]))
    ts = np.linspace(float(fig["t_min"]), float(fig["t_max"]), int(fig["n_points"]))
    values = oscillator_band_curve(params, ts)
    write_csv(out / "figure1.csv", ["t", "value"],
              [[t, v] for t, v in zip(ts, values)])
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="oucutoff",
        description="Cutoff-stability experiments for Levy-driven OU systems")
    parser.add_argument("--version", action="version", version=version_string())
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, doc in (
            ("analyze", cmd_analyze, "spectral and rate report (JSON)"),
            ("simulate", cmd_simulate, "sample paths and stationary draws (CSV)"),
            ("cutoff", cmd_cutoff, "dichotomy sweep, window profile, moment gaps"),
            ("figure1", cmd_figure1, "rescaled oscillator thermalization curve")):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: hardware parallelism)")
        p.set_defaults(func=fn)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=_sys.stderr)
        return 4
    except ValidationError as exc:
        print(f"validation error: {exc}", file=_sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=_sys.stderr)
        return 3
    except CutoffError as exc:  # any stragglers count as validation problems
        print(f"error: {exc}", file=_sys.stderr)
        return 2


def console_main() -> None:
    raise SystemExit(main())
