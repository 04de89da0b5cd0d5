"""Experiment configuration: parsing, validation, system construction.

Configs are single JSON objects (documented in the README).  Validation is
strict and message-oriented -- a config mistake should explain itself -- and
the seed is mandatory: nothing in this package defaults to wall-clock
randomness.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .linalg import matrix_from_csv
from .models import JacobiParams, OscillatorParams, jacobi_system, oscillator_system
from .noise import NoiseSpec, noise_from_dict
from .ou import OUSystem, build_system

DEFAULT_EPS_GRID = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)
DEFAULT_DELTA_GRID = (0.5, 2.0)
DEFAULT_MC = 10_000

# "version" appears in emitted resolved_config.json files and is ignored on
# re-parse so resolved configs round-trip
_KNOWN_KEYS = {"seed", "system", "noise", "x", "p", "eps_grid", "delta_grid",
               "mc", "threads", "out_dir", "simulate", "window", "observable",
               "figure1", "version"}


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    seed: int
    system: dict | None
    noise: NoiseSpec | None
    x: np.ndarray | None
    p: float
    eps_grid: tuple
    delta_grid: tuple
    mc: int
    threads: int | None
    out_dir: str | None
    simulate: dict
    window: dict | None
    observable: dict | None
    figure1: dict
    raw: dict = field(repr=False, default_factory=dict)


def _require(cond, msg):
    if not cond:
        raise ValidationError(msg)


def _float_list(value, name):
    try:
        out = tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name} must be a list of numbers") from exc
    _require(len(out) > 0, f"{name} must be nonempty")
    return out


def parse_config(data: dict, seed_override=None) -> ExperimentConfig:
    """Validate a raw config dict; raises ValidationError with a reason."""
    _require(isinstance(data, dict), "config must be a JSON object")
    unknown = set(data) - _KNOWN_KEYS
    _require(not unknown, f"unknown config keys: {sorted(unknown)}")

    seed = seed_override if seed_override is not None else data.get("seed")
    _require(seed is not None,
             "config needs an explicit 'seed' (or pass --seed); "
             "wall-clock defaults are not allowed")
    _require(isinstance(seed, int) and 0 <= seed < 2 ** 64,
             "seed must be an integer in [0, 2^64)")

    system = data.get("system")
    if system is not None:
        _require(isinstance(system, dict), "'system' must be an object")
        if "preset" in system:
            _require(system["preset"] in ("oscillator", "jacobi"),
                     f"unknown preset {system['preset']!r}")
        else:
            _require("A" in system or "a_csv" in system,
                     "'system' needs either a preset or an A matrix (A / a_csv)")

    noise = None
    if data.get("noise") is not None:
        noise = noise_from_dict(data["noise"])

    x = None
    if data.get("x") is not None:
        x = np.asarray(data["x"], dtype=float).ravel()
        _require(np.all(np.isfinite(x)), "'x' must be a finite vector")

    p = float(data.get("p", 2.0))
    _require(p >= 1.0, f"order p must be >= 1, got {p}")

    eps_grid = _float_list(data.get("eps_grid", DEFAULT_EPS_GRID), "eps_grid")
    delta_grid = _float_list(data.get("delta_grid", DEFAULT_DELTA_GRID), "delta_grid")

    mc = int(data.get("mc", DEFAULT_MC))
    _require(mc >= 0, "mc must be >= 0")

    threads = data.get("threads")
    if threads is not None:
        threads = int(threads)
        _require(threads >= 1, "threads must be >= 1")

    simulate = dict(data.get("simulate", {}))
    sim_unknown = set(simulate) - {"t_end", "n_steps", "n_paths", "n_stationary"}
    _require(not sim_unknown, f"unknown simulate keys: {sorted(sim_unknown)}")
    simulate.setdefault("t_end", 10.0)
    simulate.setdefault("n_steps", 1000)
    simulate.setdefault("n_paths", 1)
    simulate.setdefault("n_stationary", 0)
    _require(float(simulate["t_end"]) > 0, "simulate.t_end must be > 0")
    _require(int(simulate["n_steps"]) >= 1, "simulate.n_steps must be >= 1")
    _require(int(simulate["n_paths"]) >= 1, "simulate.n_paths must be >= 1")
    _require(int(simulate["n_stationary"]) >= 0, "simulate.n_stationary must be >= 0")

    window = data.get("window")
    if window is not None:
        _require(isinstance(window, dict) and "r_grid" in window,
                 "'window' must be an object with an r_grid")
        window = {"r_grid": _float_list(window["r_grid"], "window.r_grid")}

    observable = data.get("observable")
    if observable is not None:
        _require(isinstance(observable, dict), "'observable' must be an object")
        obs_unknown = set(observable) - {"q", "delta"}
        _require(not obs_unknown, f"unknown observable keys: {sorted(obs_unknown)}")
        observable = {"q": float(observable.get("q", min(2.0, p))),
                      "delta": float(observable.get("delta", 2.0))}

    figure1 = dict(data.get("figure1", {}))
    fig_unknown = set(figure1) - {"kappa", "gamma", "varsigma", "t_min", "t_max",
                                  "n_points"}
    _require(not fig_unknown, f"unknown figure1 keys: {sorted(fig_unknown)}")
    figure1.setdefault("kappa", 1.0)
    figure1.setdefault("gamma", 0.1)
    figure1.setdefault("varsigma", 1.0)
    figure1.setdefault("t_min", 0.0)
    figure1.setdefault("t_max", 10.0 / float(figure1["gamma"]))
    figure1.setdefault("n_points", 2001)

    return ExperimentConfig(seed=int(seed), system=system, noise=noise, x=x,
                            p=p, eps_grid=eps_grid, delta_grid=delta_grid,
                            mc=mc, threads=threads, out_dir=data.get("out_dir"),
                            simulate=simulate, window=window,
                            observable=observable, figure1=figure1, raw=dict(data))


def load_config(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ValidationError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file is not valid JSON: {exc}") from exc


def build_from_config(cfg: ExperimentConfig, config_dir: Path | None = None) -> OUSystem:
    """Construct the OU system a config describes."""
    _require(cfg.system is not None, "this command needs a 'system' entry")
    spec = cfg.system
    if spec.get("preset") == "oscillator":
        params = spec.get("params", {})
        osc = OscillatorParams(kappa=params.get("kappa", 1.0),
                               gamma=params.get("gamma", 0.1),
                               varsigma=params.get("varsigma", 1.0))
        return oscillator_system(osc, noise=cfg.noise)
    if spec.get("preset") == "jacobi":
        params = spec.get("params", {})
        jac = JacobiParams(m=params.get("m", 5),
                           kappa=params.get("kappa", 1.0),
                           gamma=params.get("gamma", 0.01),
                           varsigma_1=params.get("varsigma_1", 1.0),
                           varsigma_m=params.get("varsigma_m", 1.0))
        return jacobi_system(jac, noise=cfg.noise)

    def load_matrix(inline_key, csv_key, name):
        if inline_key in spec:
            return np.asarray(spec[inline_key], dtype=float)
        if csv_key in spec:
            path = Path(spec[csv_key])
            if not path.is_absolute() and config_dir is not None:
                path = config_dir / path
            return matrix_from_csv(path)
        return None

    a = load_matrix("A", "a_csv", "A")
    _require(a is not None, "explicit system needs A (inline) or a_csv (path)")
    sig = load_matrix("sigma", "sigma_csv", "sigma")
    if sig is None:
        sig = np.eye(a.shape[0])
    noise = cfg.noise
    if noise is None:
        from .noise import Brownian
        noise = Brownian(dim=sig.shape[1])
    return build_system(a, sig, noise)


def default_state(sys: OUSystem, cfg: ExperimentConfig) -> np.ndarray:
    """The configured x, or the all-ones vector (generic for the presets)."""
    if cfg.x is not None:
        _require(cfg.x.shape[0] == sys.dim,
                 f"'x' has dimension {cfg.x.shape[0]}, system has {sys.dim}")
        return cfg.x
    return np.ones(sys.dim)


def resolved_dict(cfg: ExperimentConfig, out_dir: str, version: str) -> dict:
    """Canonical round-trippable form of the config, with defaults baked in."""
    out = {
        "seed": cfg.seed,
        "p": cfg.p,
        "eps_grid": list(cfg.eps_grid),
        "delta_grid": list(cfg.delta_grid),
        "mc": cfg.mc,
        "simulate": {k: cfg.simulate[k] for k in sorted(cfg.simulate)},
        "figure1": {k: cfg.figure1[k] for k in sorted(cfg.figure1)},
        "out_dir": out_dir,
        "version": version,
    }
    if cfg.system is not None:
        out["system"] = cfg.system
    if cfg.noise is not None:
        out["noise"] = cfg.noise.to_dict()
    if cfg.x is not None:
        out["x"] = cfg.x.tolist()
    if cfg.threads is not None:
        out["threads"] = cfg.threads
    if cfg.window is not None:
        out["window"] = {"r_grid": list(cfg.window["r_grid"])}
    if cfg.observable is not None:
        out["observable"] = dict(cfg.observable)
    return out
