"""Command line front end: ``fracwave {sample,sigma,converge,solve,admiss,verify}``.

Every run reads one TOML config (all keys optional, see ``DEFAULTS``), applies
``--set section.key=value`` overrides, and writes CSV/JSON/binary outputs plus
a ``manifest.json`` into the output directory.  Exit codes: 0 success,
2 config error, 3 numerical failure, 4 a FAIL-classified report.
"""

from __future__ import annotations

import argparse
import copy
import csv
import datetime as _dt
import hashlib
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

try:
    import tomllib as tomli
except ImportError:  # Python < 3.11
    import tomli

from . import __version__
from .errors import (DimensionUnsupported, FracWaveError, GridAliasing, GridMismatch, HypothesisViolated,
                     NotAdmissible, RegimeMismatch)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_FAIL = 0, 2, 3, 4

DEFAULTS = {
    "model": {"d": 2, "hurst": [0.5, 0.5, 0.5], "mode": "auto", "field": "psi", "truncation": "ball"},
    "lattice": {"n_levels": [3, 4, 5, 6], "cells_per_octave": 4, "low_octaves": 4, "time_cell_cap": 0.5},
    "grid": {"points_per_axis": 128, "half_width": 2.0, "domain_D_half_width": 0.5},
    "time": {"T_max": 0.5, "steps": 256, "t_values": [0.5, 0.75, 1.0]},
    "mc": {"realizations": 1, "seed": 0},
    "solver": {"s": "1/2", "q": "auto", "r": "auto", "tol": 1e-8, "max_iter": 64, "alpha": 0.2,
               "renormalize": True, "probe_uniqueness": True},
    "rho": {"radius": 0.5, "amplitude": 1.0},
    "data": {"phi0_amplitude": 0.2, "phi0_width": 0.25, "phi1_amplitude": 0.0},
    "sigma": {"tol": 1e-6},
    "converge": {"study": "solver", "order": 1, "alpha": "auto", "t": 1.0},
    "admiss": {"d_range": [2, 3, 4, 5, 6, 7], "s_lo": "1/4", "s_hi": "1/2", "s_count": 20},
    "output": {"dir": "fracwave-out", "formats": ["csv", "json"]},
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def _merge(base, over, path=""):
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path}{k}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{path}{k} must be a section")
            _merge(base[k], v, f"{path}{k}.")
        else:
            base[k] = v
    return base


def _parse_value(text: str):
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def load_config(path=None, overrides=()) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path, "rb") as fh:
                _merge(cfg, tomli.load(fh))
        except (OSError, tomli.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for item in overrides:
        key, sep, val = item.partition("=")
        if not sep or "." not in key:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        sec, _, name = key.strip().partition(".")
        _merge(cfg, {sec: {name: _parse_value(val.strip())}})
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    m = cfg["model"]
    if not isinstance(m["d"], int) or m["d"] < 1:
        raise ConfigError("model.d must be a positive integer")
    if len(m["hurst"]) != m["d"] + 1:
        raise ConfigError(f"model.hurst needs d+1 = {m['d'] + 1} entries")
    if not all(0 < float(h) < 1 for h in m["hurst"]):
        raise ConfigError("Hurst indices must lie in (0, 1)")
    if m["mode"] not in ("auto", "REGULAR", "WICK"):
        raise ConfigError("model.mode must be auto, REGULAR or WICK")
    if m["field"] not in ("psi", "b"):
        raise ConfigError("model.field must be psi or b")
    if m["truncation"] not in ("ball", "box"):
        raise ConfigError("model.truncation must be ball or box")
    lat = cfg["lattice"]
    if not lat["n_levels"] or not all(isinstance(n, int) and n >= 0 for n in lat["n_levels"]):
        raise ConfigError("lattice.n_levels must be a non-empty list of integers >= 0")
    if lat["cells_per_octave"] < 1 or lat["low_octaves"] < 0:
        raise ConfigError("lattice.cells_per_octave >= 1 and lattice.low_octaves >= 0 required")
    g = cfg["grid"]
    if g["points_per_axis"] < 4 or g["half_width"] <= 0 or g["domain_D_half_width"] <= 0:
        raise ConfigError("grid sizes must be positive (points_per_axis >= 4)")
    t = cfg["time"]
    if t["T_max"] < 0 or t["steps"] < 1 or any(v < 0 for v in t["t_values"]):
        raise ConfigError("time.T_max >= 0, time.steps >= 1 and t_values >= 0 required")
    if cfg["mc"]["realizations"] < 0:
        raise ConfigError("mc.realizations must be >= 0")
    s = cfg["solver"]
    if s["tol"] <= 0 or s["max_iter"] < 1:
        raise ConfigError("solver.tol > 0 and solver.max_iter >= 1 required")
    if cfg["converge"]["study"] not in ("solver", "cauchy"):
        raise ConfigError("converge.study must be solver or cauchy")
    if cfg["converge"]["order"] not in (1, 2):
        raise ConfigError("converge.order must be 1 or 2")
    try:
        Fraction(str(s["s"]))
        Fraction(str(cfg["admiss"]["s_lo"]))
        Fraction(str(cfg["admiss"]["s_hi"]))
    except ValueError as exc:
        raise ConfigError(f"bad rational in config: {exc}") from exc


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode()).hexdigest()


# ---------------------------------------------------------------------------
# output helpers


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class Run:
    """Output directory, file index and manifest of one subcommand run."""

    def __init__(self, command: str, cfg: dict, out_dir=None):
        self.command = command
        self.cfg = cfg
        self.dir = Path(out_dir or cfg["output"]["dir"])
        self.dir.mkdir(parents=True, exist_ok=True)
        self.hash = config_hash(cfg)
        self.files = []
        self.tasks = {}
        self.started = _dt.datetime.now(_dt.timezone.utc).isoformat()

    def _register(self, path: Path):
        self.files.append({"file": path.name, "sha256": hashlib.sha256(path.read_bytes()).hexdigest()})

    def write_csv(self, name: str, header, rows):
        path = self.dir / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])
        self._register(path)
        return path

    def write_json(self, name: str, obj):
        path = self.dir / name
        path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
        self._register(path)
        return path

    def write_field(self, stem: str, field):
        """Flat little-endian float64, time-major, plus a JSON sidecar."""
        path = self.dir / f"{stem}.bin"
        np.ascontiguousarray(field.values, dtype="<f8").tofile(path)
        self._register(path)
        side = {"shape": list(field.values.shape), "dtype": "float64-le", "order": "time-major C",
                "times": field.times, "grid": field.grid.as_dict(), "meta": field.meta, "config_hash": self.hash}
        self.write_json(f"{stem}.json", side)

    def finish(self, status: str):
        man = {"command": self.command, "config_hash": self.hash, "code_version": __version__,
               "started": self.started, "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
               "status": status, "tasks": self.tasks, "files": self.files, "config": self.cfg}
        (self.dir / "manifest.json").write_text(json.dumps(_jsonable(man), indent=2, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, Fraction):
        return str(obj)
    if hasattr(obj, "value") and hasattr(obj, "name"):
        return obj.value
    return obj


# ---------------------------------------------------------------------------
# builders


def _hurst(cfg):
    from .lattice import HurstVector

    return HurstVector(tuple(float(h) for h in cfg["model"]["hurst"]))


def _lattice(cfg, top):
    from .lattice import build_lattice

    lat = cfg["lattice"]
    d = cfg["model"]["d"]
    cap = lat["time_cell_cap"]
    widths = (cap,) * (d + 1) if d == 1 else (cap,) + (None,) * d
    return build_lattice(top, lat["cells_per_octave"], d + 1, low_octaves=lat["low_octaves"], max_width=widths)


def _grid(cfg):
    from .field import GridSpec

    g = cfg["grid"]
    return GridSpec(cfg["model"]["d"], g["points_per_axis"], float(g["half_width"]))


def _times(cfg):
    t = cfg["time"]
    return np.linspace(0.0, float(t["T_max"]), int(t["steps"]) + 1)


def _mode(cfg, hurst):
    from .lattice import Regime
    from .solver import Mode

    if cfg["model"]["mode"] == "auto":
        return Mode.REGULAR if hurst.regime is Regime.REGULAR else Mode.WICK
    return Mode(cfg["model"]["mode"])


def _data_and_rho(cfg, grid):
    from .solver import CutoffRho, InitialData

    dat = cfg["data"]
    r2 = grid.radius() ** 2
    bump = np.exp(-r2 / (2 * float(dat["phi0_width"]) ** 2))
    data = InitialData(float(dat["phi0_amplitude"]) * bump, float(dat["phi1_amplitude"]) * bump, grid,
                       float(Fraction(str(cfg["solver"]["s"]))))
    rc = cfg["rho"]
    rho = CutoffRho.bump(grid, float(rc["radius"]), float(rc["amplitude"])) if rc["amplitude"] else CutoffRho.zero(grid)
    return data, rho


# ---------------------------------------------------------------------------
# subcommands


def cmd_sample(cfg, run: Run) -> int:
    from .field import sample_b_n, sample_psi_n

    hurst = _hurst(cfg)
    levels = sorted(set(cfg["lattice"]["n_levels"]))
    R = int(cfg["mc"]["realizations"])
    seed = int(cfg["mc"]["seed"])
    if R == 0:
        run.tasks["sample"] = "no realizations requested"
        return EXIT_OK
    lattice = _lattice(cfg, max(levels))
    grid = _grid(cfg)
    times = _times(cfg)
    fn = sample_psi_n if cfg["model"]["field"] == "psi" else sample_b_n
    for k in range(R):
        for n in levels:
            f = fn(hurst, n, lattice, grid, times, seed, k, truncation=cfg["model"]["truncation"])
            run.write_field(f"{cfg['model']['field']}_n{n}_r{k}", f)
    run.tasks["sample"] = f"{R} realizations x {len(levels)} levels"
    return EXIT_OK


def cmd_sigma(cfg, run: Run) -> int:
    from .renorm import sigma_asymptotic_fit, sigma_curve

    hurst = _hurst(cfg)
    curve = sigma_curve(hurst, cfg["lattice"]["n_levels"], cfg["time"]["t_values"], float(cfg["sigma"]["tol"]))
    run.write_csv("sigma.csv", ["n", "t", "sigma", "tol"], curve.rows())
    try:
        fit = sigma_asymptotic_fit(curve).as_dict()
        fit["status"] = "fitted"
    except ValueError as exc:
        fit = {"status": "insufficient_data", "reason": str(exc)}
    fit.update(kappa=hurst.kappa, regime=fit.get("regime"), hurst=list(hurst.h))
    run.write_json("sigma_fit.json", fit)
    run.tasks["sigma"] = fit["status"]
    return EXIT_OK


def cmd_converge(cfg, run: Run) -> int:
    hurst = _hurst(cfg)
    levels = sorted(cfg["lattice"]["n_levels"])
    conv = cfg["converge"]
    if len(levels) < 2:
        run.write_csv("rates.csv", ["n_from", "n_to", "norm", "value", "error"], [])
        run.tasks["converge"] = "single level: no differences"
        return EXIT_OK
    if conv["study"] == "solver":
        from .solver import convergence_study

        grid = _grid(cfg)
        data, rho = _data_and_rho(cfg, grid)
        sol = cfg["solver"]
        rep = convergence_study(hurst, levels, int(cfg["mc"]["seed"]), data, rho, _times(cfg), _mode(cfg, hurst),
                                alpha=float(sol["alpha"]), domain_half_width=float(cfg["grid"]["domain_D_half_width"]),
                                tol=float(sol["tol"]), max_iter=int(sol["max_iter"]),
                                probe_uniqueness=bool(sol["probe_uniqueness"]),
                                lattice=_lattice(cfg, max(levels)))
        rows = [(a, b, rep.norm, v, "") for a, b, v in zip(levels[:-1], levels[1:], rep.differences)]
        run.write_csv("rates.csv", ["n_from", "n_to", "norm", "value", "error"], rows)
        run.write_json("convergence.json", rep.as_dict())
        passed = rep.passed
    else:
        from .experiments import cauchy_decay_monte_carlo, cauchy_decay_quadrature

        alpha = None if conv["alpha"] == "auto" else float(conv["alpha"])
        order = int(conv["order"])
        t = float(conv["t"])
        if hurst.d == 1 and int(cfg["mc"]["realizations"]) <= 1:
            rep = cauchy_decay_quadrature(hurst, levels, t, alpha=alpha, order=order,
                                          domain_half_width=float(cfg["grid"]["domain_D_half_width"]))
        else:
            rep = cauchy_decay_monte_carlo(hurst, levels, t, _grid(cfg), int(cfg["mc"]["realizations"]),
                                           int(cfg["mc"]["seed"]), alpha=alpha, orders=(order,),
                                           domain_half_width=float(cfg["grid"]["domain_D_half_width"]),
                                           lattice=_lattice(cfg, max(levels)))[order]
        norm = f"W-{rep.alpha * order:.6g},2_D^2"
        run.write_csv("rates.csv", ["n_from", "n_to", "norm", "value", "error"],
                      [(a, b, norm, v, e) for a, b, v, e in rep.rows()])
        run.write_json("convergence.json", rep.as_dict())
        passed = rep.passed
    run.tasks["converge"] = "PASS" if passed else "FAIL"
    return EXIT_OK if passed else EXIT_FAIL


def cmd_solve(cfg, run: Run) -> int:
    from .solver import solve_full

    hurst = _hurst(cfg)
    grid = _grid(cfg)
    data, rho = _data_and_rho(cfg, grid)
    sol = cfg["solver"]
    n = max(cfg["lattice"]["n_levels"])
    s = Fraction(str(sol["s"]))
    q = None if sol["q"] == "auto" else sol["q"]
    r = None if sol["r"] == "auto" else sol["r"]
    if (q is None) != (r is None):
        raise ConfigError("solver.q and solver.r must both be auto or both be given")
    res = solve_full(hurst, n, data, rho, _times(cfg), int(cfg["mc"]["seed"]), _mode(cfg, hurst),
                     lattice=_lattice(cfg, n), s=s, tol=float(sol["tol"]), max_iter=int(sol["max_iter"]),
                     renormalize=bool(sol["renormalize"]), probe_uniqueness=bool(sol["probe_uniqueness"]),
                     q=q, r=r)
    for name in ("u", "v", "psi"):
        run.write_field(f"{name}_n{n}", getattr(res, name))
    tr = res.trace.as_dict()
    tr.update(T0=res.u.times[-1], q=str(res.q), r=str(res.r), seed=int(cfg["mc"]["seed"]), n_level=n,
              config_hash=run.hash)
    run.write_json("trace.json", tr)
    run.tasks["solve"] = "converged" if res.trace.converged else "not converged"
    return EXIT_OK if res.trace.converged else EXIT_NUMERICAL


def cmd_admiss(cfg, run: Run) -> int:
    from .admiss import optimality_scan, rational_grid, render

    a = cfg["admiss"]
    grid = rational_grid(str(a["s_lo"]), str(a["s_hi"]), int(a["s_count"]))
    rows = optimality_scan(a["d_range"], grid)
    header = ["d", "s", "q", "r", "qt", "rt", "ratio", "ratio_feasible", "q_strict", "scaling_feasible",
              "construct_ok"]
    run.write_csv("admiss.csv", header,
                  ([r.d, str(r.s), render(r.q_at_r_max) if r.q_at_r_max is not None else "none", render(r.r_max),
                    render(r.qt_at_rt_min) if r.qt_at_rt_min is not None else "none", render(r.rt_min),
                    render(r.ratio), r.ratio_feasible, r.q_strict, r.scaling_feasible, r.construct_ok]
                   for r in rows))
    run.tasks["admiss"] = f"{len(rows)} rows"
    return EXIT_OK


def cmd_verify(cfg, run: Run, only=None, quick=False) -> int:
    from .acceptance import run_acceptance

    results = run_acceptance(only=only, quick=quick, stream=sys.stdout)
    run.write_json("acceptance.json", [r.as_dict() for r in results])
    run.tasks["verify"] = {r.name: ("PASS" if r.passed else "FAIL") for r in results}
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


COMMANDS = {"sample": cmd_sample, "sigma": cmd_sigma, "converge": cmd_converge, "solve": cmd_solve,
            "admiss": cmd_admiss, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracwave", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("-c", "--config", help="TOML config file")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config key (repeatable)")
        sp.add_argument("-o", "--out", help="output directory (overrides output.dir)")
        if name == "verify":
            sp.add_argument("--only", help="comma-separated criterion numbers")
            sp.add_argument("--quick", action="store_true", help="reduced sizes for a smoke run")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    run = Run(args.command, cfg, args.out)
    try:
        if args.command == "verify":
            only = [int(v) for v in args.only.split(",")] if args.only else None
            code = cmd_verify(cfg, run, only, args.quick)
        else:
            code = COMMANDS[args.command](cfg, run)
    except (ConfigError, RegimeMismatch, NotAdmissible, HypothesisViolated, DimensionUnsupported, GridAliasing,
            GridMismatch) as exc:
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        run.tasks["error"] = f"{type(exc).__name__}: {exc}"
        run.finish("config_error")
        return EXIT_CONFIG
    except (FracWaveError, ArithmeticError, FloatingPointError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        run.tasks["error"] = f"{type(exc).__name__}: {exc}"
        run.finish("numerical_failure")
        return EXIT_NUMERICAL
    run.finish({EXIT_OK: "ok", EXIT_FAIL: "fail", EXIT_NUMERICAL: "numerical_failure"}.get(code, "error"))
    return code


if __name__ == "__main__":
    sys.exit(main())
