"""Command-line front end.

Every subcommand resolves its settings from built-in defaults, an optional
``--config`` file of ``key = value`` lines and command-line flags, in that
order. With ``--out DIR`` the CSV outputs, the resolved config and a
``manifest.csv`` are written to DIR; otherwise the main CSV goes to stdout.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .domain import ModelParams, Nonlinearity, build_grid, grid_for_horizon
from .experiments import (
    BUMP_SUPPORT, blowup_bump, blowup_scan, decay_exponent_fit, exponent_window, linear_run,
    scan_csv,
)
from .functionals import (
    ENERGY_CSV_HEADER, ckn_check, energy_csv, gn_ratio, hardy_check, ibp_check, psi_hardy_check,
    random_bumps, read_energy_csv, relative_violation,
)
from .solvers import (
    OUTCOME_CSV_HEADER, NumericalFailure, OutcomeKind, SolverConfig, decompose_solution,
    solve_semilinear, solve_wave,
)
from .specfun import kummer_m

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    """Invalid invocation or configuration."""


def parse_range(text: str) -> list[float]:
    """``start:end:step`` (end inclusive) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be start:end:step, got {text!r}")
        start, end, step = (float(x) for x in parts)
        if not step > 0 or end < start:
            raise ValueError(f"range needs step > 0 and end >= start, got {text!r}")
        count = int(math.floor((end - start) / step + 1e-9)) + 1
        return [float(f"{start + k * step:.12g}") for k in range(count)]
    values = [float(x) for x in text.split(",") if x.strip()]
    if not values:
        raise ValueError("empty value list")
    return values


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (list, tuple)):
        return ",".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _optional(conv: Callable) -> Callable:
    return lambda s: None if s.strip() == "" else conv(s)


def _window(text: str) -> list[float]:
    values = parse_range(text.replace(":", ",")) if text.count(":") == 1 else parse_range(text)
    if len(values) != 2 or not values[0] < values[1]:
        raise ValueError(f"window must be two increasing numbers, got {text!r}")
    return values


def _nonlinearity(text: str) -> str:
    return Nonlinearity(text.strip()).value


CONVERTERS: dict[str, Callable[[str], object]] = {
    "dim": int, "v0": float, "p": _optional(float), "nonlinearity": _nonlinearity, "r0": float,
    "r_max": float, "n": int, "h": float,
    "t_end": float, "dt": _optional(float), "cfl": float, "output_stride": int,
    "blowup_threshold": float, "energy_m": float,
    "a": float, "c": float, "z": parse_range,
    "amplitude": float, "seed": int, "count": int, "beta": float, "delta": float, "m": float,
    "t": float, "q": float,
    "p_list": parse_range, "amplitude_list": parse_range, "window": _window,
    "input": _optional(str), "column": str, "workers": int,
}

REQUIRED = object()

_SIM = {"dim": 3, "v0": 3.0, "r0": BUMP_SUPPORT, "amplitude": 1.0, "h": 0.05, "t_end": 50.0,
        "dt": None, "cfl": 0.9, "output_stride": 10, "energy_m": 1.0}

COMMANDS: dict[str, dict[str, object]] = {
    "kummer-table": {"a": REQUIRED, "c": REQUIRED, "z": REQUIRED},
    "exponent-window": {"dim": 3, "v0": 3.0, "p": None},
    "verify-inequalities": {"dim": 3, "v0": 3.0, "r_max": 20.0, "n": 2001, "count": 200, "seed": 0,
                            "beta": 0.5, "m": 1.0, "t": 1.0, "delta": 0.25, "q": 3.0},
    "simulate": {**_SIM, "p": 2.0, "nonlinearity": "none", "blowup_threshold": 1e6},
    "decompose-check": {"dim": 3, "v0": 4.0, "m": 1.5, "r_max": 101.0, "n": 2001, "t_end": 10.0,
                        "dt": None, "cfl": 0.9, "output_stride": 10, "amplitude": 1.0},
    "decay-fit": {**_SIM, "v0": 1.5, "t_end": 200.0, "input": None, "column": "E0",
                  "window": [20.0, 200.0]},
    "blowup-scan": {"dim": 3, "v0": 3.0, "nonlinearity": "unsigned", "r0": BUMP_SUPPORT,
                    "p_list": [1.6, 1.8, 2.0, 2.5], "amplitude_list": [0.05, 0.5, 5.0],
                    "h": 0.05, "t_end": 100.0, "dt": None, "cfl": 0.9, "output_stride": 20,
                    "blowup_threshold": 1e6, "window": [20.0, 200.0], "workers": 1},
}


def read_config_file(path: str, allowed: Sequence[str]) -> dict[str, object]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    out: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in allowed:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = CONVERTERS[key](value)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return out


def render_config(command: str, cfg: dict[str, object]) -> str:
    lines = [f"# critwave {command}"]
    lines += [f"{key} = {_format(cfg[key])}" for key in sorted(cfg)]
    return "\n".join(lines) + "\n"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="critwave", description="Damped-wave critical exponent toolkit.")
    parser.add_argument("--version", action="version", version=f"critwave {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, keys in COMMANDS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="file of 'key = value' lines")
        sp.add_argument("--out", help="output directory")
        for key in keys:
            sp.add_argument("--" + key.replace("_", "-"), dest=key, default=argparse.SUPPRESS,
                            type=_flag_type(key), metavar=key.upper())
    return parser


def _flag_type(key: str):
    conv = CONVERTERS[key]

    def convert(text):
        try:
            return conv(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    convert.__name__ = key
    return convert


def resolve(args: argparse.Namespace) -> dict[str, object]:
    keys = COMMANDS[args.command]
    cfg = dict(keys)
    if args.config:
        cfg.update(read_config_file(args.config, list(keys)))
    for key in keys:
        if key in vars(args):
            cfg[key] = getattr(args, key)
    missing = [k for k, v in cfg.items() if v is REQUIRED]
    if missing:
        raise UsageError("missing required value(s): " + ", ".join(missing))
    return cfg


# Subcommands return {file name: CSV text}; the first entry is the main output.

def _params(cfg, p=None, nonlinearity="none") -> ModelParams:
    return ModelParams(dim=cfg["dim"], v0=cfg["v0"], p=p if p is not None else cfg.get("p") or 2.0,
                       nonlinearity=cfg.get("nonlinearity", nonlinearity),
                       r0=cfg.get("r0", BUMP_SUPPORT))


def _solver_config(cfg) -> SolverConfig:
    return SolverConfig(t_end=cfg["t_end"], dt=cfg.get("dt"), cfl=cfg.get("cfl", 0.9),
                        output_stride=cfg.get("output_stride", 10),
                        blowup_threshold=cfg.get("blowup_threshold", 1e6),
                        energy_m=cfg.get("energy_m", 1.0))


def cmd_kummer_table(cfg) -> dict[str, str]:
    rows = ["z,M"] + [f"{z:.17g},{kummer_m(cfg['a'], cfg['c'], z):.17g}" for z in cfg["z"]]
    return {"kummer.csv": "\n".join(rows) + "\n"}


def cmd_exponent_window(cfg) -> dict[str, str]:
    params = ModelParams(dim=cfg["dim"], v0=cfg["v0"], p=cfg["p"] or 2.0)
    window = exponent_window(params, with_m=cfg["p"] is not None)
    return {"window.txt": window.line() + "\n"}


def cmd_verify_inequalities(cfg) -> dict[str, str]:
    dim = cfg["dim"]
    params = ModelParams(dim=dim, v0=cfg["v0"])
    grid = build_grid(cfg["r_max"], cfg["n"])
    bumps = random_bumps(grid, cfg["count"], b_max=0.4 * cfg["r_max"], seed=cfg["seed"])
    rows = ["check,index,lhs,rhs,violation"]
    worst: dict[str, float] = {}
    for i, w in enumerate(bumps):
        checks = {
            "hardy": hardy_check(w, cfg["beta"], dim),
            "psi_hardy": psi_hardy_check(w, cfg["m"], cfg["t"], dim),
            "ibp": ibp_check(w, cfg["beta"], cfg["delta"], cfg["t"], params),
        }
        lhs, rhs, _ = ckn_check(w, cfg["m"], cfg["q"], dim)
        checks["ckn_ratio"] = (lhs / rhs, math.inf)
        checks["gn_ratio"] = (gn_ratio(w, dim), math.inf)
        for name, (lhs, rhs) in checks.items():
            viol = relative_violation(lhs, rhs) if math.isfinite(rhs) else 0.0
            worst[name] = max(worst.get(name, 0.0), viol)
            rows.append(f"{name},{i},{lhs:.17g},{_format(rhs) if math.isfinite(rhs) else ''},"
                        f"{viol:.17g}")
    summary = ["check,max_violation"] + [f"{k},{v:.17g}" for k, v in worst.items()]
    return {"inequalities_summary.csv": "\n".join(summary) + "\n",
            "inequalities.csv": "\n".join(rows) + "\n"}


def _trajectory_outputs(traj) -> dict[str, str]:
    return {"energies.csv": energy_csv(traj.energies),
            "outcome.csv": OUTCOME_CSV_HEADER + "\n" + traj.outcome.csv_row("run") + "\n",
            "final.csv": traj.final.w.to_csv()}


def cmd_simulate(cfg) -> dict[str, str]:
    params = _params(cfg)
    config = _solver_config(cfg)
    grid = grid_for_horizon(params.r0, config.t_end, cfg["h"])
    init = blowup_bump(grid, cfg["amplitude"])
    if params.nonlinearity is Nonlinearity.NONE:
        traj = solve_wave(init, None, params, config)
    else:
        traj = solve_semilinear(init, params, config)
    out = _trajectory_outputs(traj)
    if traj.outcome.kind is OutcomeKind.FAILURE:
        raise _FailureWithOutputs(traj.outcome.reason, out)
    return out


def cmd_decompose_check(cfg) -> dict[str, str]:
    params = ModelParams(dim=cfg["dim"], v0=cfg["v0"], nonlinearity="none")
    grid = build_grid(cfg["r_max"], cfg["n"])
    init = blowup_bump(grid, cfg["amplitude"])
    dec = decompose_solution(init.w, init.wdot, None, params, _solver_config(cfg), cfg["m"])
    rows = ["t,rel_error"] + [f"{t:.17g},{e:.17g}" for t, e in zip(dec.times, dec.errors)]
    summary = f"lambda,max_rel_error\n{dec.lam:.17g},{dec.max_error:.17g}\n"
    return {"decomposition_summary.csv": summary, "decomposition.csv": "\n".join(rows) + "\n"}


def cmd_decay_fit(cfg) -> dict[str, str]:
    column = cfg["column"]
    if column not in ENERGY_CSV_HEADER[1:]:
        raise UsageError(f"column must be one of {', '.join(ENERGY_CSV_HEADER[1:])}")
    out: dict[str, str] = {}
    if cfg["input"]:
        try:
            samples = read_energy_csv(Path(cfg["input"]).read_text(encoding="utf-8"))
        except OSError as exc:
            raise UsageError(f"cannot read {cfg['input']}: {exc.strerror}") from None
    else:
        traj = linear_run(_params(cfg), cfg["amplitude"], _solver_config(cfg))
        samples = traj.energies
        out["energies.csv"] = energy_csv(samples)
    attr = dict(zip(ENERGY_CSV_HEADER, ("t", "e0", "e_psi_m", "e_psi_m1", "e_sharp", "e_star",
                                        "e_tilde")))[column]
    t = [s.t for s in samples]
    E = [getattr(s, attr) for s in samples]
    lo, hi = cfg["window"]
    slope = decay_exponent_fit(t, E, (lo, hi))
    fit = f"column,window_lo,window_hi,slope\n{column},{lo:.17g},{hi:.17g},{slope:.17g}\n"
    return {"decay_fit.csv": fit, **out}


def cmd_blowup_scan(cfg) -> dict[str, str]:
    params = ModelParams(dim=cfg["dim"], v0=cfg["v0"], p=cfg["p_list"][0],
                         nonlinearity=cfg["nonlinearity"], r0=cfg["r0"])
    config = _solver_config(cfg)
    grid = grid_for_horizon(params.r0, config.t_end, cfg["h"])
    rows = blowup_scan(cfg["p_list"], cfg["amplitude_list"], params, config, grid,
                       window=tuple(cfg["window"]), workers=cfg["workers"])
    return {"scan.csv": scan_csv(rows)}


HANDLERS: dict[str, Callable[[dict], dict[str, str]]] = {
    "kummer-table": cmd_kummer_table,
    "exponent-window": cmd_exponent_window,
    "verify-inequalities": cmd_verify_inequalities,
    "simulate": cmd_simulate,
    "decompose-check": cmd_decompose_check,
    "decay-fit": cmd_decay_fit,
    "blowup-scan": cmd_blowup_scan,
}


class _FailureWithOutputs(NumericalFailure):
    def __init__(self, reason: str, outputs: dict[str, str]):
        super().__init__(reason)
        self.outputs = outputs


def write_outputs(out_dir: str, command: str, cfg: dict, outputs: dict[str, str]) -> None:
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    config_text = render_config(command, cfg)
    files = {**outputs, "config.txt": config_text}
    for name, text in files.items():
        (path / name).write_text(text, encoding="utf-8")
    rows = ["key,value", f"artifact_version,{__version__}", f"command,{command}",
            f"config_sha256,{hashlib.sha256(config_text.encode()).hexdigest()}"]
    rows += [f"file:{name},{hashlib.sha256(text.encode()).hexdigest()}"
             for name, text in sorted(files.items())]
    (path / "manifest.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Execute one subcommand; returns the process exit code."""
    np.seterr(all="ignore")
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve(args)
        try:
            outputs = HANDLERS[args.command](cfg)
        except _FailureWithOutputs as exc:
            if args.out:
                write_outputs(args.out, args.command, cfg, exc.outputs)
            raise
    except UsageError as exc:
        print(f"critwave: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"critwave: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"critwave: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        write_outputs(args.out, args.command, cfg, outputs)
    else:
        sys.stdout.write(next(iter(outputs.values())))
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
