"""Command-line experiment runner.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 a ``--check`` threshold was violated.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from . import analysis
from .cavity import CavityConvergenceError
from .experiments import (
    NOISE_CASES,
    NOISE_SCHEMES,
    CavityConfig,
    ChannelConfig,
    run_cavity,
    run_channel,
    run_noise_study,
    series_slope,
)
from .grid import FieldFormatError, save_field_csv
from .krylov import KrylovConvergenceError
from .operator import CFLError
from .output import versions, write_json, write_pgm
from .timestepper import AttemptBudgetExceeded, BranchVanishedError

log = logging.getLogger("qadvect")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CHECK = 0, 2, 3, 4
KINDS = ("channel", "cavity", "bounds", "pmin", "heat-bounds", "noise")


class ConfigError(ValueError):
    pass


class CheckFailed(Exception):
    def __init__(self, failures: list[str]):
        super().__init__("; ".join(failures))
        self.failures = failures


def _angle(value) -> float:
    """Accept radians or the strings 'pi/2', 'pi/4', 'pi/8', 'opt'."""
    if isinstance(value, str):
        text = value.strip().lower().replace(" ", "")
        if text.startswith("pi/"):
            return np.pi / float(text[3:])
        if text == "pi":
            return np.pi
        return float(text)
    return float(value)


def _build(cls, section: dict, overrides: dict):
    known = {f.name for f in fields(cls)}
    merged = {**section, **{k: v for k, v in overrides.items() if v is not None}}
    unknown = set(merged) - known
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    if "theta" in merged:
        theta = merged["theta"]
        if isinstance(theta, str) and theta.strip().lower() == "opt":
            merged["theta"] = float(analysis.theta_split(merged.get("r_max", cls().r_max)))
        else:
            merged["theta"] = _angle(theta)
    try:
        return cls(**merged)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _noise_section(doc: dict) -> dict:
    noise = doc.get("noise", {})
    out = {}
    if "state_sigma" in noise:
        out["state_noise"] = float(noise["state_sigma"])
    if "matrix_sigma" in noise:
        out["matrix_noise"] = float(noise["matrix_sigma"])
    if "seed" in noise:
        out["noise_seed"] = noise["seed"]
    return out


def _flag_overrides(args) -> dict:
    out = {}
    if getattr(args, "seed", None) is not None:
        out["seed"] = args.seed
    if getattr(args, "backend", None):
        out["backend"] = args.backend
    if getattr(args, "mode", None):
        out["mode"] = args.mode
    return out


def _write_series(rows, path, header):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _finish(out: Path, kind: str, doc: dict, seeds: dict, failures: list[str], check: bool) -> None:
    write_json({"experiment": kind, "config": doc, "seeds": seeds, "versions": versions()}, out / "manifest.json")
    for msg in failures:
        log.warning("check failed: %s", msg)
    if check and failures:
        raise CheckFailed(failures)


def cmd_channel(doc: dict, args, out: Path) -> dict:
    section = {**doc.get("channel", {}), **_noise_section(doc)}
    cfg = _build(ChannelConfig, section, _flag_overrides(args))
    res = run_channel(cfg)
    grid = res.snapshots[0].grid
    for k, snap in sorted(res.snapshots.items()):
        err = analysis.error_map(snap, res.references[k])
        save_field_csv(snap, out / f"snapshot_{k:05d}.csv")
        save_field_csv(err, out / f"error_{k:05d}.csv")
        write_pgm(snap.as_2d(), out / f"snapshot_{k:05d}.pgm")
        write_pgm(err.as_2d(), out / f"error_{k:05d}.pgm")
    res.log.to_csv(out / "success_stats.csv")
    _write_series(res.series, out / "error_series.csv", ["step", "mean_error_pct", "max_error_pct"])
    summary = {**res.summary(), "grid": [grid.nx, grid.ny]}
    write_json(summary, out / "summary.json")
    failures = []
    if summary["max_error_pct"] > 3.0:
        failures.append(f"max error {summary['max_error_pct']:.3f}% exceeds 3%")
    _finish(out, "channel", {"channel": asdict(cfg)}, {"seed": cfg.seed, "noise_seed": cfg.noise_seed},
            failures, args.check)
    return summary


def cmd_cavity(doc: dict, args, out: Path) -> dict:
    cfg = _build(CavityConfig, doc.get("cavity", {}), _flag_overrides(args))
    res = run_cavity(cfg)
    grid = res.velocity.grid
    save_field_csv(res.velocity.u, out / "velocity_u.csv", grid)
    save_field_csv(res.velocity.v, out / "velocity_v.csv", grid)
    for k, snap in sorted(res.snapshots.items()):
        save_field_csv(snap, out / f"snapshot_{k:05d}.csv")
        write_pgm(snap.as_2d(), out / f"snapshot_{k:05d}.pgm")
    res.log.to_csv(out / "success_stats.csv")
    _write_series(res.wall_drift, out / "wall_drift.csv", ["step", "max_wall_drift"])
    summary = {
        "successes": res.log.n_successes,
        "failures": res.log.n_failures,
        "max_norm_error": res.max_norm_error,
        "max_wall_drift": res.max_wall_drift(),
        "velocity_divergence": res.divergence,
        "dt": res.dt,
    }
    write_json(summary, out / "summary.json")
    failures = []
    if res.max_norm_error > 1e-10:
        failures.append(f"norm drift {res.max_norm_error:.3g} exceeds 1e-10")
    if res.max_wall_drift() > 1e-6:
        failures.append(f"wall drift {res.max_wall_drift():.3g} exceeds 1e-6")
    if res.divergence > 1e-10 * (grid.nx - 1):
        failures.append(f"velocity divergence {res.divergence:.3g} too large")
    _finish(out, "cavity", {"cavity": asdict(cfg)}, {"seed": cfg.seed}, failures, args.check)
    return summary


def _sweep_axes(section: dict, r_lo: float, r_hi: float):
    r_vals = np.linspace(section.get("r_min", r_lo), section.get("r_max", r_hi), int(section.get("r_points", 100)))
    t_vals = np.linspace(
        _angle(section.get("theta_min", np.pi / 100)),
        _angle(section.get("theta_max", np.pi / 2)),
        int(section.get("theta_points", 100)),
    )
    return r_vals, t_vals


def cmd_bounds(doc: dict, args, out: Path) -> dict:
    section = doc.get("bounds", {})
    r_vals, t_vals = _sweep_axes(section, 0.01, 1.0)
    points = analysis.sweep(analysis.advection_error_bound, r_vals, t_vals)
    analysis.write_sweep_csv(points, out / "advection_bound.csv")
    r_lin = np.linspace(0.01, 0.5, 50)
    v_lin = analysis.advection_error_bound(r_lin, np.pi / 2)
    slope, intercept = np.polyfit(r_lin, v_lin, 1)
    worst = float(np.max(np.abs(v_lin - (slope * r_lin + intercept))) / np.max(v_lin))
    summary = {"points": len(points), "linear_fit_slope": slope, "linear_fit_max_rel_deviation": worst}
    write_json(summary, out / "summary.json")
    failures = [] if worst <= 0.01 else [f"theta=pi/2 row deviates {100 * worst:.2f}% from a line"]
    _finish(out, "bounds", {"bounds": section}, {}, failures, args.check)
    return summary


def cmd_pmin(doc: dict, args, out: Path) -> dict:
    section = doc.get("pmin", {})
    r_vals, t_vals = _sweep_axes(section, 0.01, 1.0)
    points = analysis.sweep(analysis.p_min, r_vals, t_vals)
    # The worst-case-optimal angle for each r, as highlighted in the surface plot.
    r_ref = np.unique(np.append(r_vals, 0.1))
    points += [analysis.BoundPoint(float(r), float(analysis.theta_split(r)),
                                   float(analysis.p_min(r, analysis.theta_split(r)))) for r in r_ref]
    analysis.write_sweep_csv(points, out / "p_min.csv")
    ref = float(analysis.p_min(0.1, analysis.theta_split(0.1)))
    summary = {"points": len(points), "p_min_r0.1_theta_opt": ref}
    write_json(summary, out / "summary.json")
    failures = [] if abs(ref - 0.999985) <= 1e-6 else [f"P_min(0.1, opt) = {ref}"]
    _finish(out, "pmin", {"pmin": section}, {}, failures, args.check)
    return summary


def cmd_heat_bounds(doc: dict, args, out: Path) -> dict:
    section = doc.get("heat_bounds", {})
    r_vals = np.linspace(section.get("r_min", 0.005), section.get("r_max", 0.5), int(section.get("r_points", 100)))
    t_vals = np.linspace(
        _angle(section.get("theta_min", np.pi / 100)),
        _angle(section.get("theta_max", np.pi / 2)),
        int(section.get("theta_points", 100)),
    )
    points = analysis.sweep(analysis.heat_error_bound, r_vals, t_vals)
    analysis.write_sweep_csv(points, out / "heat_bound.csv", r_label="r_h")
    landmarks = {
        "r_h=1e-4": float(analysis.heat_error_bound(1e-4, np.pi / 2)),
        "r_h=1/3": float(analysis.heat_error_bound(1 / 3, np.pi / 2)),
        "r_h=0.2499": float(analysis.heat_error_bound(0.2499, np.pi / 2)),
        "r_h=0.4999": float(analysis.heat_error_bound(0.4999, np.pi / 2)),
    }
    summary = {"points": len(points), "poles": sum(np.isinf(p.value) for p in points), "landmarks": landmarks}
    write_json(summary, out / "summary.json")
    failures = []
    if abs(landmarks["r_h=1e-4"] - 2.0) > 0.1:
        failures.append("bound near r_h=0 is not ~2")
    if abs(landmarks["r_h=1/3"] - 6.2) > 0.31:
        failures.append("bound at r_h=1/3 is not ~6.2")
    _finish(out, "heat-bounds", {"heat_bounds": section}, {}, failures, args.check)
    return summary


def cmd_noise(doc: dict, args, out: Path) -> dict:
    section = {**doc.get("channel", {}), **doc.get("noise_study", {})}
    cfg = _build(ChannelConfig, section, _flag_overrides(args))
    noise = doc.get("noise", {})
    cases = {
        "none": (0.0, 0.0),
        "state": (float(noise.get("state_sigma", NOISE_CASES["state"][0])), 0.0),
        "matrix": (0.0, float(noise.get("matrix_sigma", NOISE_CASES["matrix"][1]))),
    }
    if "seed" in noise:
        cfg.noise_seed = noise["seed"]
    results = run_noise_study(cfg, NOISE_SCHEMES, cases, progress=lambda s, c: log.info("noise run %s/%s", s, c))
    rows = []
    summary: dict = {}
    for scheme, per_case in results.items():
        summary[scheme] = {}
        for case, series in per_case.items():
            rows += [(scheme, case, k, m, x) for k, m, x in series]
            summary[scheme][case] = {"final_mean_error_pct": series[-1][1], "slope_per_step": series_slope(series)}
    _write_series(rows, out / "noise_series.csv", ["scheme", "case", "step", "mean_error_pct", "max_error_pct"])
    write_json(summary, out / "summary.json")
    failures = []
    for scheme, s in summary.items():
        if s["matrix"]["slope_per_step"] <= s["none"]["slope_per_step"]:
            failures.append(f"{scheme}: matrix-noise slope not steeper than noise-free")
    _finish(out, "noise", {"channel": asdict(cfg), "noise": noise}, {"seed": cfg.seed, "noise_seed": cfg.noise_seed},
            failures, args.check)
    return summary


COMMANDS = {
    "channel": cmd_channel,
    "cavity": cmd_cavity,
    "bounds": cmd_bounds,
    "pmin": cmd_pmin,
    "heat-bounds": cmd_heat_bounds,
    "noise": cmd_noise,
}


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", help="output directory (default: runs/<experiment>)")
    common.add_argument("--seed", type=int, help="sampling seed")
    common.add_argument("--backend", choices=["dense", "krylov"])
    common.add_argument("--mode", choices=["sampled", "forced-success"])
    common.add_argument("--check", action="store_true", help="exit 4 if acceptance thresholds fail")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="qadvect", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in KINDS:
        sub.add_parser(name, parents=[common], help=f"run the {name} experiment")
    sub.add_parser("run", parents=[common], help="run the experiment named in --config")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        doc = _load_config(args.config)
        kind = args.command
        if kind == "run":
            if not args.config:
                raise ConfigError("run needs --config")
            kind = doc.get("experiment")
            if kind not in COMMANDS:
                raise ConfigError(f"config 'experiment' must be one of {list(COMMANDS)}, got {kind!r}")
        out = Path(args.out or doc.get("out") or Path("runs") / kind)
        out.mkdir(parents=True, exist_ok=True)
        summary = COMMANDS[kind](doc, args, out)
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (ConfigError, CFLError, FieldFormatError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (
        AttemptBudgetExceeded,
        BranchVanishedError,
        CavityConvergenceError,
        KrylovConvergenceError,
        np.linalg.LinAlgError,
        RuntimeError,
    ) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(json.dumps({"experiment": kind, "out": str(out)}, indent=None))
    log.info("summary: %s", summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
