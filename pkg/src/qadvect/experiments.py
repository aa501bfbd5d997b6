"""End-to-end experiment drivers: channel flow, lid-driven cavity, noise study.

These return in-memory results; :mod:`qadvect.cli` handles files.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np

from . import analysis
from .cavity import CavitySpec, check_divergence, solve_lid_cavity
from .embedding import Backend, HermitianEmbedding, embed
from .grid import (
    Boundary,
    ScalarField,
    VelocityField,
    from_amplitudes,
    init_sine,
    load_velocity_csv,
    make_grid,
    poiseuille_velocity,
    to_statevector,
)
from .noise import perturb_matrix, perturb_state
from .operator import Family, SparseOperator, StencilSpec, assemble_advection, time_step_for_cfl
from .timestepper import Mode, RunLog, make_rng, run

log = logging.getLogger(__name__)


def _validate(cfg) -> None:
    StencilSpec(Family(cfg.family), cfg.order)
    Backend(cfg.backend)
    Mode(cfg.mode)
    if not 0.0 < cfg.theta <= np.pi / 2 + 1e-15:
        raise ValueError(f"theta must lie in (0, pi/2], got {cfg.theta}")
    if not 0.0 < cfg.r_max <= 1.0:
        raise ValueError(f"r_max must lie in (0, 1], got {cfg.r_max}")
    if cfg.steps < 1:
        raise ValueError("steps must be at least 1")


def theta_optimal(r: float) -> float:
    """Angle maximizing the worst-case success probability."""
    return float(analysis.theta_split(r))


@dataclass
class ChannelConfig:
    nx: int = 64
    ny: int = 64
    r_max: float = 0.1
    theta: float = np.pi / 2
    steps: int = 2000
    family: str = "central"
    order: int = 2
    backend: str = "krylov"
    mode: str = "sampled"
    seed: int | None = 0
    state_noise: float = 0.0
    matrix_noise: float = 0.0
    noise_seed: int | None = 1
    series_every: int = 50
    snapshots: list[int] | None = None

    def __post_init__(self):
        _validate(self)

    def snapshot_steps(self) -> list[int]:
        if self.snapshots is not None:
            return sorted(self.snapshots)
        return [0, self.steps // 3, 2 * self.steps // 3, self.steps]


@dataclass
class ChannelResult:
    config: ChannelConfig
    log: RunLog
    dt: float
    init_norm: float
    snapshots: dict[int, ScalarField]
    references: dict[int, ScalarField]
    series: list[tuple[int, float, float]] = field(default_factory=list)
    embedding: HermitianEmbedding | None = None

    @property
    def final_step(self) -> int:
        return self.config.steps

    def max_error(self) -> float:
        k = self.final_step
        return analysis.max_abs_error(self.snapshots[k], self.references[k])

    def mean_error(self) -> float:
        k = self.final_step
        return analysis.mean_abs_error(self.snapshots[k], self.references[k])

    def summary(self) -> dict:
        lg = self.log
        return {
            "max_error_pct": self.max_error(),
            "mean_error_pct": self.mean_error(),
            "successes": lg.n_successes,
            "failures": lg.n_failures,
            "attempts": lg.attempts,
            "success_fraction": lg.success_fraction(),
            "mean_p_success": lg.mean_p_success(),
            "observed_success_odds": (lg.n_successes / lg.n_failures) if lg.n_failures else float("inf"),
            "p_min": float(analysis.p_min(self.config.r_max, self.config.theta)),
            "dt": self.dt,
            "time": self.dt * self.config.steps,
        }


def _stencil(family: str, order: int) -> StencilSpec:
    return StencilSpec(Family(family), order)


def channel_operator(cfg: ChannelConfig) -> tuple[SparseOperator, VelocityField, float]:
    grid = make_grid(cfg.nx, cfg.ny, Boundary.PERIODIC, Boundary.WALL)
    velocity = poiseuille_velocity(grid, 1.0)
    dt = time_step_for_cfl(grid, velocity, cfg.r_max)
    A = assemble_advection(grid, velocity, _stencil(cfg.family, cfg.order), dt)
    return A, velocity, dt


def run_channel(cfg: ChannelConfig, emb: HermitianEmbedding | None = None) -> ChannelResult:
    A, velocity, dt = channel_operator(cfg)
    grid = velocity.grid
    clean = init_sine(grid, "x")
    init_norm = float(np.linalg.norm(clean.values))
    noise_rng = make_rng(cfg.noise_seed)
    start = perturb_state(clean, cfg.state_noise, noise_rng)
    sv = to_statevector(start)
    if emb is None:
        A = perturb_matrix(A, cfg.matrix_noise, noise_rng).padded(sv.amplitudes.size)
        emb = embed(A, cfg.theta, Backend(cfg.backend))

    series: list[tuple[int, float, float]] = []

    def record(k: int, state: np.ndarray) -> None:
        if k % cfg.series_every == 0 or k == cfg.steps:
            ref = analysis.channel_analytical(grid, velocity, k * dt, init_norm)
            err = analysis.error_map(state[: grid.size], ref).values
            series.append((k, float(err.mean()), float(err.max())))

    record(0, sv.amplitudes)
    logbook = run(
        sv.amplitudes,
        emb,
        cfg.steps,
        rng=make_rng(cfg.seed),
        seed=cfg.seed,
        snapshot_schedule=cfg.snapshot_steps(),
        mode=Mode(cfg.mode),
        on_success=record,
    )
    snaps = {k: from_amplitudes(grid, s) for k, s in logbook.snapshots.items()}
    refs = {k: analysis.channel_analytical(grid, velocity, k * dt, init_norm) for k in snaps}
    return ChannelResult(cfg, logbook, dt, init_norm, snaps, refs, series, emb)


@dataclass
class CavityConfig:
    n: int = 64
    Re: float = 100.0
    r_max: float = 0.1
    theta: float = np.pi / 2
    steps: int = 2800
    family: str = "upwind"
    order: int = 2
    backend: str = "dense"
    mode: str = "forced-success"
    seed: int | None = 0
    velocity_u: str | None = None
    velocity_v: str | None = None
    snapshots: list[int] | None = None
    solver_tol: float = 1e-10

    def __post_init__(self):
        _validate(self)

    def snapshot_steps(self) -> list[int]:
        if self.snapshots is not None:
            return sorted(self.snapshots)
        return [0, 700, 1400, 2100, 2800] if self.steps == 2800 else [0, self.steps]


@dataclass
class CavityResult:
    config: CavityConfig
    velocity: VelocityField
    log: RunLog
    dt: float
    snapshots: dict[int, ScalarField]
    initial_amplitudes: np.ndarray
    wall_drift: list[tuple[int, float]]
    max_norm_error: float
    divergence: float

    def max_wall_drift(self) -> float:
        return max(d for _, d in self.wall_drift)


def cavity_velocity(cfg: CavityConfig) -> VelocityField:
    if cfg.velocity_u and cfg.velocity_v:
        grid = make_grid(cfg.n, cfg.n, Boundary.WALL, Boundary.WALL)
        velocity = load_velocity_csv(cfg.velocity_u, cfg.velocity_v, grid)
        check_divergence(velocity)
    else:
        velocity = solve_lid_cavity(CavitySpec(n=cfg.n, Re=cfg.Re, tol=cfg.solver_tol))
    return velocity


def run_cavity(cfg: CavityConfig, velocity: VelocityField | None = None) -> CavityResult:
    if velocity is None:
        velocity = cavity_velocity(cfg)
    div = float(np.abs(_interior_divergence(velocity)).max())
    velocity = velocity.normalized()
    grid = velocity.grid
    dt = time_step_for_cfl(grid, velocity, cfg.r_max)
    A = assemble_advection(grid, velocity, _stencil(cfg.family, cfg.order), dt)
    sv = to_statevector(init_sine(grid, "y"))
    emb = embed(A.padded(sv.amplitudes.size), cfg.theta, Backend(cfg.backend))
    wall = np.flatnonzero(grid.wall_mask())
    start = sv.amplitudes.copy()
    drift: list[tuple[int, float]] = []
    norm_err = [0.0]

    def track(k: int, state: np.ndarray) -> None:
        drift.append((k, float(np.abs(state[wall] - start[wall]).max())))
        norm_err[0] = max(norm_err[0], abs(float(np.linalg.norm(state)) - 1.0))

    logbook = run(
        start,
        emb,
        cfg.steps,
        rng=make_rng(cfg.seed),
        seed=cfg.seed,
        snapshot_schedule=cfg.snapshot_steps(),
        mode=Mode(cfg.mode),
        on_success=track,
    )
    snaps = {k: from_amplitudes(grid, s) for k, s in logbook.snapshots.items()}
    return CavityResult(cfg, velocity, logbook, dt, snaps, start, drift, norm_err[0], div)


def _interior_divergence(velocity: VelocityField) -> np.ndarray:
    from .cavity import divergence

    return divergence(velocity).values


NOISE_SCHEMES = {
    "central4": ("central", 4),
    "central2": ("central", 2),
    "upwind2": ("upwind", 2),
}
NOISE_CASES = {
    "none": (0.0, 0.0),
    "state": (0.1, 0.0),
    "matrix": (0.0, 0.01),
}


def run_noise_study(
    base: ChannelConfig | None = None,
    schemes=NOISE_SCHEMES,
    cases=NOISE_CASES,
    progress: Callable[[str, str], None] | None = None,
) -> dict[str, dict[str, list[tuple[int, float, float]]]]:
    """Mean/max error time series for every (scheme, noise case) pair."""
    base = base or ChannelConfig()
    out: dict[str, dict[str, list]] = {}
    for name, (family, order) in schemes.items():
        out[name] = {}
        for case, (state_sigma, matrix_sigma) in cases.items():
            if progress:
                progress(name, case)
            cfg = ChannelConfig(**{**asdict(base), "family": family, "order": order,
                                   "state_noise": state_sigma, "matrix_noise": matrix_sigma})
            out[name][case] = run_channel(cfg).series
    return out


def series_slope(series: list[tuple[int, float, float]]) -> float:
    """Least-squares slope of mean error against step count."""
    k = np.array([s[0] for s in series], dtype=float)
    e = np.array([s[1] for s in series])
    return float(np.polyfit(k, e, 1)[0])
