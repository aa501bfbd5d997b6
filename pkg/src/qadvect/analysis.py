"""Closed-form error and probability estimates, and channel-flow error metrics.

Formulas here concern the 1D second-order central advection step with
stability parameter ``r`` and the periodic heat step with parameter ``r_h``.
Throughout, ``q = sqrt(r**2 + 1)`` is the largest singular value of the
periodic central advection matrix.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .grid import ScalarField, VelocityField, Grid2D


@dataclass(frozen=True)
class BoundPoint:
    r: float
    theta: float
    value: float


@dataclass(frozen=True)
class TildeDiagonals:
    """Diagonals of the success and failure blocks for a 4x4 periodic step.

    ``a_d1`` is the super-diagonal of the success block and ``a_dm1`` the
    sub-diagonal; offsets +2 and -2 coincide on a 4-cycle.
    """

    a_d0: float
    a_d1: float
    a_dm1: float
    a_d2: float
    i_d0: float
    i_d1: float
    i_d2: float


def _q(r):
    return np.sqrt(np.square(r) + 1.0)


def tilde_entries_4x4(r: float, theta: float) -> TildeDiagonals:
    q = _q(r)
    s = np.sin(theta * q) / q
    a_d0 = 0.5 * (np.sin(theta) + s)
    a_d1 = -r * np.sin(theta * q) / (2 * q)
    a_d2 = 0.5 * (np.sin(theta) - s)
    i_d0 = 0.5 * (np.cos(theta) + np.cos(theta * q))
    i_d2 = 0.5 * (np.cos(theta) - np.cos(theta * q))
    return TildeDiagonals(a_d0, a_d1, -a_d1, a_d2, i_d0, 0.0, i_d2)


def e_a_norm(r, theta):
    """Spectral norm of the success-block shape error."""
    q = _q(r)
    return 0.5 * (np.sin(theta) * q - np.sin(theta * q))


def e_i_norm(r, theta):
    """Spectral norm of the failure-block deviation from a scaled identity."""
    return 0.5 * (np.cos(theta) - np.cos(theta * _q(r)))


def theta_split(r):
    """Angle at which the worst-case success probability changes branch."""
    return np.pi / (1.0 + _q(r))


def p_min(r, theta):
    """Worst-case probability that an attempted step succeeds."""
    q = _q(r)
    return np.where(theta <= theta_split(r), np.sin(theta) ** 2, np.sin(theta * q) ** 2)[()]


def advection_error_bound(r, theta):
    """Error bound per unit non-dimensional time, ``eps / T``."""
    q = _q(r)
    cot_arg = np.where(theta <= theta_split(r), theta, theta * q)
    cot2 = 1.0 / np.tan(cot_arg) ** 2
    bracket = (np.cos(theta) - np.cos(theta * q)) * cot2 + np.sin(theta) * q - np.sin(theta * q)
    return (bracket / (2.0 * r))[()]


def composed_error_bound(r, theta):
    """``(N_T |E_A| + N_F |E_I|) / T`` with ``N_T = T / r``, ``N_F = N_T / P_min - N_T``."""
    return (e_a_norm(r, theta) + (1.0 / p_min(r, theta) - 1.0) * e_i_norm(r, theta)) / r


def heat_error_bound(r_h, theta):
    """Error bound per unit time for the explicit heat step.

    The first branch applies for ``r_h <= 1/3``, the second above.  Poles at
    ``r_h = 1/4`` and ``r_h = 1/2`` evaluate to ``inf``.
    """
    r = np.asarray(r_h, dtype=float)
    t = np.asarray(theta, dtype=float)
    s = np.sin
    tail = np.abs(s(t - 3 * r * t) + 3 * s(t - r * t)) * s(r * t)
    low_num = np.abs((8 * r - 3) * s(t) + s(t - 4 * r * t) + 2 * s(t - 2 * r * t))
    high_num = np.abs((1 - 4 * r) * s(t) + (4 * r - 3) * s(t - 4 * r * t) + (2 - 8 * r) * s(t - 2 * r * t))
    with np.errstate(divide="ignore", invalid="ignore"):
        low = low_num / (2 - 4 * r) + tail / np.tan(t - 4 * r * t) ** 2
        high = high_num / (2 - 4 * r) + tail / np.tan(t - 2 * r * t) ** 2
        value = np.where(r <= 1.0 / 3.0, low, high) / (2 * r)
    pole = np.isclose(r, 0.25, rtol=0, atol=1e-12) | np.isclose(r, 0.5, rtol=0, atol=1e-12)
    value = np.where(pole | ~np.isfinite(value), np.inf, value)
    return value[()]


def sweep(
    fn: Callable, r_values: Iterable[float], theta_values: Iterable[float]
) -> list[BoundPoint]:
    r_values = np.asarray(list(r_values), dtype=float)
    theta_values = np.asarray(list(theta_values), dtype=float)
    R, TH = np.meshgrid(r_values, theta_values, indexing="ij")
    V = np.broadcast_to(fn(R, TH), R.shape)
    return [BoundPoint(float(r), float(t), float(v)) for r, t, v in zip(R.ravel(), TH.ravel(), V.ravel())]


def write_sweep_csv(points: Iterable[BoundPoint], path, r_label: str = "r") -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([r_label, "theta", "value"])
        for p in points:
            value = "inf" if np.isinf(p.value) else repr(p.value)
            writer.writerow([repr(p.r), repr(p.theta), value])
    return path


def channel_analytical(grid: Grid2D, velocity: VelocityField, t: float, init_norm: float) -> ScalarField:
    """Characteristic solution of the sine initial condition in a shear flow."""
    X, _ = grid.mesh()
    u = velocity.u.reshape(grid.shape)
    return ScalarField(grid, (np.sin(2.0 * np.pi * (X - u * t)) + 1.0) / init_norm)


def _values(x) -> np.ndarray:
    return x.values if isinstance(x, ScalarField) else np.asarray(x).real


def error_map(state, reference: ScalarField) -> ScalarField:
    """Pointwise error as a percentage of the reference maximum."""
    ref = _values(reference)
    peak = ref.max()
    if peak == 0.0:
        raise ValueError("reference field has zero maximum")
    vals = _values(state)[: ref.size]
    return ScalarField(reference.grid, 100.0 * np.abs(ref - vals) / peak)


def mean_abs_error(state, reference: ScalarField) -> float:
    return float(error_map(state, reference).values.mean())


def max_abs_error(state, reference: ScalarField) -> float:
    return float(error_map(state, reference).values.max())
