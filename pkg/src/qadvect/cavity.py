"""Steady lid-driven cavity flow from a streamfunction-vorticity iteration.

The cavity is the unit square with all four walls on grid nodes; the top
wall slides in +x at ``U_wall``.  Each outer (Picard) iteration freezes the
convecting velocity and solves, as one sparse linear system, the Poisson
problem ``lap(psi) = -omega`` with ``psi = 0`` on the walls, the steady
transport ``u.grad(omega) = lap(omega) / Re`` and Thom's wall-vorticity
condition.  Solving wall vorticity jointly with ``psi`` avoids the
oscillation of the lagged-boundary scheme.  Velocities come from central
differences of ``psi``, so the interior discrete divergence vanishes to
round-off.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Boundary, ScalarField, VelocityField, make_grid

log = logging.getLogger(__name__)

DIVERGENCE_WARN = 0.01


class CavityConvergenceError(RuntimeError):
    pass


class DivergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class CavitySpec:
    n: int = 64
    Re: float = 100.0
    U_wall: float = 1.0
    tol: float = 1e-10
    max_iter: int = 2000
    relax: float = 0.5

    def __post_init__(self):
        if self.Re <= 0:
            raise ValueError("Re must be positive")
        if self.n < 16:
            raise ValueError("cavity needs at least 16 nodes per side")


@dataclass(frozen=True)
class CavitySolution:
    velocity: VelocityField
    psi: np.ndarray
    omega: np.ndarray
    iterations: int
    residual: float


def _node(i, j, n):
    return i + n * j


def _coupled_system(u, v, spec: CavitySpec):
    """Sparse system for ``z = [psi (interior), omega (all nodes)]`` at fixed velocity.

    Interior rows: ``lap(psi) + omega = 0`` and the steady vorticity transport
    ``u w_x + v w_y - lap(w) / Re = 0``.  Wall rows impose Thom's condition,
    which is linear in ``psi``.  Corner vorticity is never referenced and is
    pinned to zero.
    """
    n, U = spec.n, spec.U_wall
    h = 1.0 / (n - 1)
    m = n - 2
    off = m * m
    diff = 1.0 / (spec.Re * h**2)
    rows, cols, vals = [], [], []
    b = np.zeros(off + n * n)

    def psi_col(i, j):
        return (i - 1) + m * (j - 1)

    def add(r, c, val):
        rows.append(r)
        cols.append(c)
        vals.append(val)

    for j in range(1, n - 1):
        for i in range(1, n - 1):
            r = psi_col(i, j)
            add(r, r, -4.0 / h**2)
            for ii, jj in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
                if 1 <= ii <= n - 2 and 1 <= jj <= n - 2:
                    add(r, psi_col(ii, jj), 1.0 / h**2)
            add(r, off + _node(i, j, n), 1.0)

            r = off + _node(i, j, n)
            uc, vc = u[j, i], v[j, i]
            add(r, r, 4.0 * diff)
            add(r, off + _node(i + 1, j, n), uc / (2 * h) - diff)
            add(r, off + _node(i - 1, j, n), -uc / (2 * h) - diff)
            add(r, off + _node(i, j + 1, n), vc / (2 * h) - diff)
            add(r, off + _node(i, j - 1, n), -vc / (2 * h) - diff)

    walls = {}
    for k in range(n):
        walls[(k, 0)] = (k, 1)
        walls[(k, n - 1)] = (k, n - 2)
        walls[(0, k)] = (1, k)
        walls[(n - 1, k)] = (n - 2, k)
    for (i, j), (ai, aj) in walls.items():
        r = off + _node(i, j, n)
        add(r, r, 1.0)
        if i in (0, n - 1) and j in (0, n - 1):
            continue
        add(r, psi_col(ai, aj), 2.0 / h**2)
        if j == n - 1:
            b[r] = -2.0 * U / h
    A = sp.csc_matrix((vals, (rows, cols)), shape=(off + n * n, off + n * n))
    return A, b


def _velocity_from_psi(psi, h, U):
    u = np.zeros_like(psi)
    v = np.zeros_like(psi)
    u[1:-1, 1:-1] = (psi[2:, 1:-1] - psi[:-2, 1:-1]) / (2 * h)
    v[1:-1, 1:-1] = -(psi[1:-1, 2:] - psi[1:-1, :-2]) / (2 * h)
    # Lid; corner nodes keep the stationary-wall value.
    u[-1, 1:-1] = U
    return u, v


def _distance_estimate(increments: list[float]) -> float:
    """Estimated distance to the fixed point from recent Picard increments.

    With contraction factor ``rho`` the remaining error is about
    ``delta * rho / (1 - rho)``; ``rho`` is taken as the largest of the last
    three increment ratios, capped at 0.95.
    """
    if len(increments) < 4:
        return np.inf
    recent = np.array(increments[-4:])
    rho = min(max(float(np.max(recent[1:] / np.maximum(recent[:-1], 1e-300))), 0.0), 0.95)
    return recent[-1] * rho / (1.0 - rho)


def solve_cavity(spec: CavitySpec = CavitySpec()) -> CavitySolution:
    """Iterate to a steady state.

    ``residual`` on the returned solution is the estimated largest distance
    of any velocity component from the converged field.
    """
    n, U = spec.n, spec.U_wall
    h = 1.0 / (n - 1)
    m = n - 2
    psi = np.zeros((n, n))
    omega = np.zeros((n, n))
    u, v = _velocity_from_psi(psi, h, U)
    increments: list[float] = []
    residual = np.inf
    for it in range(1, spec.max_iter + 1):
        A, b = _coupled_system(u, v, spec)
        z = spla.spsolve(A, b)
        new_psi = np.zeros((n, n))
        new_psi[1:-1, 1:-1] = z[: m * m].reshape(m, m)
        new_omega = z[m * m :].reshape(n, n)
        psi = psi + spec.relax * (new_psi - psi)
        omega = omega + spec.relax * (new_omega - omega)
        new_u, new_v = _velocity_from_psi(psi, h, U)
        increments.append(float(max(np.abs(new_u - u).max(), np.abs(new_v - v).max())))
        u, v = new_u, new_v
        if not np.isfinite(increments[-1]):
            raise CavityConvergenceError(f"cavity iteration diverged at iteration {it}")
        residual = _distance_estimate(increments)
        if residual < spec.tol:
            break
    else:
        raise CavityConvergenceError(
            f"cavity iteration stalled at residual {residual:.3g} after {spec.max_iter} iterations"
        )
    log.info("cavity converged in %d iterations (residual %.3g)", it, residual)
    grid = make_grid(n, n, Boundary.WALL, Boundary.WALL)
    return CavitySolution(VelocityField(grid, u, v), psi, omega, it, residual)


def solve_lid_cavity(spec: CavitySpec = CavitySpec()) -> VelocityField:
    return solve_cavity(spec).velocity


def divergence(velocity: VelocityField) -> ScalarField:
    """Central-difference divergence; zero on wall nodes where it is undefined."""
    grid = velocity.grid
    u = velocity.u.reshape(grid.shape)
    v = velocity.v.reshape(grid.shape)
    div = np.zeros(grid.shape)
    valid = np.ones(grid.shape, dtype=bool)
    div += (np.roll(u, -1, axis=1) - np.roll(u, 1, axis=1)) / (2 * grid.dx)
    if grid.bc_x is Boundary.WALL:
        valid[:, [0, -1]] = False
    if grid.ny > 1:
        div += (np.roll(v, -1, axis=0) - np.roll(v, 1, axis=0)) / (2 * grid.dy)
        if grid.bc_y is Boundary.WALL:
            valid[[0, -1], :] = False
    return ScalarField(grid, np.where(valid, div, 0.0))


def check_divergence(velocity: VelocityField, U_ref: float | None = None) -> float:
    """Return the largest interior divergence, warning if it looks compressible."""
    grid = velocity.grid
    U_ref = U_ref if U_ref is not None else velocity.max_component()
    worst = float(np.abs(divergence(velocity).values).max())
    limit = DIVERGENCE_WARN * U_ref / grid.min_spacing()
    if worst > limit:
        warnings.warn(
            f"velocity divergence {worst:.3g} exceeds {limit:.3g}", DivergenceWarning, stacklevel=2
        )
    return worst


def stream_extremum(solution: CavitySolution) -> tuple[float, float]:
    """Coordinates (x, y) of the primary vortex centre (largest |psi|)."""
    n = solution.psi.shape[0]
    j, i = np.unravel_index(np.argmax(np.abs(solution.psi)), solution.psi.shape)
    h = 1.0 / (n - 1)
    return i * h, j * h
