"""Finite-difference stencils and sparse assembly of explicit time-marching matrices.

The advection update is the forward-Euler step ``phi_{t+1} = A phi_t`` with
``A = I - dt * sum_axes u_axis * D_axis``.  Rows that sit on a wall node are
identity rows, so wall values are carried through a step unchanged.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .grid import Boundary, Grid2D, VelocityField


class Family(enum.Enum):
    CENTRAL = "central"
    UPWIND = "upwind"
    DOWNWIND = "downwind"


class CFLError(ValueError):
    pass


class CFLWarning(UserWarning):
    pass


# Coefficients of d/dx at unit spacing, keyed by (family, order).  One-sided
# entries are the backward-biased form; the forward form is the mirror image.
_CENTRAL = {
    2: [(-1, -1 / 2), (1, 1 / 2)],
    4: [(-2, 1 / 12), (-1, -8 / 12), (1, 8 / 12), (2, -1 / 12)],
}
_BACKWARD = {
    2: [(0, 3 / 2), (-1, -2.0), (-2, 1 / 2)],
}


@dataclass(frozen=True)
class StencilSpec:
    family: Family = Family.CENTRAL
    order: int = 2

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        table = _CENTRAL if self.family is Family.CENTRAL else _BACKWARD
        if self.order not in table:
            raise ValueError(f"unsupported stencil: {self.family.value} order {self.order}")


def _mirror(coeffs):
    return [(-off, -c) for off, c in coeffs]


def derivative_coeffs(spec: StencilSpec, direction_sign: int = 0) -> list[tuple[int, float]]:
    """(offset, coefficient) pairs approximating d/dx with unit spacing.

    ``direction_sign`` is the sign of the local velocity.  Upwind stencils
    lean against the flow (backward for positive velocity); downwind
    stencils lean with it.  A zero sign on a one-sided family falls back to
    the second-order central stencil.
    """
    if direction_sign not in (-1, 0, 1):
        raise ValueError(f"direction_sign must be -1, 0 or 1, got {direction_sign}")
    if spec.family is Family.CENTRAL:
        return list(_CENTRAL[spec.order])
    if direction_sign == 0:
        return list(_CENTRAL[2])
    backward = _BACKWARD[spec.order]
    lean_back = direction_sign > 0 if spec.family is Family.UPWIND else direction_sign < 0
    return list(backward) if lean_back else _mirror(backward)


@dataclass(frozen=True)
class SparseOperator:
    """Real square matrix held in compressed-sparse-row form."""

    matrix: sp.csr_matrix

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix, dtype=float)
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be square, got {m.shape}")
        m.sum_duplicates()
        m.sort_indices()
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def indptr(self) -> np.ndarray:
        return self.matrix.indptr

    @property
    def indices(self) -> np.ndarray:
        return self.matrix.indices

    @property
    def data(self) -> np.ndarray:
        return self.matrix.data

    @property
    def sparsity(self) -> int:
        """Largest number of stored entries in any row."""
        return int(np.diff(self.matrix.indptr).max()) if self.n else 0

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def padded(self, size: int) -> SparseOperator:
        """Extend with identity rows up to ``size`` (inert on zero padding)."""
        extra = size - self.n
        if extra < 0:
            raise ValueError(f"cannot pad {self.n} down to {size}")
        if extra == 0:
            return self
        return SparseOperator(sp.block_diag([self.matrix, sp.identity(extra)], format="csr"))

    def with_values(self, data: np.ndarray) -> SparseOperator:
        """Same sparsity pattern, new stored values."""
        m = self.matrix.copy()
        m.data = np.asarray(data, dtype=float).copy()
        return SparseOperator(m)


def matvec(A: SparseOperator, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[0] != A.n:
        raise ValueError(f"dimension mismatch: operator {A.n}, vector {x.shape[0]}")
    return A.matrix @ x


def cfl_number(grid: Grid2D, velocity: VelocityField, dt: float) -> float:
    return velocity.max_component() * dt / grid.min_spacing()


def time_step_for_cfl(grid: Grid2D, velocity: VelocityField, r_max: float) -> float:
    """Time step giving CFL number ``r_max`` for this grid and velocity."""
    peak = velocity.max_component()
    if peak == 0.0:
        raise ValueError("velocity is identically zero")
    return r_max * grid.min_spacing() / peak


def _axis_coeffs(spec: StencilSpec, sign: int, idx: int, n: int, wall: bool):
    coeffs = derivative_coeffs(spec, sign)
    if not wall:
        return coeffs
    offsets = [off for off, _ in coeffs]
    if idx + min(offsets) < 0:
        return _mirror(_BACKWARD[2])
    if idx + max(offsets) > n - 1:
        return list(_BACKWARD[2])
    return coeffs


def assemble_advection(
    grid: Grid2D,
    velocity: VelocityField,
    spec: StencilSpec,
    dt: float,
    spec_y: StencilSpec | None = None,
) -> SparseOperator:
    """Forward-Euler advection matrix ``A = I - dt * (u D_x + v D_y)``.

    ``spec_y`` overrides the stencil on the y axis.  Near a wall, any
    stencil that would reach past the wall is replaced by the second-order
    one-sided stencil pointing into the domain.
    """
    if velocity.grid != grid:
        raise ValueError("velocity field is defined on a different grid")
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    r = cfl_number(grid, velocity, dt)
    if r > 1.0:
        raise CFLError(f"CFL number {r:.4g} exceeds 1")
    if r > 0.5:
        warnings.warn(f"CFL number {r:.4g} exceeds 0.5", CFLWarning, stacklevel=2)

    nx, ny = grid.nx, grid.ny
    axes = [(spec, velocity.u, grid.dx, nx, grid.bc_x is Boundary.WALL, 0)]
    if ny > 1:
        axes.append((spec_y or spec, velocity.v, grid.dy, ny, grid.bc_y is Boundary.WALL, 1))
    on_wall = grid.wall_mask()

    rows, cols, vals = [], [], []
    for m in range(grid.size):
        rows.append(m)
        cols.append(m)
        vals.append(1.0)
        if on_wall[m]:
            continue
        i, j = m % nx, m // nx
        for axis_spec, comp, h, n, wall, axis in axes:
            c = comp[m]
            if c == 0.0:
                continue
            idx = i if axis == 0 else j
            scale = -dt * c / h
            for off, coef in _axis_coeffs(axis_spec, int(np.sign(c)), idx, n, wall):
                k = (idx + off) % n
                rows.append(m)
                cols.append(k + nx * j if axis == 0 else i + nx * k)
                vals.append(scale * coef)
    A = sp.coo_matrix((vals, (rows, cols)), shape=(grid.size, grid.size))
    return SparseOperator(A.tocsr())


def assemble_heat_1d(n: int, r_h: float) -> SparseOperator:
    """Periodic tridiagonal ``[r_h, 1 - 2 r_h, r_h]`` heat-equation step."""
    if not 0.0 < r_h <= 0.5:
        raise ValueError(f"r_h must lie in (0, 0.5], got {r_h}")
    if n < 4:
        raise ValueError(f"n must be at least 4, got {n}")
    idx = np.arange(n)
    rows = np.concatenate([idx, idx, idx])
    cols = np.concatenate([idx, (idx - 1) % n, (idx + 1) % n])
    vals = np.concatenate([np.full(n, 1.0 - 2.0 * r_h), np.full(n, r_h), np.full(n, r_h)])
    return SparseOperator(sp.csr_matrix((vals, (rows, cols)), shape=(n, n)))


def write_matrix_market(A: SparseOperator, path) -> Path:
    path = Path(path)
    scipy.io.mmwrite(str(path), A.matrix.tocoo())
    return path
