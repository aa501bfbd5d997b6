"""Uniform Cartesian grids, nodal fields, statevector encoding and CSV I/O.

Nodes are flattened row-major with x fastest: ``m = i + nx * j``.  A field
stored as a 2D array therefore has shape ``(ny, nx)`` with row ``j`` at
height ``y = j * dy``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class Boundary(enum.Enum):
    PERIODIC = "periodic"
    WALL = "wall"


class FieldFormatError(ValueError):
    """Raised for malformed or mis-sized field CSV files."""


def _spacing(n: int, bc: Boundary) -> float:
    if n == 1:
        return 1.0
    return 1.0 / n if bc is Boundary.PERIODIC else 1.0 / (n - 1)


@dataclass(frozen=True)
class Grid2D:
    """Node layout on the unit square (or unit interval when ``ny == 1``).

    Periodic axes hold ``n`` nodes on ``[0, 1)``; wall axes hold ``n`` nodes on
    ``[0, 1]`` so that the wall rows coincide with the first and last nodes.
    """

    nx: int
    ny: int
    bc_x: Boundary
    bc_y: Boundary

    @property
    def dx(self) -> float:
        return _spacing(self.nx, self.bc_x)

    @property
    def dy(self) -> float:
        return _spacing(self.ny, self.bc_y)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def dimensions(self) -> int:
        return int(self.nx > 1) + int(self.ny > 1)

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) * self.dx

    @property
    def y(self) -> np.ndarray:
        return np.arange(self.ny) * self.dy if self.ny > 1 else np.zeros(1)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays of shape ``(ny, nx)``."""
        return np.meshgrid(self.x, self.y)

    def min_spacing(self) -> float:
        spacings = [self.dx]
        if self.ny > 1:
            spacings.append(self.dy)
        return min(spacings)

    def wall_mask(self) -> np.ndarray:
        """Boolean array (flattened) marking nodes that lie on a wall."""
        mask = np.zeros(self.shape, dtype=bool)
        if self.bc_x is Boundary.WALL and self.nx > 1:
            mask[:, 0] = mask[:, -1] = True
        if self.bc_y is Boundary.WALL and self.ny > 1:
            mask[0, :] = mask[-1, :] = True
        return mask.ravel()

    def index(self, i: int, j: int) -> int:
        return i + self.nx * j


def make_grid(
    nx: int,
    ny: int = 1,
    bc_x: Boundary | str = Boundary.PERIODIC,
    bc_y: Boundary | str = Boundary.PERIODIC,
) -> Grid2D:
    bc_x, bc_y = Boundary(bc_x), Boundary(bc_y)
    if nx < 4:
        raise ValueError(f"nx must be at least 4, got {nx}")
    if ny != 1 and ny < 4:
        raise ValueError(f"ny must be 1 or at least 4, got {ny}")
    return Grid2D(int(nx), int(ny), bc_x, bc_y)


def _as_flat(values, n: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size != n:
        raise ValueError(f"{name} has {arr.size} values, grid has {n} nodes")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ScalarField:
    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_flat(self.values, self.grid.size, "field"))

    def as_2d(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)


@dataclass(frozen=True)
class VelocityField:
    grid: Grid2D
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", _as_flat(self.u, self.grid.size, "u"))
        object.__setattr__(self, "v", _as_flat(self.v, self.grid.size, "v"))

    def max_component(self) -> float:
        return float(max(np.abs(self.u).max(), np.abs(self.v).max()))

    def normalized(self) -> VelocityField:
        """Rescale so that the largest velocity component has magnitude 1."""
        peak = self.max_component()
        if peak == 0.0:
            return self
        return VelocityField(self.grid, self.u / peak, self.v / peak)


@dataclass(frozen=True)
class Statevector:
    """Unit-norm amplitude vector of length ``2**n_qubits``.

    ``source_norm`` is the 2-norm of the field the amplitudes were built
    from, so that ``amplitudes[:N] * source_norm`` recovers the field.
    """

    amplitudes: np.ndarray
    source_norm: float = 1.0
    n_values: int | None = None

    def __post_init__(self):
        amps = np.asarray(self.amplitudes)
        n = amps.size
        if n == 0 or n & (n - 1):
            raise ValueError(f"statevector length {n} is not a power of two")
        if abs(np.linalg.norm(amps) - 1.0) > 1e-12:
            raise ValueError("statevector is not normalized")
        if self.n_values is None:
            object.__setattr__(self, "n_values", n)

    @property
    def n_qubits(self) -> int:
        return int(self.amplitudes.size).bit_length() - 1


def poiseuille_velocity(grid: Grid2D, u_max: float = 1.0) -> VelocityField:
    """Plane channel profile ``u = u_max * 4y(1 - y)``, ``v = 0``."""
    if grid.bc_y is not Boundary.WALL or grid.ny < 4:
        raise ValueError("Poiseuille flow needs a wall-bounded y axis")
    y = grid.y
    profile = u_max * 4.0 * y * (1.0 - y)
    # Enforce exact mirror symmetry; y and 1 - y round differently.
    profile = 0.5 * (profile + profile[::-1])
    u = np.broadcast_to(profile[:, None], grid.shape)
    return VelocityField(grid, u, np.zeros(grid.size))


def init_sine(grid: Grid2D, axis: str = "x") -> ScalarField:
    """``sin(2*pi*coord) + 1`` along ``axis``, constant along the other."""
    X, Y = grid.mesh()
    if axis == "x":
        coord = X
    elif axis == "y":
        coord = Y
    else:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    return ScalarField(grid, np.sin(2.0 * np.pi * coord) + 1.0)


def to_statevector(field: ScalarField | np.ndarray) -> Statevector:
    values = field.values if isinstance(field, ScalarField) else np.asarray(field, dtype=float)
    n = values.size
    norm = float(np.linalg.norm(values))
    if norm == 0.0:
        raise ValueError("cannot encode an all-zero field")
    size = 1 << max(n - 1, 0).bit_length()
    amps = np.zeros(size)
    amps[:n] = values / norm
    return Statevector(amps, norm, n)


def from_amplitudes(grid: Grid2D, amplitudes: np.ndarray, scale: float = 1.0) -> ScalarField:
    """Drop padding and wrap the leading amplitudes as a field."""
    amps = np.asarray(amplitudes)
    if np.iscomplexobj(amps):
        amps = amps.real
    return ScalarField(grid, amps[: grid.size] * scale)


def save_field_csv(field: ScalarField | np.ndarray, path, grid: Grid2D | None = None) -> Path:
    """Write a field as ``ny`` rows of ``nx`` comma-separated values."""
    if isinstance(field, ScalarField):
        table = field.as_2d()
    else:
        if grid is None:
            table = np.atleast_2d(np.asarray(field, dtype=float))
        else:
            table = np.asarray(field, dtype=float).reshape(grid.shape)
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for row in table:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def _fmt(value: float) -> str:
    if np.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.17g}"


def load_field_csv(path, grid: Grid2D) -> ScalarField:
    return ScalarField(grid, _read_table(path, grid))


def _read_table(path, grid: Grid2D) -> np.ndarray:
    path = Path(path)
    rows = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(cell) for cell in line.split(",")])
            except ValueError as exc:
                raise FieldFormatError(f"{path}:{lineno}: non-numeric cell") from exc
    if len(rows) != grid.ny or any(len(r) != grid.nx for r in rows):
        ncols = {len(r) for r in rows}
        raise FieldFormatError(
            f"{path}: table is {len(rows)}x{sorted(ncols)} but grid is {grid.ny}x{grid.nx}"
        )
    return np.array(rows, dtype=float)


def load_velocity_csv(path_u, path_v, grid: Grid2D) -> VelocityField:
    return VelocityField(grid, _read_table(path_u, grid), _read_table(path_v, grid))


def save_velocity_csv(velocity: VelocityField, path_u, path_v) -> None:
    grid = velocity.grid
    save_field_csv(velocity.u, path_u, grid)
    save_field_csv(velocity.v, path_v, grid)
