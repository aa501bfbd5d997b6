import warnings

import numpy as np
import pytest

from qadvect.cavity import (
    CavityConvergenceError,
    CavitySpec,
    DivergenceWarning,
    check_divergence,
    divergence,
    solve_cavity,
    stream_extremum,
)
from qadvect.grid import VelocityField, load_velocity_csv, make_grid, save_velocity_csv


@pytest.fixture(scope="module")
def solution():
    return solve_cavity(CavitySpec(n=32, tol=1e-10))


def test_boundary_conditions_exact(solution):
    u = solution.velocity.u.reshape(32, 32)
    v = solution.velocity.v.reshape(32, 32)
    np.testing.assert_array_equal(u[-1, 1:-1], 1.0)
    assert u[-1, 0] == u[-1, -1] == 0.0
    assert not u[0].any() and not u[:, 0].any() and not u[:, -1].any()
    assert not v[0].any() and not v[-1].any() and not v[:, 0].any() and not v[:, -1].any()
    assert not solution.psi[[0, -1]].any() and not solution.psi[:, [0, -1]].any()


def test_interior_divergence_vanishes(solution):
    h = 1 / 31
    assert np.abs(divergence(solution.velocity).values).max() <= 1e-10 / h


def test_primary_vortex(solution):
    x, y = stream_extremum(solution)
    assert 0.5 < x < 0.75 and 0.6 < y < 0.85
    assert solution.psi.min() < 0 and abs(solution.psi.min()) > 10 * solution.psi.max()


def test_halving_tolerance_stays_within_previous_residual():
    prev = None
    for tol in (1e-3, 5e-4, 2.5e-4):
        sol = solve_cavity(CavitySpec(n=24, tol=tol))
        if prev is not None:
            du = np.abs(sol.velocity.u - prev.velocity.u).max()
            dv = np.abs(sol.velocity.v - prev.velocity.v).max()
            assert max(du, dv) < prev.residual
        prev = sol


def test_uniform_field_has_no_divergence():
    g = make_grid(16, 16, "wall", "wall")
    assert not divergence(VelocityField(g, np.full(256, 0.3), np.full(256, -1.0))).values.any()


def test_divergence_of_known_field():
    g = make_grid(20, 20, "wall", "wall")
    X, Y = g.mesh()
    div = divergence(VelocityField(g, X, Y)).as_2d()
    np.testing.assert_allclose(div[1:-1, 1:-1], 2.0, atol=1e-12)


def test_compressible_input_warns(tmp_path):
    g = make_grid(16, 16, "wall", "wall")
    X, Y = g.mesh()
    save_velocity_csv(VelocityField(g, X, Y), tmp_path / "u.csv", tmp_path / "v.csv")
    vel = load_velocity_csv(tmp_path / "u.csv", tmp_path / "v.csv", g)
    with pytest.warns(DivergenceWarning):
        check_divergence(vel, U_ref=1.0)


def test_solver_field_passes_divergence_check(solution):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        check_divergence(solution.velocity, U_ref=1.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        CavitySpec(Re=0)
    with pytest.raises(ValueError):
        CavitySpec(n=8)


def test_non_convergence_reported():
    with pytest.raises(CavityConvergenceError):
        solve_cavity(CavitySpec(n=16, max_iter=3))
