import dataclasses

import numpy as np
import pytest

from growthfsi.geometry import build_reference_domain
from growthfsi.report import CompatibilityError
from growthfsi.stokes import (
    StokesParams,
    StokesProblem,
    solve_single_phase,
    solve_two_phase,
    solve_with_concentration_source,
    stokes_residual,
)
from growthfsi.manufactured import StokesMMS, l2_error
from growthfsi.studies import STOKES_PARAMS, STOKES_SPACE

from . import cases


@pytest.fixture(scope="module")
def grid():
    return build_reference_domain(2.0, 0.5, 32, 16)


@pytest.mark.parametrize("orientation", [-1, 1])
def test_independent_residual_vanishes_on_the_discrete_solution(grid, orientation):
    pb = STOKES_SPACE.problem(grid, STOKES_PARAMS, 0.01, 3, orientation=orientation)
    sol = solve_two_phase(pb)
    rep = stokes_residual(sol, pb)
    assert rep.passed, rep.summary()
    assert set(rep.names()) >= {"momentum_x", "momentum_y", "divergence", "velocity_jump_x", "stress_jump_tangential",
                                "outflow_normal_stress", "wall_normal_velocity", "axis_normal_velocity"}


def test_residual_flags_a_corrupted_velocity(grid):
    pb = STOKES_SPACE.problem(grid, STOKES_PARAMS, 0.01, 2)
    sol = solve_two_phase(pb)
    ux = sol.ux.copy()
    ux[-1, 10, 4] += 1e-3
    bad = stokes_residual(dataclasses.replace(sol, ux=ux), pb)
    assert "momentum_x" in bad.failed() and "divergence" in bad.failed()


def test_solution_tracks_the_manufactured_field(grid):
    pb = STOKES_SPACE.problem(grid, STOKES_PARAMS, 0.005, 4)
    sol = solve_two_phase(pb)
    ex = STOKES_SPACE.exact(grid, sol.times[-1])
    assert l2_error(grid, sol.ux[-1], ex["ux"]) < 5e-3
    assert l2_error(grid, sol.uy[-1], ex["uy"]) < 5e-3


def test_rigid_translation_is_reproduced_exactly():
    g = build_reference_domain(2.0, 0.5, 16, 8)
    mms = StokesMMS(ux=("1", "1"), uy=("0", "0"), p=("0", "0"))
    pb = mms.problem(g, StokesParams(1.0, 4.0, 1.0, 7.0), 0.1, 3)
    sol = solve_two_phase(pb)
    assert np.abs(sol.ux[-1] - 1).max() < 1e-12
    assert np.abs(sol.uy[-1]).max() < 1e-12


def test_incompatible_data_are_refused(grid):
    pb = STOKES_SPACE.problem(grid, STOKES_PARAMS, 0.01, 2)
    change = cases.stokes_perturbations(pb)["u0_jump_Sigma"]
    with pytest.raises(CompatibilityError) as err:
        solve_two_phase(dataclasses.replace(pb, **change))
    assert err.value.report.failed() == ["u0_jump_Sigma"]


def test_concentration_source_leaves_through_the_ends():
    g = build_reference_domain(1.0, 0.5, 16, 16)
    pb = StokesProblem(g, StokesParams(), dt=0.1, nsteps=2)
    sol = solve_with_concentration_source(pb, 0.1, gamma=1.0, beta=1.0)
    div = sol.divergence(2)
    assert np.abs(div[:, g.js:] - 0.1).max() < 1e-12
    assert np.abs(div[:, : g.js]).max() < 1e-12
    outflow = (sol.ux[2][-1] - sol.ux[2][0]).sum() * g.dy
    assert outflow == pytest.approx(0.1 * g.L * (1 - g.h), abs=1e-12)


def test_single_phase_uniform_flow():
    g = build_reference_domain(1.0, 0.5, 16, 16)
    pb = StokesProblem(g, StokesParams(), u0=(1.0, 0.0), dt=0.1, nsteps=2)
    sides = {"left": "outflow", "right": "outflow", "bottom": "symmetry", "top": "symmetry"}
    sol = solve_single_phase(pb, sides)
    assert np.abs(sol.ux[-1] - 1).max() < 1e-12 and np.abs(sol.uy[-1]).max() < 1e-12


def test_params_validation():
    with pytest.raises(ValueError):
        StokesParams(1.0, -1.0, 1.0, 1.0)
    g = build_reference_domain(1.0, 0.5, 8, 8)
    with pytest.raises(ValueError):
        StokesProblem(g, dt=0.0)
