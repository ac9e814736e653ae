import dataclasses

import numpy as np
import pytest

from growthfsi.elliptic import (
    EllipticOperator,
    EllipticProblem,
    IndefiniteError,
    pressure_duality_residual,
    reduce_divergence,
    solve_elliptic_transmission,
    solve_laplace_transmission,
)
from growthfsi.geometry import build_reference_domain
from growthfsi.report import CompatibilityError
from growthfsi.stokes import StokesProblem, StokesParams, solve_two_phase

from . import cases


@pytest.fixture(scope="module")
def grid():
    return build_reference_domain(2.0, 0.5, 32, 16)


def test_laplace_flux_balance(grid):
    # everything produced by f = 1 leaves through the Dirichlet ends
    sol = solve_laplace_transmission(grid, 1.0, (1.0, 2.0))
    gx = sol.grad_x
    outward = np.sum(-gx[0] + gx[-1]) * grid.dy
    assert outward == pytest.approx(-grid.L * 1.0, abs=1e-10)
    assert np.abs(sol.divergence() + 1.0).max() < 1e-10


def test_transmission_conditions_hold_on_the_traces(grid):
    ep = cases.elliptic_problem(grid)
    sol = solve_elliptic_transmission(ep)
    pf, ps = sol.phi_sigma
    rho_f, rho_s = ep.rho
    g1 = ep.g1(grid.xc, np.full(grid.Nx, grid.h), 0.0)
    assert np.abs((rho_f * pf - rho_s * ps) - g1).max() < 1e-10


def test_reduce_divergence_hits_its_target(grid):
    rng = np.random.default_rng(1)
    f_d = rng.standard_normal((2, grid.Nx, grid.Ny))
    ux = rng.standard_normal((2, grid.Nx + 1, grid.Ny))
    uy = rng.standard_normal((2, grid.Nx, grid.Ny + 1))
    sols = reduce_divergence(grid, f_d, (ux, uy), (1.0, 3.0))
    for n, s in enumerate(sols):
        div_u = np.diff(ux[n], axis=0) / grid.dx + np.diff(uy[n], axis=1) / grid.dy
        assert np.abs(s.divergence() - (f_d[n] - div_u)).max() < 1e-9
    with pytest.raises(ValueError):
        reduce_divergence(grid, np.zeros((1, 3, 3)))


def test_operator_definiteness(grid):
    assert EllipticOperator(grid, 1.0, (1.0, 2.0)).check_definite() > 0
    with pytest.raises(IndefiniteError):
        EllipticOperator(grid, -500.0, (1.0, 2.0)).check_definite()


def test_incompatible_contact_data_are_refused(grid):
    ep = cases.elliptic_problem(grid)
    change = cases.elliptic_perturbations(ep)["normal_derivative_contact_S"]
    with pytest.raises(CompatibilityError):
        solve_elliptic_transmission(dataclasses.replace(ep, **change))


def test_duality_refuses_problems_outside_its_hypothesis():
    g = build_reference_domain(2.0, 0.5, 16, 16)
    pb = StokesProblem(g, StokesParams(), f_d=1.0, dt=0.1, nsteps=1)
    sol = solve_two_phase(pb, check=False)
    with pytest.raises(ValueError, match="f_d = 0"):
        pressure_duality_residual(sol, pb, 1)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_adjoint_duality_for_any_test_field(seed):
    g = build_reference_domain(2.0, 0.5, 16, 16)
    pb = StokesProblem(
        g, StokesParams(1.0, 2.0, 1.0, 3.0),
        f_u=(lambda X, Y, T: np.cos(X) * Y * T, lambda X, Y, T: np.sin(Y) * T),
        g2=(lambda X, Y, T: 0.0 * X, lambda X, Y, T: T * np.cos(np.pi * X / 2)),
        dt=0.1, nsteps=2,
    )
    sol = solve_two_phase(pb, check=False)
    assert pressure_duality_residual(sol, pb, 2, seed=seed).residual < 1e-10


def test_problem_validation(grid):
    with pytest.raises(ValueError):
        EllipticProblem(grid, rho=(0.0, 1.0))
    with pytest.raises(ValueError):
        EllipticProblem(grid, orientation=0)
