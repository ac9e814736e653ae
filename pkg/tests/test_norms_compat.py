import dataclasses

import numpy as np
import pytest

from growthfsi.coupling import CouplingParams
from growthfsi.geometry import GridField, build_reference_domain
from growthfsi.norms_compat import (
    check_elliptic_compatibility,
    check_heat_compatibility,
    check_nonlinear_initial,
    check_parabolic_transmission,
    check_stokes_compatibility,
    slobodeckij_seminorm,
    sobolev_norm_discrete,
)

from . import cases
from .oracles import slobodeckij_linear_unit


@pytest.mark.parametrize("N", [8, 32, 128])
def test_seminorm_of_a_linear_function(N):
    x = (np.arange(N) + 0.5) / N
    assert slobodeckij_seminorm(x, 0.5, 2.0) == pytest.approx(slobodeckij_linear_unit(N), rel=1e-12)


@pytest.mark.parametrize("s,q", [(0.25, 2.0), (0.5, 3.0), (0.75, 1.5)])
def test_seminorm_dilation(s, q):
    rng = np.random.default_rng(7)
    f = rng.standard_normal(40)
    base = slobodeckij_seminorm(f, s, q, spacing=1 / 40)
    lam = 3.0
    assert slobodeckij_seminorm(f, s, q, spacing=lam / 40) == pytest.approx(lam ** (1 / q - s) * base, rel=1e-12)


def test_seminorm_validation():
    with pytest.raises(ValueError):
        slobodeckij_seminorm(np.zeros(10), 1.0, 2.0)
    with pytest.raises(ValueError):
        slobodeckij_seminorm(np.zeros(3), 0.5, 2.0)


def test_sobolev_norm_of_a_quadratic():
    g = build_reference_domain(1.0, 0.5, 64, 64)
    X, Y = g.coords("cell")
    f = GridField(g, X**2 + Y)
    # L1 norms on the unit square: |x^2 + y| = 5/6, |2x| = 1, |1| = 1, |2| = 2
    assert sobolev_norm_discrete(f, 0, 1.0) == pytest.approx(5 / 6, rel=1e-3)
    assert sobolev_norm_discrete(f, 1, 1.0) == pytest.approx(5 / 6 + 2, rel=1e-3)
    assert sobolev_norm_discrete(f, 2, 1.0) == pytest.approx(5 / 6 + 4, rel=1e-3)
    with pytest.raises(ValueError):
        sobolev_norm_discrete(f.values, 1, 2.0)


def _reports(g):
    ux, uy, c0 = cases.nonlinear_initial(g)
    return {
        "stokes": check_stokes_compatibility(cases.stokes_problem(g)),
        "parabolic": check_parabolic_transmission(cases.parabolic(g)),
        "elliptic": check_elliptic_compatibility(cases.elliptic_problem(g)),
        "heat_fluid": check_heat_compatibility(cases.heat_problem(g, "fluid"), "fluid"),
        "heat_solid": check_heat_compatibility(cases.heat_problem(g, "solid"), "solid"),
        "nonlinear": check_nonlinear_initial((ux, uy), c0, CouplingParams(), g),
    }


def test_consistent_residuals_shrink_at_second_order():
    coarse = _reports(build_reference_domain(2.0, 0.5, 32, 16))
    fine = _reports(build_reference_domain(2.0, 0.5, 64, 32))
    for key, rep in coarse.items():
        assert rep.passed and fine[key].passed, key
        for e in rep.entries:
            if e.residual > 1e-12:
                assert np.log2(e.residual / fine[key][e.name].residual) > 1.8, (key, e.name)


def test_report_names_are_complete():
    reps = _reports(build_reference_domain(2.0, 0.5, 32, 16))
    assert len(reps["stokes"].entries) == 8
    assert [e.name[:2] for e in reps["parabolic"].entries] == [f"{k:02d}" for k in range(1, 13)]
    assert len(reps["heat_solid"].entries) == 3 and len(reps["heat_fluid"].entries) == 2
    assert len(reps["nonlinear"].entries) == 8


@pytest.fixture(scope="module")
def grid():
    # bump sizes are tuned to this resolution; coarser thresholds are looser
    return build_reference_domain(2.0, 0.5, 64, 32)


def test_stokes_single_perturbations(grid):
    pb = cases.stokes_problem(grid)
    for name, change in cases.stokes_perturbations(pb).items():
        assert check_stokes_compatibility(dataclasses.replace(pb, **change)).failed() == [name]


def test_parabolic_single_perturbations(grid):
    pb = cases.parabolic(grid)
    for name, change in cases.parabolic_perturbations(pb).items():
        assert check_parabolic_transmission(dataclasses.replace(pb, **change)).failed() == [name]


def test_elliptic_single_perturbations(grid):
    ep = cases.elliptic_problem(grid)
    for name, change in cases.elliptic_perturbations(ep).items():
        assert check_elliptic_compatibility(dataclasses.replace(ep, **change)).failed() == [name]


@pytest.mark.parametrize("region", ["fluid", "solid"])
def test_heat_single_perturbations(grid, region):
    pr = cases.heat_problem(grid, region)
    for name, change in cases.heat_perturbations(pr, region).items():
        assert check_heat_compatibility(dataclasses.replace(pr, **change), region).failed() == [name]


def test_nonlinear_single_perturbations(grid):
    for name, (v, c) in cases.nonlinear_perturbations(grid).items():
        assert check_nonlinear_initial(v, c, CouplingParams(), grid).failed() == [name]


def test_report_csv(grid):
    rep = check_stokes_compatibility(cases.stokes_problem(grid))
    lines = rep.to_csv().splitlines()
    assert lines[0] == "name,anchor,residual,threshold,pass"
    assert len(lines) == 9 and all(line.endswith(",1") for line in lines[1:])
