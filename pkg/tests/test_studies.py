import math

import pytest

from growthfsi.studies import STUDIES, ConvergenceTable, run_study


def test_table_ratios_and_csv():
    tab = ConvergenceTable("demo", "space", [(8, 4, 0.1), (16, 8, 0.05), (32, 16, 0.025)], [1.0, 0.25, 0.0625])
    assert tab.ratios == [2.0, 2.0] and tab.observed_order == 2.0
    lines = tab.to_csv().splitlines()
    assert lines[0] == "level,Nx,Ny,dt,error,log2_ratio"
    assert lines[1].endswith(",nan") and lines[2].startswith("1,16,8,")
    assert math.isnan(ConvergenceTable("e", "time").observed_order)


def test_identity_study_is_exact():
    # fields the stencils reproduce exactly: errors sit at rounding level
    tab = run_study("identity")
    assert max(tab.errors) < 1e-11


def test_parabolic_space_order():
    tab = run_study("parabolic_space")
    assert min(tab.ratios) > 1.8


def test_study_arguments():
    with pytest.raises(KeyError, match="no manufactured oracle"):
        run_study("navier_stokes")
    with pytest.raises(ValueError, match="at least 3"):
        run_study("elliptic", [(16, 8, 0.0), (32, 16, 0.0)])
    assert {"elliptic", "laplace", "stokes_space", "stokes_time", "heat_space", "heat_time"} <= set(STUDIES)
