import numpy as np
import pytest

from growthfsi.coupling import (
    CouplingParams,
    Kinematics,
    KinematicsError,
    State,
    assemble_nonlinear_rhs,
    det2,
    ftilde,
    integrate_odes,
    inv2,
    ktilde_fluid,
    ktilde_solid,
    picard_solve,
    small_initial_data,
    update_kinematics,
)
from growthfsi.geometry import build_reference_domain
from growthfsi.report import CompatibilityError

from . import cases
from .oracles import foam_closed_form, growth_closed_form, ktilde_fluid_reference, ktilde_solid_reference


def _random_F(rng, n):
    return np.eye(2) + 0.3 * rng.standard_normal((n, 2, 2))


def test_ktilde_fluid_matches_the_pulled_back_stress():
    rng = np.random.default_rng(0)
    F = _random_F(rng, 50)
    G = rng.standard_normal((50, 2, 2))
    p = rng.standard_normal(50)
    got = ktilde_fluid(p, G, F, 1.3)
    for k in range(50):
        assert np.allclose(got[k], ktilde_fluid_reference(p[k], G[k], F[k], 1.3), atol=1e-12)


def test_ktilde_fluid_hand_value():
    F = 1.1 * np.eye(2)
    G = np.array([[0.0, 1.0], [0.0, 0.0]])
    K = ktilde_fluid(0.0, G, F, 1.0)
    assert K[0, 1] == pytest.approx(1 / 1.21 - 1, abs=1e-12)
    assert K[1, 0] == pytest.approx(1 / 1.21 - 1, abs=1e-12)


def test_ktilde_solid_matches_the_pulled_back_stress():
    rng = np.random.default_rng(1)
    F = _random_F(rng, 50)
    g = rng.uniform(0.7, 1.5, 50)
    p = rng.standard_normal(50)
    got = ktilde_solid(p, F, g, 2.0)
    for k in range(50):
        assert np.allclose(got[k], ktilde_solid_reference(p[k], F[k], g[k], 2.0), atol=1e-12)


def test_identity_deformation_leaves_no_nonlinear_flux():
    rng = np.random.default_rng(2)
    assert np.all(ftilde(rng.standard_normal((5, 2)), np.broadcast_to(np.eye(2), (5, 2, 2)), 0.7) == 0)


def test_rest_state_terms():
    g = build_reference_domain(1.0, 0.5, 16, 16)
    k = Kinematics.identity(g)
    zero = assemble_nonlinear_rhs(State.rest(g, 0.0), k, CouplingParams()).magnitudes()
    assert all(v == 0.0 for v in zero.values())
    c = 0.3
    mags = assemble_nonlinear_rhs(State.rest(g, c), k, CouplingParams()).magnitudes()
    assert {n for n, v in mags.items() if v != 0} == {"F1_s"}
    assert mags["F1_s"] == pytest.approx(c * (1 + c))  # beta c (1 + gamma c / rho_s)


def test_entangled_deformation_is_refused():
    g = build_reference_domain(1.0, 0.5, 8, 8)
    kin = Kinematics.identity(g)
    G = np.broadcast_to(np.diag([-20.0, 1.0]), (8, 8, 2, 2))
    with pytest.raises(KinematicsError) as err:
        update_kinematics(kin, G, 0.1)
    assert err.value.cell == (0, 0)


def test_rk4_against_closed_forms():
    p = CouplingParams(gamma=1.5, beta=0.8, rho_s=1.2, n=3)
    cs = np.full(501, 0.7)
    t = np.linspace(0, 0.5, 501)
    cstar, g = integrate_odes(cs, p, 1e-3)
    assert np.allclose(g, growth_closed_form(0.7, p.growth_rate, t), rtol=1e-12)
    assert np.allclose(cstar, foam_closed_form(0.7, p.beta, p.gamma, p.rho_s, t), atol=1e-12)


def test_negative_concentration_is_flagged():
    with pytest.warns(RuntimeWarning):
        integrate_odes(np.full(3, -0.1), CouplingParams(), 0.1)


def test_params_validation():
    with pytest.raises(ValueError):
        CouplingParams(D_f=0.0)
    with pytest.raises(ValueError):
        CouplingParams(n=4)
    assert CouplingParams(gamma=2.0, beta=3.0, rho_s=1.5, n=2).growth_rate == pytest.approx(2.0)


def test_picard_refuses_incompatible_initial_data():
    g = build_reference_domain(2.0, 0.5, 32, 16)
    (v, c) = cases.nonlinear_perturbations(g)["v0_jump_Sigma"]
    with pytest.raises(CompatibilityError):
        picard_solve(g, v, c, 0.05, nsteps=2)


def test_picard_history_csv():
    g = build_reference_domain(1.0, 0.5, 16, 16)
    v0, c0 = small_initial_data(g)
    res = picard_solve(g, v0, c0, 0.05, nsteps=4)
    lines = res.history.to_csv().splitlines()
    assert lines[0] == "k,delta,norm,ratio" and len(lines) == 1 + res.iterations
    assert res.converged and res.history.deltas[-1] < 1e-8
    assert np.all(res.trajectory.g[:, :, : g.js] == 1.0)


def test_small_data_sup_norm():
    g = build_reference_domain(2.0, 0.5, 32, 16)
    (ux, uy), c0 = small_initial_data(g, 1e-2, 1e-2)
    X, Y = np.meshgrid(np.linspace(0, 2, 401), np.linspace(0, 1, 401), indexing="ij")
    sup = max(np.abs(ux(X, Y, 0)).max(), np.abs(uy(X, Y, 0)).max())
    assert sup == pytest.approx(1e-2, rel=1e-3) and c0 == 1e-2


def test_inverse_and_determinant():
    rng = np.random.default_rng(3)
    A = _random_F(rng, 20)
    assert np.allclose(det2(A), np.linalg.det(A))
    assert np.allclose(inv2(A), np.linalg.inv(A))
