import numpy as np
import pytest

from growthfsi.geometry import build_reference_domain
from growthfsi.model_problems import (
    NeumannDivergence,
    ThetaGraph,
    bent_pullback,
    contraction_sweep,
    ext_sigma,
    extend_one_sided,
    interface_demo_problem,
    neumann_series_solve,
    perturbation_terms_interface,
    perturbation_terms_quarter,
    quarter_demo_problem,
    reflect_field,
    sweep_csv,
)

from .oracles import extension_of_polynomial


def test_extension_of_a_square():
    out = extend_one_sided(lambda s: s**2, targets=np.array([-1.0, 0.5]))
    assert out[0] == pytest.approx(-3.5)
    assert out[1] == pytest.approx(0.25)


@pytest.mark.parametrize("coeffs", [(1.0, -2.0, 0.5), (0.0, 0.0, 0.0, 1.0), (2.0, 1.0, -1.0, 0.25)])
def test_extension_matches_the_hand_expansion(coeffs):
    s = np.linspace(-0.4, -0.01, 9)
    f = lambda r: sum(a * r**k for k, a in enumerate(coeffs))  # noqa: E731
    assert np.allclose(extend_one_sided(f, targets=s), extension_of_polynomial(coeffs, s), atol=1e-13)


def test_sampled_extension_refuses_short_ranges():
    c = np.linspace(0, 1, 11)
    with pytest.raises(ValueError, match="needs samples on"):
        extend_one_sided(c**2, c, targets=np.array([-0.8]))
    with pytest.raises(ValueError):
        extend_one_sided(lambda s: s)


def test_reflection_parities():
    c = np.linspace(0, 1, 6)
    even, cs = reflect_field(np.cos(c), c, "even")
    assert np.allclose(cs, np.linspace(-1, 1, 11)) and np.allclose(even, np.cos(cs))
    odd, _ = reflect_field(np.sin(c), c, "odd")
    assert np.allclose(odd, np.sin(cs))
    with pytest.raises(ValueError, match="vanishing trace"):
        reflect_field(np.cos(c), c, "odd")
    with pytest.raises(ValueError):
        reflect_field(np.cos(c), c, "both")


def test_theta_measures_slope_and_curvature():
    th = ThetaGraph.sine(0.08, 2 * np.pi, 0.0, 1.0)
    assert th.eta == pytest.approx(0.08, rel=1e-4)
    assert th.M2 == pytest.approx(0.08 * 2 * np.pi, rel=1e-3)
    assert ThetaGraph.flat().is_flat


def test_quarter_terms_for_a_tilted_graph_and_quadratic_profile():
    # theta = a x, tangential velocity y^2: M2 = 2 a y, tangential M1 = 2 mu a^2
    a, mu = 0.3, 1.7
    g = build_reference_domain(1.0, 0.5, 16, 16)
    th = ThetaGraph.from_function(lambda s: a * s, 0.0, 1.0)
    Xx, Yx = g.coords("xface")
    terms = perturbation_terms_quarter(th, (Yx**2, np.zeros(g.shape("yface"))), np.zeros(g.shape("cell")), g, mu)
    assert np.allclose(terms.m2, 2 * a * g.yc[None, :], atol=1e-10)
    assert np.allclose(terms.m1x, 2 * mu * a**2, atol=1e-8)
    assert np.allclose(terms.m1y, 0.0)
    assert np.allclose(terms.m3, 2 * mu * a * 2 * g.yc[None, :], atol=1e-10)


def test_pullback_laplacian_matches_the_chain_rule():
    th = ThetaGraph.sine(0.2, 2 * np.pi, 0.0, 1.0)
    x = np.linspace(0.0, 1.0, 201)
    yb = np.linspace(0.2, 0.8, 121)
    u = (lambda X, Y: np.sin(X) * np.cos(Y), lambda X, Y: X * Y**2)
    pb = bent_pullback(u, th, x, yb)
    X, Yb = np.meshgrid(x, yb, indexing="ij")
    Y = Yb + th.value(x)[:, None]
    exact = np.array([-2 * np.sin(X) * np.cos(Y), 2 * X])
    inner = (slice(None), slice(2, -2), slice(2, -2))
    assert np.abs(pb.laplacian()[inner] - exact[inner]).max() < 5e-3
    div_exact = np.cos(X) * np.cos(Y) + 2 * X * Y
    assert np.abs(pb.div()[2:-2, 2:-2] - div_exact[2:-2, 2:-2]).max() < 1e-3
    flipped = bent_pullback(u, th, x, yb, laplace_theta_sign=1.0)
    assert np.abs(flipped.laplacian()[inner] - exact[inner]).max() > 0.1


def test_ext_sigma_cutoff():
    x = np.linspace(0, 2, 81)
    e = ext_sigma(np.array([3.0, -1.0]), x, 0.25, length=2.0)
    assert e[0] == pytest.approx(3.0) and e[-1] == pytest.approx(-1.0)
    assert np.all(e[(x > 0.25) & (x < 1.75)] == 0)
    with pytest.raises(ValueError):
        ext_sigma(1.0, x, 0.0)


def test_interface_terms_vanish_for_flat_graphs():
    g = build_reference_domain(1.0, 0.5, 16, 16)
    rng = np.random.default_rng(0)
    u = {"ux": rng.standard_normal(g.shape("xface")), "uy": rng.standard_normal(g.shape("yface")),
         "uys": rng.standard_normal(g.Nx), "Uf": rng.standard_normal(g.Nx + 1), "Us": rng.standard_normal(g.Nx + 1)}
    t = perturbation_terms_interface(ThetaGraph.flat(0.0, 1.0), u, rng.standard_normal(g.shape("cell")), g, (1.0, 3.0))
    for arr in (t.m1x, t.m1y, t.m2, t.m4x, t.m4y, t.m4y_tilde, t.m5):
        assert np.abs(arr).max() == 0.0


def test_flat_graph_converges_at_once():
    pb = quarter_demo_problem(N=16, nsteps=2)
    res = neumann_series_solve(pb, ThetaGraph.flat(0.0, 1.0), "quarter")
    assert res.converged and res.iterations == 1


def test_slope_bound_is_enforced():
    pb = quarter_demo_problem(N=16, nsteps=2)
    with pytest.raises(ValueError, match="exceeds"):
        neumann_series_solve(pb, ThetaGraph.sine(0.3, 2 * np.pi), eta_max=0.1)


def test_steep_graph_reports_divergence():
    pb = interface_demo_problem(N=16, nsteps=2)
    with pytest.raises(NeumannDivergence) as err:
        neumann_series_solve(pb, ThetaGraph.sine(0.9, 2 * np.pi, 0.0, 1.0), "interface")
    assert len(err.value.history.ratios) >= 3


def test_sweep_csv_layout():
    rows = contraction_sweep([0.01, 0.02], interface_demo_problem(N=16, nsteps=2))
    text = sweep_csv(rows, "16x16").splitlines()
    assert text[0] == "eta,grid,iteration,ratio"
    assert len(text) == 1 + sum(len(r.history.ratios) for r in rows)
    assert rows[0].mean_ratio <= rows[1].mean_ratio
