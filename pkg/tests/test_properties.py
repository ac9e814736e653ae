import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from growthfsi.cli import compile_expression, parse_config
from growthfsi.coupling import CouplingParams, det2, inv2, ktilde_solid, ode_rhs, ode_rhs_linearized
from growthfsi.model_problems import extend_one_sided, reflect_field
from growthfsi.norms_compat import slobodeckij_seminorm

finite = st.floats(-10, 10, allow_nan=False)
positive = st.floats(0.1, 5.0)
samples = arrays(float, st.integers(4, 24), elements=finite)


diag = st.floats(0.2, 3.0).flatmap(lambda v: st.sampled_from([v, -v]))


@given(st.lists(st.tuples(st.floats(0, 2 * np.pi), diag, diag, st.floats(-3, 3)), min_size=1, max_size=5))
def test_inv2_det2(params):
    # rotation times upper triangular: det = d1 d2, never singular
    A = np.array([[[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]] @ np.array([[d1, k], [0.0, d2]])
                  for a, d1, d2, k in params])
    assert np.allclose(det2(A), [d1 * d2 for _, d1, d2, _ in params], rtol=1e-12)
    assert np.allclose(inv2(A) @ A, np.eye(2), atol=1e-10)
    assert np.allclose(inv2(A), np.linalg.inv(A), rtol=1e-10, atol=1e-10)


@given(st.floats(0, 2), st.floats(0, 2), st.floats(0.5, 2), positive, positive, positive, st.sampled_from([2, 3]))
def test_ode_forms_agree(c, cstar, g, beta, gamma, rho_s, n):
    p = CouplingParams(beta=beta, gamma=gamma, rho_s=rho_s, n=n)
    a, b = ode_rhs(c, cstar, g, p), ode_rhs_linearized(c, cstar, g, p)
    assert abs(a[0] - b[0]) <= 1e-12 * (1 + abs(a[0]))
    assert abs(a[1] - b[1]) <= 1e-12 * (1 + abs(a[1]))


@given(st.floats(0.2, 5.0), positive)
def test_isotropic_growth_is_stress_free(g, mu):
    F = (g * np.eye(2))[None]
    assert np.allclose(ktilde_solid(np.zeros(1), F, np.array([g]), mu), 0.0, atol=1e-12)


@given(samples, st.floats(-5, 5), st.floats(0.1, 0.9), st.floats(1.0, 3.0))
def test_seminorm_homogeneous(f, a, s, q):
    assert np.isclose(slobodeckij_seminorm(a * f, s, q), abs(a) * slobodeckij_seminorm(f, s, q), rtol=1e-9, atol=1e-12)


@given(st.integers(4, 16).flatmap(lambda N: st.tuples(arrays(float, N, elements=finite), arrays(float, N, elements=finite))),
       st.floats(0.1, 0.9), st.floats(1.0, 3.0))
def test_seminorm_triangle(pair, s, q):
    f, g = pair
    lhs = slobodeckij_seminorm(f + g, s, q)
    assert lhs <= slobodeckij_seminorm(f, s, q) + slobodeckij_seminorm(g, s, q) + 1e-9 * (1 + lhs)


@given(samples, st.sampled_from(["even", "odd"]))
def test_reflection_is_an_involution(f, parity):
    c = np.arange(len(f), dtype=float)
    if parity == "odd":
        f = f.copy()
        f[0] = 0.0
    full, cs = reflect_field(f, c, parity)
    sign = 1.0 if parity == "even" else -1.0
    assert np.array_equal(cs, -cs[::-1])
    assert np.allclose(full, sign * full[::-1])
    assert np.array_equal(full[len(f) - 1:], f)


@given(st.lists(finite, min_size=1, max_size=4), st.lists(finite, min_size=1, max_size=4), finite)
def test_extension_is_linear(ca, cb, lam):
    s = np.linspace(-0.5, -0.05, 7)
    fa = np.polynomial.Polynomial(ca)
    fb = np.polynomial.Polynomial(cb)
    lhs = extend_one_sided(lambda r: lam * fa(r) + fb(r), targets=s)
    rhs = lam * extend_one_sided(fa, targets=s) + extend_one_sided(fb, targets=s)
    assert np.allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(rhs).max()))


@given(finite, finite, finite, st.sampled_from(["sin", "cos", "exp"]))
def test_expression_matches_python(a, b, c, fn):
    text = f"{a!r}*x^2 + {b!r}*{fn}(y) - {c!r}*t"
    X = np.linspace(-1, 1, 5)
    Y = np.linspace(0, 1, 5)
    ref = a * X**2 + b * getattr(np, fn)(Y) - c * 0.3
    assert np.allclose(compile_expression(text)(X, Y, 0.3), ref, rtol=1e-12, atol=1e-12)


keys = st.sampled_from(["grid.Nx", "grid.Ny", "grid.L", "data.f", "data.g1", "params.rho_f", "params.lambda"])


@given(st.dictionaries(keys, st.integers(1, 99), max_size=6), st.booleans())
def test_config_normalization_round_trips(entries, comments):
    lines = ["kind = elliptic"] + [f"{k} = {v}" + ("  # note" if comments else "") for k, v in entries.items()]
    once = parse_config("\n".join(lines)).normalized()
    assert parse_config(once).normalized() == once
