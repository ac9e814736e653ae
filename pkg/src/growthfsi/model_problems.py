"""
Model-problem machinery for the localized Stokes and heat problems.

Coordinates follow the reduced 2D geometry: x is the normal of the end
surface G, y the normal of the wall S or the interface Sigma. A bent wall or
interface is the graph y = theta(x) (shifted by h for the interface) and is
flattened by y_bar = y - theta(x).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy.interpolate import CubicSpline

from .fields import sample
from .geometry import ReferenceGrid, build_reference_domain, smoothstep
from .report import ConditionReport
from .stokes import (
    CYLINDER_BCS,
    BC,
    StokesParams,
    StokesProblem,
    StokesSolution,
    _march,
    _system,
    _x0,
    cylinder_blocks,
    single_phase_blocks,
)

logger = logging.getLogger(__name__)

Parity = Literal["odd", "even"]


# graphs ------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ThetaGraph:
    """C^2 height function held as a cubic spline; eta and M2 are measured from it."""

    x: np.ndarray
    theta: np.ndarray
    spline: CubicSpline = field(init=False, repr=False)
    eta: float = field(init=False)
    M2: float = field(init=False)

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        th = np.asarray(self.theta, dtype=float)
        if x.ndim != 1 or x.shape != th.shape or len(x) < 4:
            raise ValueError("theta needs at least 4 samples on a 1D grid")
        if np.any(np.diff(x) <= 0):
            raise ValueError("theta sample coordinates must increase")
        s = CubicSpline(x, th)
        fine = np.linspace(x[0], x[-1], 8 * len(x) + 1)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "spline", s)
        object.__setattr__(self, "eta", float(np.abs(s(fine, 1)).max()))
        object.__setattr__(self, "M2", float(np.abs(s(fine, 2)).max()))

    @classmethod
    def from_function(cls, f: Callable, x0: float, x1: float, n: int = 257) -> ThetaGraph:
        xs = np.linspace(x0, x1, n)
        return cls(xs, np.asarray(f(xs), dtype=float) * np.ones_like(xs))

    @classmethod
    def flat(cls, x0: float = 0.0, x1: float = 1.0) -> ThetaGraph:
        return cls.from_function(np.zeros_like, x0, x1, 5)

    @classmethod
    def sine(cls, eta: float, k: float, x0: float = 0.0, x1: float = 1.0, n: int = 513) -> ThetaGraph:
        """theta = eta sin(k x) / k, so that max |theta'| = eta."""
        return cls.from_function(lambda s: eta * np.sin(k * s) / k, x0, x1, n)

    @property
    def is_flat(self) -> bool:
        return not np.any(self.theta)

    def value(self, x) -> np.ndarray:
        return self.spline(np.asarray(x, dtype=float))

    def d1(self, x) -> np.ndarray:
        return self.spline(np.asarray(x, dtype=float), 1)

    def d2(self, x) -> np.ndarray:
        return self.spline(np.asarray(x, dtype=float), 2)

    def beta(self, x) -> np.ndarray:
        return 1.0 / np.sqrt(1.0 + self.d1(x) ** 2)


# one-sided extension and reflection ---------------------------------------------

def _range_error(what: str, lo: float, hi: float, need_lo: float, need_hi: float) -> ValueError:
    return ValueError(
        f"{what} needs samples on [{need_lo:.6g}, {need_hi:.6g}] but only [{lo:.6g}, {hi:.6g}] is available"
    )


def extend_one_sided(
    f,
    coords: np.ndarray | None = None,
    targets: np.ndarray | None = None,
    axis: int = 0,
):
    """Extend f from s >= 0 to s < 0 by  f_ext(s) = -f(-2 s) + 2 f(-s/2).

    f is either a callable of one coordinate (targets required) or samples at
    increasing coords >= 0 along `axis`. For samples the default targets are
    the mirror images of every coordinate whose stretched stencil fits; the
    result is (values on both sides, coordinates), originals untouched.
    Between samples the stencil is evaluated by cubic interpolation.
    """
    if callable(f):
        if targets is None:
            raise ValueError("a callable needs explicit target points")
        s = np.asarray(targets, dtype=float)
        neg = s < 0
        out = np.asarray(f(np.where(neg, 0.0, s)), dtype=float) * np.ones_like(s)
        ext = -np.asarray(f(-2 * s[neg]), dtype=float) + 2 * np.asarray(f(-0.5 * s[neg]), dtype=float)
        out[neg] = ext
        return out

    if coords is None:
        raise ValueError("samples need their coordinates")
    c = np.asarray(coords, dtype=float)
    v = np.moveaxis(np.asarray(f, dtype=float), axis, 0)
    if c.ndim != 1 or len(c) != v.shape[0] or len(c) < 4:
        raise ValueError("need at least 4 samples matching the coordinate array")
    if c[0] < -1e-14 or np.any(np.diff(c) <= 0):
        raise ValueError("coordinates must be increasing and non-negative")
    spacing = float(np.min(np.diff(c)))
    # the seam s = 0 counts as sampled when the first sample sits within one spacing of it
    lo = 0.0 if c[0] <= spacing * (1 + 1e-12) else c[0]
    hi = c[-1]
    if targets is None:
        keep = c[c <= hi / 2 * (1 + 1e-12)]
        t = -keep[::-1]
        t = t[t < 0]
    else:
        t = np.asarray(targets, dtype=float)
        if np.any(t >= 0):
            raise ValueError("targets must lie on the negative side")
    need_hi = float(-2 * t.min()) if t.size else 0.0
    need_lo = float(-0.5 * t.max()) if t.size else 0.0
    tol = 1e-12 * max(1.0, hi)
    if need_hi > hi + tol or need_lo < lo - tol:
        raise _range_error("extension stencil", lo, hi, need_lo, need_hi)
    spline = CubicSpline(c, v, axis=0)
    ext = -spline(-2 * t) + 2 * spline(-0.5 * t)
    if targets is not None:
        return np.moveaxis(ext, 0, axis)
    full = np.concatenate([ext, v], axis=0)
    return np.moveaxis(full, 0, axis), np.concatenate([t, c])


def _trace_at_zero(v: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Value at s = 0 by Lagrange extrapolation through the first (up to four) samples."""
    m = min(4, len(c))
    out = np.zeros(v.shape[1:])
    for a in range(m):
        w = 1.0
        for b in range(m):
            if b != a:
                w *= (0.0 - c[b]) / (c[a] - c[b])
        out = out + w * v[a]
    return out


def reflect_field(
    values,
    coords: np.ndarray,
    parity: Parity,
    axis: int = 0,
    tol: float = 1e-6,
) -> tuple[np.ndarray, np.ndarray]:
    """Mirror samples at coords >= 0 across s = 0: even keeps the sign, odd flips it.

    If s = 0 is a sample it is kept once. Odd parity requires the trace at
    s = 0 to vanish within tol (absolute); otherwise the data are refused.
    """
    if parity not in ("odd", "even"):
        raise ValueError(f"parity must be 'odd' or 'even', got {parity!r}")
    c = np.asarray(coords, dtype=float)
    v = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    if c.ndim != 1 or len(c) != v.shape[0]:
        raise ValueError("coordinates must match the sampled axis")
    if c[0] < -1e-14 or np.any(np.diff(c) <= 0):
        raise ValueError("coordinates must be increasing and non-negative")
    on_line = abs(c[0]) <= 1e-14
    if parity == "odd":
        trace = v[0] if on_line else _trace_at_zero(v, c)
        worst = float(np.abs(trace).max()) if np.size(trace) else 0.0
        if worst > tol:
            raise ValueError(f"odd reflection needs a vanishing trace; found |f(0)| = {worst:.3e} > {tol:.1e}")
    sign = 1.0 if parity == "even" else -1.0
    src = v[1:] if on_line else v
    mirrored = sign * src[::-1]
    if on_line and parity == "odd":
        v = v.copy()
        v[0] = 0.0
    full = np.concatenate([mirrored, v], axis=0)
    cs = np.concatenate([-c[1:][::-1] if on_line else -c[::-1], c])
    return np.moveaxis(full, 0, axis), cs


# pullback of a bent domain --------------------------------------------------------

def _dgrad(a: np.ndarray, step, axis: int) -> np.ndarray:
    return np.gradient(a, step, axis=axis, edge_order=2)


@dataclass
class Pullback:
    """Flattened fields on the tensor grid (x, y_bar) and the operator corrections.

    Physical derivatives are the flat derivatives of u_bar plus the corrections:
    grad u = grad u_bar - d_ybar u_bar (x) grad theta, and likewise for div and
    the Laplacian.
    """

    x: np.ndarray
    ybar: np.ndarray
    u_bar: np.ndarray  # (2, nx, ny)
    pi_bar: np.ndarray | None
    grad_correction: np.ndarray  # (2, 2, nx, ny), [i, j] ~ d_j u_i
    div_correction: np.ndarray
    lap_correction: np.ndarray  # (2, nx, ny)

    def flat_grad(self) -> np.ndarray:
        dx, dy = self.x, self.ybar
        return np.array([[_dgrad(c, dx, 0), _dgrad(c, dy, 1)] for c in self.u_bar])

    def grad(self) -> np.ndarray:
        return self.flat_grad() + self.grad_correction

    def div(self) -> np.ndarray:
        g = self.flat_grad()
        return g[0, 0] + g[1, 1] + self.div_correction

    def laplacian(self) -> np.ndarray:
        dx, dy = self.x, self.ybar
        flat = np.array([_dgrad(_dgrad(c, dx, 0), dx, 0) + _dgrad(_dgrad(c, dy, 1), dy, 1) for c in self.u_bar])
        return flat + self.lap_correction


def laplace_corrections(
    u_bar: np.ndarray, x: np.ndarray, ybar: np.ndarray, theta: ThetaGraph, laplace_theta_sign: float = -1.0
) -> np.ndarray:
    """Delta u - Delta u_bar = -2 d_y d_x u_bar theta' + s theta'' d_y u_bar + theta'^2 d_y^2 u_bar.

    The chain rule gives s = -1; s = +1 reproduces the printed expansion.
    """
    d1 = theta.d1(x)[:, None]
    d2 = theta.d2(x)[:, None]
    out = []
    for c in u_bar:
        cy = _dgrad(c, ybar, 1)
        out.append(-2 * d1 * _dgrad(cy, x, 0) + laplace_theta_sign * d2 * cy + d1**2 * _dgrad(cy, ybar, 1))
    return np.array(out)


def bent_pullback(
    u,
    theta: ThetaGraph,
    x: np.ndarray,
    ybar: np.ndarray,
    pi=None,
    laplace_theta_sign: float = -1.0,
) -> Pullback:
    """Pull (u, pi) back by u_bar(x, y_bar) = u(x, y_bar + theta(x)).

    u is a pair of callables f(x, y) in physical coordinates, or an array
    (2, nx, ny) already sampled on the graph-fitted grid.
    """
    x = np.asarray(x, dtype=float)
    ybar = np.asarray(ybar, dtype=float)
    lo, hi = theta.x[0], theta.x[-1]
    if x.min() < lo - 1e-12 or x.max() > hi + 1e-12:
        raise _range_error("pullback", lo, hi, float(x.min()), float(x.max()))
    X, Yb = np.meshgrid(x, ybar, indexing="ij")
    Y = Yb + theta.value(x)[:, None]
    if isinstance(u, np.ndarray):
        ub = np.asarray(u, dtype=float)
        if ub.shape != (2,) + X.shape:
            raise ValueError(f"sampled velocity must have shape {(2,) + X.shape}")
    else:
        ub = np.array([np.asarray(c(X, Y), dtype=float) * np.ones_like(X) for c in u])
    pb = None
    if pi is not None:
        pb = np.asarray(pi, dtype=float) if isinstance(pi, np.ndarray) else np.asarray(pi(X, Y), dtype=float) * np.ones_like(X)
    d1 = theta.d1(x)[:, None]
    dy = np.array([_dgrad(c, ybar, 1) for c in ub])
    gc = np.zeros((2, 2) + X.shape)
    gc[0, 0] = -dy[0] * d1
    gc[1, 0] = -dy[1] * d1
    return Pullback(
        x=x,
        ybar=ybar,
        u_bar=ub,
        pi_bar=pb,
        grad_correction=gc,
        div_correction=-d1 * dy[0],
        lap_correction=laplace_corrections(ub, x, ybar, theta, laplace_theta_sign),
    )


# perturbation terms ----------------------------------------------------------------

def _m1_component(c, dcy, dcyy, xs, ys, theta, mu, sign):
    """mu(-2 theta' d_x d_y c + s theta'' d_y c + theta'^2 d_y^2 c) on the sample lattice."""
    d1 = theta.d1(xs)[:, None]
    d2 = theta.d2(xs)[:, None]
    return mu * (-2 * d1 * _dgrad(dcy, xs, 0) + sign * d2 * dcy + d1**2 * dcyy)


def _to_xfaces(a: np.ndarray) -> np.ndarray:
    """Cell array (Nx, m) to x-faces (Nx+1, m); ends by linear extrapolation."""
    out = np.empty((a.shape[0] + 1,) + a.shape[1:])
    out[1:-1] = 0.5 * (a[1:] + a[:-1])
    out[0] = 1.5 * a[0] - 0.5 * a[1]
    out[-1] = 1.5 * a[-1] - 0.5 * a[-2]
    return out


def _dx_cells_to_xfaces(a: np.ndarray, dx: float) -> np.ndarray:
    out = np.empty((a.shape[0] + 1,) + a.shape[1:])
    out[1:-1] = np.diff(a, axis=0) / dx
    out[0] = (-2 * a[0] + 3 * a[1] - a[2]) / dx
    out[-1] = (2 * a[-1] - 3 * a[-2] + a[-3]) / dx
    return out


@dataclass
class QuarterTerms:
    m1x: np.ndarray  # x-faces
    m1y: np.ndarray  # y-faces
    m2: np.ndarray  # cells
    m3: np.ndarray  # (2, Ny) on the ends at y_{j+1/2}
    grad_m2x: np.ndarray
    grad_m2y: np.ndarray


def perturbation_terms_quarter(
    theta: ThetaGraph,
    u_bar: tuple[np.ndarray, np.ndarray],
    pi_bar: np.ndarray,
    grid: ReferenceGrid,
    mu: float = 1.0,
    laplace_theta_sign: float = -1.0,
) -> QuarterTerms:
    """M1, M2, M3 of the flattened quarter problem on the MAC lattice of `grid`.

    u_bar = (u_x on x-faces, u_y on y-faces), pi_bar on cells.
    """
    ux, uy = (np.asarray(a, dtype=float) for a in u_bar)
    p = np.asarray(pi_bar, dtype=float)
    g = grid
    xn, xc, yn, yc = g.xn, g.xc, g.yn, g.yc
    uxy = _dgrad(ux, yc, 1)
    uyy = _dgrad(uy, yn, 1)
    m1x = _m1_component(ux, uxy, _dgrad(uxy, yc, 1), xn, yc, theta, mu, laplace_theta_sign)
    m1y = _m1_component(uy, uyy, _dgrad(uyy, yn, 1), xc, yn, theta, mu, laplace_theta_sign)
    m1x = m1x + theta.d1(xn)[:, None] * _to_xfaces(_dgrad(p, yc, 1))
    m2 = theta.d1(xc)[:, None] * 0.5 * (uxy[1:] + uxy[:-1])
    m3 = 2 * mu * np.array([theta.d1(0.0) * uxy[0], theta.d1(g.L) * uxy[-1]])
    gy = np.zeros((g.Nx, g.Ny + 1))
    gy[:, 1:-1] = np.diff(m2, axis=1) / g.dy
    return QuarterTerms(m1x, m1y, m2, m3, _dx_cells_to_xfaces(m2, g.dx), gy)


def ext_sigma(trace, x: np.ndarray, decay: float, length: float | None = None, smoothness: int = 1) -> np.ndarray:
    """Extend contact-point values into Sigma: constant in the normal direction times a C^1 cutoff.

    trace holds the value at x = 0, or the pair (x = 0, x = length) in its
    last axis when `length` is given. The cutoff is 1 at the contact point
    and 0 at distance >= decay.
    """
    if not decay > 0:
        raise ValueError(f"decay length must be positive, got {decay}")
    x = np.asarray(x, dtype=float)
    z = np.asarray(trace, dtype=float)
    chi0 = smoothstep(1.0 - np.abs(x) / decay, smoothness)
    if length is None:
        return z[..., None] * chi0
    if z.shape[-1:] != (2,):
        raise ValueError("with a length, the trace needs values at both contact points")
    chi1 = smoothstep(1.0 - np.abs(length - x) / decay, smoothness)
    return z[..., 0:1] * chi0 + z[..., 1:2] * chi1


@dataclass
class InterfaceTerms:
    m1x: np.ndarray  # x-faces
    m1y: np.ndarray  # y-faces, fluid side on Sigma
    m1y_s: np.ndarray  # solid side on Sigma (Nx,)
    m2: np.ndarray  # cells
    m4x: np.ndarray  # Sigma nodes x_i
    m4y: np.ndarray  # Sigma at x_{i+1/2}
    m4y_tilde: np.ndarray
    m5: np.ndarray  # (2, Ny)
    K1: np.ndarray  # contact values at (x = 0, x = L)
    K2: np.ndarray
    grad_m2x: np.ndarray
    grad_m2y: np.ndarray
    grad_m2y_s: np.ndarray

    @property
    def m4x_tilde(self) -> np.ndarray:
        # the cross-flow component of the repair has no counterpart in the reduced geometry
        return self.m4x


def _phase_columns(grid: ReferenceGrid, ux, uy, uys, Uf, Us):
    """Per-phase sample columns with the Sigma traces appended (coordinates included)."""
    js, h = grid.js, grid.h
    yc, yn = grid.yc, grid.yn
    fx = np.concatenate([ux[:, :js], Uf[:, None]], axis=1)
    sx = np.concatenate([Us[:, None], ux[:, js:]], axis=1)
    fxy = np.concatenate([yc[:js], [h]])
    sxy = np.concatenate([[h], yc[js:]])
    fy = uy[:, : js + 1]
    sy = np.concatenate([uys[:, None], uy[:, js + 1 :]], axis=1)
    return (fx, fxy, sx, sxy), (fy, yn[: js + 1], sy, yn[js:])


def perturbation_terms_interface(
    theta: ThetaGraph,
    u_bar: dict[str, np.ndarray],
    pi_bar: np.ndarray,
    grid: ReferenceGrid,
    mu: tuple[float, float],
    decay: float = 0.25,
    laplace_theta_sign: float = -1.0,
) -> InterfaceTerms:
    """M1, M2, M4, the repaired M4 and M5 for the flattened two-phase problem.

    u_bar holds ux, uy, uys (solid u_y on Sigma), Uf, Us (u_x traces on Sigma)
    in the MAC layout of one time level. Interface jumps are solid minus
    fluid, matching the stress-jump datum (sigma_s - sigma_f) e_y.
    """
    g = grid
    js = g.js
    mu_f, mu_s = mu
    ux, uy, uys = u_bar["ux"], u_bar["uy"], u_bar["uys"]
    Uf, Us = u_bar["Uf"], u_bar["Us"]
    p = np.asarray(pi_bar, dtype=float)
    (fx, fxy, sx, sxy), (fy, fyy, sy, syy) = _phase_columns(g, ux, uy, uys, Uf, Us)
    xn, xc = g.xn, g.xc
    s = laplace_theta_sign

    # d_y per phase, never differencing across Sigma
    fxy_d, sxy_d = _dgrad(fx, fxy, 1), _dgrad(sx, sxy, 1)
    fyy_d, syy_d = _dgrad(fy, fyy, 1), _dgrad(sy, syy, 1)
    m1x_f = _m1_component(fx, fxy_d, _dgrad(fxy_d, fxy, 1), xn, fxy, theta, mu_f, s)
    m1x_s = _m1_component(sx, sxy_d, _dgrad(sxy_d, sxy, 1), xn, sxy, theta, mu_s, s)
    m1y_f = _m1_component(fy, fyy_d, _dgrad(fyy_d, fyy, 1), xc, fyy, theta, mu_f, s)
    m1y_s = _m1_component(sy, syy_d, _dgrad(syy_d, syy, 1), xc, syy, theta, mu_s, s)
    dpy = np.concatenate([_dgrad(p[:, :js], g.yc[:js], 1), _dgrad(p[:, js:], g.yc[js:], 1)], axis=1)
    m1x = np.concatenate([m1x_f[:, :js], m1x_s[:, 1:]], axis=1)
    m1x = m1x + theta.d1(xn)[:, None] * _to_xfaces(dpy)
    m1y = np.concatenate([m1y_f, m1y_s[:, 1:]], axis=1)

    uxy_cells = np.concatenate([fxy_d[:, :js], sxy_d[:, 1:]], axis=1)
    m2 = theta.d1(xc)[:, None] * 0.5 * (uxy_cells[1:] + uxy_cells[:-1])
    mu_rows = np.where(g.yc < g.h, mu_f, mu_s)
    m5 = 2 * mu_rows[None, :] * np.array([theta.d1(0.0) * uxy_cells[0], theta.d1(g.L) * uxy_cells[-1]])

    # one-sided derivatives on Sigma, nodes x_i
    def nodes(a):  # x_{i+1/2} -> x_i
        return _to_xfaces(a[:, None])[:, 0]

    dux_dx_f, dux_dx_s = _dgrad(Uf, xn, 0), _dgrad(Us, xn, 0)
    dux_dy_f, dux_dy_s = fxy_d[:, -1], sxy_d[:, 0]
    duy_dx_f, duy_dx_s = nodes(_dgrad(fy[:, -1], xc, 0)), nodes(_dgrad(sy[:, 0], xc, 0))
    duy_dy_f, duy_dy_s = fyy_d[:, -1], syy_d[:, 0]  # at x_{i+1/2}
    d1n, d1c = theta.d1(xn), theta.d1(xc)
    b2n = theta.beta(xn) ** 2

    def jump(a_s, a_f):
        return a_s - a_f

    j_dxux = jump(mu_s * dux_dx_s, mu_f * dux_dx_f)
    j_dyux = jump(mu_s * dux_dy_s, mu_f * dux_dy_f)
    j_dyuy_n = jump(mu_s * nodes(duy_dy_s), mu_f * nodes(duy_dy_f))
    j_shear_n = jump(mu_s * (dux_dy_s + duy_dx_s), mu_f * (dux_dy_f + duy_dx_f))
    m4x = 2 * d1n * j_dxux - 2 * d1n**2 * j_dyux + d1n * j_dyuy_n / b2n - d1n**2 * j_shear_n
    # y-part at x_{i+1/2}
    j_shear_c = 0.5 * (j_shear_n[1:] + j_shear_n[:-1])
    j_dyuy_c = jump(mu_s * duy_dy_s, mu_f * duy_dy_f)
    m4y = d1c * j_shear_c - d1c**2 * j_dyuy_c

    contact = np.array([j_shear_n[0], j_shear_n[-1]])
    K2 = contact
    K1 = contact.copy()  # with no cross-flow direction the two contact combinations coincide
    m4y_tilde = m4y - d1c * ext_sigma(K2, xc, decay, g.L)

    gx = _dx_cells_to_xfaces(m2, g.dx)
    gy = np.zeros((g.Nx, g.Ny + 1))
    gy[:, 1:js] = np.diff(m2[:, :js], axis=1) / g.dy
    gy[:, js + 1 : -1] = np.diff(m2[:, js:], axis=1) / g.dy
    gy[:, js] = (1.5 * m2[:, js - 1] - 2 * m2[:, js - 2] + 0.5 * m2[:, js - 3]) / g.dy
    gy_s = (-1.5 * m2[:, js] + 2 * m2[:, js + 1] - 0.5 * m2[:, js + 2]) / g.dy
    return InterfaceTerms(
        m1x, m1y, m1y_s[:, 0], m2, m4x, m4y, m4y_tilde, m5, K1, K2, gx, gy, gy_s
    )


# Neumann series -----------------------------------------------------------------

class NeumannDivergence(RuntimeError):
    """The perturbation iteration grew for several consecutive steps."""

    def __init__(self, message: str, history: NeumannHistory):
        super().__init__(message)
        self.history = history


@dataclass
class NeumannHistory:
    eta: float
    deltas: list[float] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)

    def to_csv(self, grid_label: str = "") -> str:
        lines = ["eta,grid,iteration,ratio"]
        for k, r in enumerate(self.ratios, start=1):
            lines.append(f"{self.eta:.12e},{grid_label},{k},{r:.12e}")
        return "\n".join(lines) + "\n"


@dataclass
class NeumannResult:
    solution: StokesSolution
    history: NeumannHistory
    converged: bool
    iterations: int


QUARTER_BCS = {"left": BC.OUTFLOW, "right": BC.OUTFLOW, "bottom": BC.DIRICHLET, "top": BC.DIRICHLET}


def _state_norm(grid: ReferenceGrid, a: StokesSolution, b: StokesSolution | None) -> float:
    parts = [("ux", 1.0), ("uy", 1.0), ("p", 1.0)]
    worst = 0.0
    for n in range(a.nt):
        tot = 0.0
        for name, _ in parts:
            d = getattr(a, name)[n] - (0.0 if b is None else getattr(b, name)[n])
            tot += float(np.sum(d * d))
        worst = max(worst, tot)
    return math.sqrt(worst * grid.dx * grid.dy)


def _quarter_flat_solver(problem: StokesProblem):
    sides = QUARTER_BCS
    system = _system(problem, sides, two_phase=False)
    mu = problem.params.mu_f

    def solve(prev: StokesSolution | None, theta: ThetaGraph, sign: float) -> StokesSolution:
        terms = []
        if prev is not None:
            for n in range(prev.nt):
                terms.append(
                    perturbation_terms_quarter(theta, (prev.ux[n], prev.uy[n]), prev.p[n], problem.grid, mu, sign)
                )

        def blocks_at(n: int) -> dict[str, np.ndarray]:
            b = single_phase_blocks(problem, sides, n)
            if prev is None:
                return b
            tm = terms[n]
            b["fx"] = b["fx"] + tm.m1x - mu * tm.grad_m2x
            b["fy"] = b["fy"] + tm.m1y - mu * tm.grad_m2y
            b["fd"] = b["fd"] + tm.m2
            b["nrm_left"] = b["nrm_left"] + tm.m3[0]
            b["nrm_right"] = b["nrm_right"] + tm.m3[1]
            return b

        return _march(problem, system, blocks_at, _x0(problem, system))

    return solve


def _interface_flat_solver(problem: StokesProblem, decay: float):
    system = _system(problem, CYLINDER_BCS, two_phase=True)
    pr = problem.params
    mu = (pr.mu_f, pr.mu_s)
    g = problem.grid
    mu_x = np.where(g.yc < g.h, pr.mu_f, pr.mu_s)[None, :]
    mu_y = np.where(g.yn <= g.h, pr.mu_f, pr.mu_s)[None, :]

    def solve(prev: StokesSolution | None, theta: ThetaGraph, sign: float) -> StokesSolution:
        terms = []
        if prev is not None:
            for n in range(prev.nt):
                state = {
                    "ux": prev.ux[n], "uy": prev.uy[n], "uys": prev.uy_sigma_s[n],
                    "Uf": prev.u_sigma_f[n], "Us": prev.u_sigma_s[n],
                }
                terms.append(perturbation_terms_interface(theta, state, prev.p[n], g, mu, decay, sign))

        def blocks_at(n: int) -> dict[str, np.ndarray]:
            b = cylinder_blocks(problem, n)
            if prev is None:
                return b
            tm = terms[n]
            b["fx"] = b["fx"] + tm.m1x - mu_x * tm.grad_m2x
            b["fy"] = b["fy"] + tm.m1y - mu_y * tm.grad_m2y
            b["fy_s"] = b["fy_s"] + tm.m1y_s - pr.mu_s * tm.grad_m2y_s
            b["fd"] = b["fd"] + tm.m2
            b["g2x"] = b["g2x"] + tm.m4x_tilde
            b["g2y"] = b["g2y"] + tm.m4y_tilde
            b["nrm_left"] = b["nrm_left"] + tm.m5[0]
            b["nrm_right"] = b["nrm_right"] + tm.m5[1]
            return b

        return _march(problem, system, blocks_at, _x0(problem, system))

    return solve


def neumann_series_solve(
    problem: StokesProblem,
    theta: ThetaGraph,
    kind: Literal["quarter", "interface"] = "quarter",
    tol: float = 1e-8,
    max_iter: int = 60,
    eta_max: float | None = None,
    decay: float = 0.25,
    flat_solver: Callable | None = None,
    laplace_theta_sign: float = -1.0,
) -> NeumannResult:
    """Fixed point u = L^{-1}(F + M(theta, u)) with L the flat solve.

    kind='quarter' uses the one-phase box with outflow ends and no-slip
    walls; kind='interface' the two-phase cylinder. A custom flat_solver
    takes (previous iterate or None, theta, sign) and returns a solution.
    The iteration stops when the successive difference drops below tol
    relative to the iterate; three consecutive ratios above one raise
    NeumannDivergence carrying the history.
    """
    if eta_max is not None and theta.eta > eta_max:
        raise ValueError(f"measured slope {theta.eta:.3g} exceeds the configured bound {eta_max:.3g}")
    if flat_solver is None:
        if kind == "quarter":
            flat_solver = _quarter_flat_solver(problem)
        elif kind == "interface":
            flat_solver = _interface_flat_solver(problem, decay)
        else:
            raise ValueError(f"unknown kind {kind!r}")
    g = problem.grid
    hist = NeumannHistory(theta.eta)
    cur = flat_solver(None, theta, laplace_theta_sign)
    above = 0
    for k in range(1, max_iter + 1):
        nxt = flat_solver(cur, theta, laplace_theta_sign)
        delta = _state_norm(g, nxt, cur)
        size = _state_norm(g, nxt, None)
        hist.deltas.append(delta)
        cur = nxt
        if len(hist.deltas) > 1:
            prev = hist.deltas[-2]
            r = delta / prev if prev > 0 else 0.0
            hist.ratios.append(r)
            above = above + 1 if r > 1 else 0
            if above >= 3:
                raise NeumannDivergence(
                    f"perturbation iteration diverges at eta={theta.eta:.3g}: ratios {hist.ratios[-3:]}", hist
                )
        if not np.isfinite(delta):
            raise NeumannDivergence(f"non-finite iterate at eta={theta.eta:.3g}", hist)
        if delta <= tol * max(size, 1e-300):
            return NeumannResult(cur, hist, True, k)
    return NeumannResult(cur, hist, False, max_iter)


def quarter_demo_problem(N: int = 64, T: float = 0.1, nsteps: int = 10, mu: float = 1.0) -> StokesProblem:
    """Smooth forcing on the unit box with no-slip walls and homogeneous outflow ends."""
    grid = build_reference_domain(1.0, 0.5, N, N)

    def fx(X, Y, t):
        return np.sin(np.pi * Y) * np.cos(np.pi * X)

    def fy(X, Y, t):
        return np.sin(np.pi * X) * np.sin(2 * np.pi * Y)

    return StokesProblem(
        grid=grid, params=StokesParams(1.0, 1.0, mu, mu), f_u=(fx, fy), dt=T / nsteps, nsteps=nsteps
    )


def interface_demo_problem(N: int = 64, T: float = 0.1, nsteps: int = 10, mu_s: float = 10.0) -> StokesProblem:
    """Smooth forcing on the two-phase cylinder with a stiffer solid; all jump and end data zero."""
    grid = build_reference_domain(1.0, 0.5, N, N)

    def fx(X, Y, t):
        return np.sin(np.pi * Y) * np.cos(np.pi * X)

    def fy(X, Y, t):
        return np.sin(np.pi * X) * np.sin(2 * np.pi * Y)

    return StokesProblem(
        grid=grid, params=StokesParams(1.0, 1.0, 1.0, mu_s), f_u=(fx, fy), dt=T / nsteps, nsteps=nsteps
    )


@dataclass
class SweepRow:
    eta: float
    converged: bool
    diverged: bool
    iterations: int
    history: NeumannHistory

    @property
    def mean_ratio(self) -> float:
        """Geometric mean of the measured ratios (average contraction per iteration)."""
        r = np.asarray(self.history.ratios, dtype=float)
        if r.size == 0:
            return 0.0
        if np.any(r <= 0):
            return 0.0
        return float(np.exp(np.mean(np.log(r))))

    @property
    def max_ratio(self) -> float:
        return max(self.history.ratios, default=0.0)


def contraction_sweep(
    etas,
    problem: StokesProblem | None = None,
    k: float = 2 * np.pi,
    kind: Literal["quarter", "interface"] = "interface",
    tol: float = 1e-8,
    max_iter: int = 60,
) -> list[SweepRow]:
    """Neumann iteration over theta = eta sin(k x)/k for each eta."""
    if problem is None:
        problem = interface_demo_problem() if kind == "interface" else quarter_demo_problem()
    rows = []
    for eta in etas:
        theta = ThetaGraph.sine(float(eta), k, 0.0, problem.grid.L)
        try:
            res = neumann_series_solve(problem, theta, kind, tol=tol, max_iter=max_iter)
            rows.append(SweepRow(float(eta), res.converged, False, res.iterations, res.history))
        except NeumannDivergence as err:
            rows.append(SweepRow(float(eta), False, True, len(err.history.deltas), err.history))
        logger.info("eta=%g mean ratio=%.4f", eta, rows[-1].mean_ratio)
    return rows


def sweep_csv(rows: list[SweepRow], grid_label: str) -> str:
    lines = ["eta,grid,iteration,ratio"]
    for row in rows:
        for it, r in enumerate(row.history.ratios, start=1):
            lines.append(f"{row.eta:.12e},{grid_label},{it},{r:.12e}")
    return "\n".join(lines) + "\n"


# reflection-symmetry oracles ----------------------------------------------------

REFLECTION_KINDS = ("stokes_quarter", "twophase_half", "heat_quarter")


@dataclass
class ConvergenceReport(ConditionReport):
    """Condition report that also keeps the per-level measurements."""

    levels: list[int] = field(default_factory=list)
    table: dict[str, list[float]] = field(default_factory=dict)

    def orders(self, name: str) -> list[float]:
        v = np.asarray(self.table[name], dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return list(np.log2(v[:-1] / v[1:]))


def _edge(a0, a1, a2):
    return (15 * a0 - 10 * a1 + 3 * a2) / 8


def _stokes_default(s, y, t):
    return {
        "fx": t * np.cos(np.pi * s / 2) * np.sin(np.pi * y) + 0 * s,
        "fy": t * np.sin(np.pi * s) * y * (1 - y),
        "fd": 0 * s,
    }


def _wall_default(s, t):
    return {"gx": t * (1 + np.cos(np.pi * s)) / 2, "gy": t * np.sin(np.pi * s)}


def _twophase_default(s, t):
    return {
        "g1x": 0 * s,
        "g1y": 0 * s,
        "g2x": t * np.cos(np.pi * s / 2) ** 2,
        "g2y": t * np.sin(np.pi * s),
        "g5x": 0 * s,
        "g5y": 0 * s,
    }


def _heat_default(s, y, t):
    return {"f": t * np.cos(np.pi * s) * y, "c0": np.cos(np.pi * s) ** 2 * (1 + 0 * y)}


def _heat_flux_default(s, t):
    return {"g2": t * (1 + np.cos(np.pi * s))}


BODY_PARITY = {"fx": "even", "fy": "odd", "fd": "odd", "f": "even", "c0": "even"}
LINE_PARITY = {
    "gx": "even", "gy": "odd", "g1x": "even", "g1y": "odd", "g2x": "even", "g2y": "odd",
    "g5x": "even", "g5y": "odd", "g2": "even",
}


def _doubled(values_pos: np.ndarray, s_pos: np.ndarray, parity: str, tol: float) -> np.ndarray:
    scale = max(1.0, float(np.abs(values_pos).max()) if values_pos.size else 1.0)
    full, _ = reflect_field(values_pos, s_pos, parity, axis=0, tol=tol * scale)
    return full


class _Sampler:
    """Samples positive-side data at the MAC positions of the doubled or the original grid."""

    def __init__(self, body, line, T: float, nsteps: int, tol: float):
        self.body, self.line = body, line
        self.times = np.linspace(0.0, T, nsteps + 1)
        self.tol = tol

    def body_at(self, key, s, y, doubled: bool) -> np.ndarray:
        """s: 1D positive-side coordinates of the column positions; y: 1D rows."""
        S, Yg = np.meshgrid(s, y, indexing="ij")
        out = []
        for t in self.times:
            v = np.asarray(self.body(S, Yg, t)[key], dtype=float) * np.ones_like(S)
            out.append(_doubled(v, s, BODY_PARITY[key], self.tol) if doubled else v)
        return np.array(out)

    def line_at(self, key, s, doubled: bool) -> np.ndarray:
        out = []
        for t in self.times:
            v = np.asarray(self.line(s, t)[key], dtype=float) * np.ones_like(s)
            out.append(_doubled(v, s, LINE_PARITY[key], self.tol) if doubled else v)
        return np.array(out)


def _positions(grid: ReferenceGrid, center: float):
    """Positive-side coordinates of node and cell columns (doubled grid when center > 0)."""
    sn = grid.xn[grid.xn >= center - 1e-12] - center
    sc = grid.xc[grid.xc > center] - center
    return np.abs(sn), sc


def _stokes_pair(kind: str, N: int, L0: float, smp: _Sampler, dt: float, nsteps: int, mu: tuple, h: float):
    """Solve on the doubled grid and on the original half; return both solutions."""
    out = []
    for doubled in (True, False):
        Lx = 2 * L0 if doubled else L0
        Nx = 2 * N if doubled else N
        g = build_reference_domain(Lx, h, Nx, N)
        center = L0 if doubled else 0.0
        sn, sc = _positions(g, center)
        fx = smp.body_at("fx", sn, g.yc, doubled)
        fy = smp.body_at("fy", sc, g.yn, doubled)
        fd = smp.body_at("fd", sc, g.yc, doubled)
        params = StokesParams(1.0, 1.0, mu[0], mu[1])
        if kind == "stokes_quarter":
            pr = StokesProblem(g, params, f_u=(fx, fy), f_d=fd, dt=dt, nsteps=nsteps)
            gx = smp.line_at("gx", sn, doubled)
            gy = smp.line_at("gy", sc, doubled)
            system = _system(pr, QUARTER_BCS, two_phase=False)

            def blocks_at(n, pr=pr, gx=gx, gy=gy):
                b = single_phase_blocks(pr, QUARTER_BCS, n)
                b["tan_bottom"], b["nrm_bottom"] = gx[n], gy[n]
                return b

            out.append(_march(pr, system, blocks_at, _x0(pr, system)))
        else:
            pair = {k: smp.line_at(k, sn if k.endswith("x") else sc, doubled)
                    for k in ("g1x", "g1y", "g2x", "g2y", "g5x", "g5y")}
            pr = StokesProblem(
                g, params, f_u=(fx, fy), f_d=fd,
                g1=(pair["g1x"], pair["g1y"]), g2=(pair["g2x"], pair["g2y"]),
                g5=(pair["g5x"], pair["g5y"]), dt=dt, nsteps=nsteps,
            )
            system = _system(pr, CYLINDER_BCS, two_phase=True)
            out.append(_march(pr, system, lambda n, pr=pr: cylinder_blocks(pr, n), _x0(pr, system)))
    return out


def _l2_line(v: np.ndarray, d: float) -> float:
    return float(np.sqrt(np.sum(v * v) * d))


def _stokes_traces(sol: StokesSolution, N: int, nsteps: int) -> dict[str, float]:
    g = sol.grid
    dx, dy = g.dx, g.dy
    worst = {"u_tangential": 0.0, "d_n_u_normal": 0.0, "pressure": 0.0}
    for n in range(1, nsteps + 1):
        uy, p, ux = sol.uy[n], sol.p[n], sol.ux[n]
        worst["u_tangential"] = max(worst["u_tangential"], _l2_line(_edge(uy[N], uy[N + 1], uy[N + 2]), dy))
        worst["pressure"] = max(worst["pressure"], _l2_line(_edge(p[N], p[N + 1], p[N + 2]), dy))
        dudx = (-3 * ux[N] + 4 * ux[N + 1] - ux[N + 2]) / (2 * dx)
        worst["d_n_u_normal"] = max(worst["d_n_u_normal"], _l2_line(dudx, dy))
    return worst


def _restriction_gap(full: StokesSolution, half: StokesSolution, N: int) -> float:
    g = half.grid
    worst = 0.0
    for n in range(1, half.nt):
        d = [full.ux[n][N:] - half.ux[n], full.uy[n][N:] - half.uy[n], full.p[n][N:] - half.p[n]]
        worst = max(worst, math.sqrt(sum(float(np.sum(a * a)) for a in d) * g.dx * g.dy))
    return worst


def _heat_pair(N: int, L0: float, smp: _Sampler, dt: float, nsteps: int, D: float):
    from .heat import HeatProblem, solve_heat_neumann

    out = []
    for doubled in (True, False):
        Lx = 2 * L0 if doubled else L0
        Nx = 2 * N if doubled else N
        # the solid ring of a half-height grid serves as the quarter; its bottom is S
        g = build_reference_domain(Lx, 0.5, Nx, 2 * N)
        center = L0 if doubled else 0.0
        _, sc = _positions(g, center)
        f = smp.body_at("f", sc, g.yc, doubled)
        c0 = smp.body_at("c0", sc, g.yc, doubled)[0]
        g2 = smp.line_at("g2", sc, doubled)
        pr = HeatProblem(g, D, f_c=f, flux={"sigma": g2}, c0=c0, dt=dt, nsteps=nsteps)
        out.append(solve_heat_neumann(pr, "solid", check=False))
    return out


def verify_reflection_symmetry(
    kind: str,
    data: dict | None = None,
    levels: tuple[int, ...] = (16, 32, 64),
    L0: float = 1.0,
    T: float = 0.1,
    nsteps: int = 5,
    min_order: float = 0.9,
    tol: float = 1e-3,
) -> ConvergenceReport:
    """Solve the doubled-domain problem from parity-extended data and measure the vanishing traces.

    data holds positive-side callables: 'body'(s, y, t) and 'line'(s, t)
    returning dicts of fields, s being the distance from the reflection line.
    Each trace must decrease between consecutive levels at the given order;
    the entry residual is the worst ratio value_fine / (value_coarse 2^-order),
    passing at <= 1. The restriction of the doubled solution is compared
    with a direct solve on the original half as well. Odd data must vanish on
    the line to tol relative to their size (cell data are extrapolated there).
    """
    if kind not in REFLECTION_KINDS:
        raise ValueError(f"kind must be one of {REFLECTION_KINDS}, got {kind!r}")
    if len(levels) < 2 or any(b != 2 * a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must double successively")
    data = data or {}
    if kind == "heat_quarter":
        body = data.get("body", _heat_default)
        line = data.get("line", _heat_flux_default)
    elif kind == "stokes_quarter":
        body = data.get("body", _stokes_default)
        line = data.get("line", _wall_default)
    else:
        body = data.get("body", _stokes_default)
        line = data.get("line", _twophase_default)
    smp = _Sampler(body, line, T, nsteps, tol)
    dt = T / nsteps
    table: dict[str, list[float]] = {}

    def put(name: str, value: float) -> None:
        table.setdefault(name, []).append(value)

    for N in levels:
        if kind == "heat_quarter":
            full, half = _heat_pair(N, L0, smp, dt, nsteps, data.get("D", 1.0))
            dx = full.grid.dx
            worst = 0.0
            for n in range(1, nsteps + 1):
                c = full.c[n]
                worst = max(worst, _l2_line((-2 * c[N] + 3 * c[N + 1] - c[N + 2]) / dx, full.grid.dy))
            put("d_n_c", worst)
            gap = max(
                math.sqrt(float(np.sum((full.c[n][N:] - half.c[n]) ** 2)) * dx * full.grid.dy)
                for n in range(1, nsteps + 1)
            )
            put("restriction_matches_quarter", gap)
        else:
            mu = data.get("mu", (1.0, 1.0) if kind == "stokes_quarter" else (1.0, 3.0))
            full, half = _stokes_pair(kind, N, L0, smp, dt, nsteps, mu, data.get("h", 0.5))
            for name, v in _stokes_traces(full, N, nsteps).items():
                put(name, v)
            put("restriction_matches_" + ("quarter" if kind == "stokes_quarter" else "half"), _restriction_gap(full, half, N))

    rep = ConvergenceReport(f"reflection symmetry: {kind}", levels=list(levels), table=table)
    factor = 2.0 ** (-min_order)
    for name, vals in table.items():
        if name.startswith("restriction"):
            # the discrete outflow/Neumann line condition is exactly the mirrored stencil
            rep.add(name, "original half, every level; exact discrete identity", max(vals), 1e-10)
            continue
        floor = 1e-13 * max(1.0, max(vals))
        ratio = 0.0
        for a, b in zip(vals, vals[1:]):
            if b > floor:
                ratio = max(ratio, b / max(a * factor, floor))
        rep.add(name, f"reflection line, one-sided; value ratio per level vs 2^-{min_order}", ratio, 1.0)
    return rep
