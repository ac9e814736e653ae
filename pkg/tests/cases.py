"""Manufactured problems and single-condition perturbations shared by the tests."""

from __future__ import annotations

import dataclasses

import numpy as np
import sympy as sp

from growthfsi.elliptic import EllipticProblem
from growthfsi.fields import Piecewise, sample
from growthfsi.heat import HeatProblem
from growthfsi.manufactured import lam, piece, t, x, y
from growthfsi.studies import HEAT_D, HEAT_SPACE, STOKES_PARAMS, STOKES_SPACE, parabolic_problem
from growthfsi.coupling import small_initial_data

EPS = 0.5
NAN = float("nan")


def bump(base, x0, y0=None, when="t0", value=None):
    """base plus EPS (or replaced by `value`) at the sample points with x = x0 (and y = y0)."""

    def f(X, Y, T):
        m = np.isclose(X, x0)
        if y0 is not None:
            m = m & np.isclose(Y, y0)
        on = (T == 0) if when == "t0" else (T > 0)
        out = base(X, Y, T) + 0.0 * X
        return np.where(m & on, out + EPS if value is None else value, out)

    return f


def _swap(pair, k, new):
    out = list(pair)
    out[k] = new
    return tuple(out)


# Stokes ---------------------------------------------------------------------

def stokes_problem(grid, dt=0.01, nsteps=3):
    return STOKES_SPACE.problem(grid, STOKES_PARAMS, dt, nsteps)


def stokes_perturbations(pb):
    g = pb.grid
    xm = g.xn[g.Nx // 2]
    return {
        "div_u0": dict(f_d=Piecewise(bump(pb.f_d.fluid, g.xc[g.Nx // 4], g.yc[g.js // 2]), pb.f_d.solid)),
        "u0_tangential_G": dict(g3=Piecewise(bump(pb.g3.fluid, 0.0, g.yn[g.js // 2]), pb.g3.solid)),
        "u0_wall_S": dict(g5=_swap(pb.g5, 0, bump(pb.g5[0], xm))),
        "u0_jump_Sigma": dict(g1=_swap(pb.g1, 0, bump(pb.g1[0], xm))),
        "u0_tangential_stress_jump": dict(g2=_swap(pb.g2, 0, bump(pb.g2[0], xm))),
        "g3_equals_g5_contact_G": dict(g5=_swap(pb.g5, 1, bump(pb.g5[1], g.xc[0], when="t>0"))),
        "g3_jump_equals_g1_contact_Sigma": dict(g1=_swap(pb.g1, 1, bump(pb.g1[1], g.xc[0], when="t>0"))),
        "g2_normal_contact_Sigma": dict(g2=_swap(pb.g2, 1, bump(pb.g2[1], g.xc[0], when="t>0"))),
    }


# vector diffusion transmission ----------------------------------------------------

def parabolic_perturbations(pb):
    g = pb.grid
    xm = g.xn[g.Nx // 2]
    ym = g.yc[g.js // 2]
    ysm = g.yc[(g.js + g.Ny) // 2]
    fx = pb.f_u[0]
    return {
        "01_forcing": dict(f_u=(dataclasses.replace(fx, fluid=bump(fx.fluid, xm, ym, "t>0", NAN)), pb.f_u[1])),
        "02_g1": dict(g1=_swap(pb.g1, 0, bump(pb.g1[0], xm, None, "t>0", NAN))),
        "03_g2": dict(g2=_swap(pb.g2, 0, bump(pb.g2[0], xm, None, "t>0", NAN))),
        "04_g3": dict(g3=dataclasses.replace(pb.g3, fluid=bump(pb.g3.fluid, 0.0, g.yn[g.js // 2], "t>0", NAN))),
        "05_g4": dict(g4=dataclasses.replace(pb.g4, solid=bump(pb.g4.solid, 0.0, ysm, "t>0", NAN))),
        "06_g5": dict(g5=_swap(pb.g5, 0, bump(pb.g5[0], xm, None, "t>0", NAN))),
        "07_initial_interface": dict(g1=_swap(pb.g1, 0, bump(pb.g1[0], xm))),
        "08_initial_boundary": dict(g5=_swap(pb.g5, 0, bump(pb.g5[0], xm))),
        "09_g3_jump_contact_Sigma": dict(g1=_swap(pb.g1, 1, bump(pb.g1[1], g.xc[0], when="t>0"))),
        "11_g2_normal_contact_Sigma": dict(g2=_swap(pb.g2, 1, bump(pb.g2[1], g.xc[0], when="t>0"))),
        "12_contact_S": dict(g5=_swap(pb.g5, 1, bump(pb.g5[1], g.xc[0], when="t>0"))),
    }


def parabolic(grid, dt=0.01, nsteps=3):
    return parabolic_problem(grid, dt, nsteps)


# elliptic ---------------------------------------------------------------------

ELLIPTIC_FIELDS = (
    sp.cos(sp.pi * x / 2) * sp.cos(y) + x * y**2,
    sp.sin(x) * sp.exp(-y) + 1,
)


def elliptic_problem(grid, rho=(1.0, 3.0), lam_=1.0):
    pf, ps = ELLIPTIC_FIELDS
    h = sp.Rational(grid.js, grid.Ny)

    def lap(e):
        return sp.diff(e, x, 2) + sp.diff(e, y, 2)

    return EllipticProblem(
        grid, lam_, rho,
        f=piece(lam_ * pf - lap(pf), lam_ * ps - lap(ps)),
        g1=lam((rho[0] * pf - rho[1] * ps).subs(y, h)),
        g2=lam((sp.diff(ps, y) - sp.diff(pf, y)).subs(y, h)),
        g3=piece(rho[0] * pf, rho[1] * ps),
        g4=lam(sp.diff(ps, y).subs(y, 1)),
    )


def elliptic_perturbations(ep):
    x0 = ep.grid.xc[0]
    return {
        "g3_jump_equals_g1_contact_Sigma": dict(g1=bump(ep.g1, x0)),
        "normal_derivative_jump_contact_Sigma": dict(g2=bump(ep.g2, x0)),
        "normal_derivative_contact_S": dict(g4=bump(ep.g4, x0)),
    }


# heat -------------------------------------------------------------------------

def heat_problem(grid, region, dt=0.01, nsteps=3, D=HEAT_D):
    c = HEAT_SPACE[region]
    flux = {"left": lam(-D * sp.diff(c, x)), "right": lam(D * sp.diff(c, x))}
    if region == "fluid":
        flux["sigma"] = lam(D * sp.diff(c, y))
    else:
        flux["sigma"] = lam(-D * sp.diff(c, y))
        flux["top"] = lam(D * sp.diff(c, y))
    f = sp.diff(c, t) - D * (sp.diff(c, x, 2) + sp.diff(c, y, 2))
    return HeatProblem(grid, D, lam(f), flux, lam(c), dt, nsteps)


def heat_perturbations(pr, region):
    g = pr.grid
    fl = pr.flux
    yi = g.yc[g.js // 2] if region == "fluid" else g.yc[(g.js + g.Ny) // 2]
    cases = {
        "initial_flux": {"left": bump(fl["left"], 0.0, yi)},
        "corner_sigma": {"sigma": bump(fl["sigma"], g.xc[0], when="t>0")},
    }
    if region == "solid":
        cases["corner_S"] = {"top": bump(fl["top"], g.xc[0], when="t>0")}
    return {k: dict(flux={**fl, **v}) for k, v in cases.items()}


# nonlinear initial data -------------------------------------------------------------

def nonlinear_initial(grid):
    """Compatible velocity sampled onto the MAC faces, and the constant concentration."""
    (ux0, uy0), c0 = small_initial_data(grid)
    ux = sample(ux0, *grid.coords("xface"), 0.0)
    uy = sample(uy0, *grid.coords("yface"), 0.0)
    return ux, uy, c0


def _bell(Y, center, width):
    s = np.clip((Y - center) / width, -1.0, 1.0)
    return (1 - s**2) ** 3


def nonlinear_perturbations(grid, E=0.1):
    """Each case changes (v0, c0) so that exactly one initial condition breaks.

    Velocity changes are x-uniform rows of u_x or come from a discrete stream
    function, so the discrete divergence is untouched unless intended.
    """
    ux, uy, c0 = nonlinear_initial(grid)
    js, h, L = grid.js, grid.h, grid.L
    out = {}

    def vel(name, a, b):
        out[name] = ((a, b), c0)

    a = ux.copy()
    a[grid.Nx // 2, js // 2] += E
    vel("div_v0", a, uy)
    X, Y = grid.coords("node")
    psi = E * np.sin(np.pi * X / L) * np.where((Y > 0.1) & (Y < 0.3), np.sin(np.pi * (Y - 0.1) / 0.2) ** 2, 0.0)
    vel("tangential_v0_G", ux + np.diff(psi, axis=1) / grid.dy, uy - np.diff(psi, axis=0) / grid.dx)
    a = ux.copy()
    a[:, -3:] += E
    vel("v0_wall_S", a, uy)
    a = ux.copy()
    a[:, js : js + 3] += E
    vel("v0_jump_Sigma", a, uy)
    a = ux.copy()
    a[:, js : js + 3] += E * (grid.yc[js : js + 3] - h)
    vel("v0_tangential_stress_jump", a, uy)

    v = (ux, uy)
    out["robin_Sigma"] = (v, lambda X, Y, T: c0 + E * (Y < h))
    out["flux_continuity_Sigma"] = (v, lambda X, Y, T: c0 + E * (Y - h) * _bell(Y, h, 0.2) * (Y < h))
    out["flux_G"] = (v, lambda X, Y, T: c0 + E * X * (L - X) * _bell(Y, 0.25, 0.12))
    return out
