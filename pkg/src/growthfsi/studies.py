"""
Manufactured convergence studies.

Each study solves one problem family on a sequence of levels (Nx, Ny, dt)
and records the discrete L2 error against the symbolic exact solution at the
final time. Spatial studies refine dt with dx^2 so the time error stays
below the space error; temporal studies use fields that are linear in space,
which every stencil here reproduces exactly, so only the time error remains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import sympy as sp

from .elliptic import EllipticProblem, solve_elliptic_transmission, solve_laplace_transmission
from .geometry import build_reference_domain
from .heat import HeatProblem, region_rows, solve_heat_neumann, solve_parabolic_transmission
from .manufactured import StokesMMS, as_expr, l2_error, lam, piece, t, x, y
from .stokes import StokesParams, StokesProblem, solve_two_phase

Level = tuple[int, int, float]


@dataclass
class ConvergenceTable:
    name: str
    refine: str  # "space" or "time"
    levels: list[Level] = field(default_factory=list)
    errors: list[float] = field(default_factory=list)

    @property
    def ratios(self) -> list[float]:
        return [math.log2(a / b) for a, b in zip(self.errors, self.errors[1:])]

    @property
    def observed_order(self) -> float:
        r = self.ratios
        return float(np.mean(r)) if r else float("nan")

    def to_csv(self) -> str:
        lines = ["level,Nx,Ny,dt,error,log2_ratio"]
        r = [float("nan")] + self.ratios
        for k, ((nx, ny, dt), e) in enumerate(zip(self.levels, self.errors)):
            lines.append(f"{k},{nx},{ny},{dt:.12e},{e:.12e},{r[k]:.12e}")
        return "\n".join(lines) + "\n"


def _run(name: str, refine: str, levels: list[Level], error_at: Callable[[int, int, float], float]):
    if len(levels) < 3:
        raise ValueError("a convergence study needs at least 3 levels")
    tab = ConvergenceTable(name, refine)
    for nx, ny, dt in levels:
        tab.levels.append((nx, ny, dt))
        tab.errors.append(float(error_at(nx, ny, dt)))
    return tab


# elliptic and Laplace -----------------------------------------------------------

L_BOX = 2.0
H = 0.5


def _cells_exact(grid, ef, es):
    Xc, Yc = grid.coords("cell")
    return np.where(Yc < grid.h, lam(ef)(Xc, Yc, 0.0), lam(es)(Xc, Yc, 0.0))


def elliptic_error(nx: int, ny: int, dt: float = 0.0, rho=(1.0, 3.0), lam_: float = 1.0) -> float:
    pf = sp.cos(sp.pi * x / L_BOX) * sp.cos(y) + x * y**2
    ps = sp.sin(x) * sp.exp(-y) + 1
    grid = build_reference_domain(L_BOX, H, nx, ny)
    h = sp.Rational(grid.js, grid.Ny)
    lap = lambda e: sp.diff(e, x, 2) + sp.diff(e, y, 2)  # noqa: E731
    pr = EllipticProblem(
        grid, lam_, rho,
        f=piece(lam_ * pf - lap(pf), lam_ * ps - lap(ps)),
        g1=lam((rho[0] * pf - rho[1] * ps).subs(y, h)),
        g2=lam((sp.diff(ps, y) - sp.diff(pf, y)).subs(y, h)),
        g3=piece(rho[0] * pf, rho[1] * ps),
        g4=lam(sp.diff(ps, y).subs(y, 1)),
    )
    sol = solve_elliptic_transmission(pr, check=False)
    return l2_error(grid, sol.phi, _cells_exact(grid, pf, ps))


def laplace_error(nx: int, ny: int, dt: float = 0.0, rho=(1.0, 2.0)) -> float:
    pf = sp.sin(sp.pi * x / L_BOX) * sp.cos(2 * sp.pi * y)
    ps = pf * rho[0] / rho[1]
    grid = build_reference_domain(L_BOX, H, nx, ny)
    lap = lambda e: sp.diff(e, x, 2) + sp.diff(e, y, 2)  # noqa: E731
    sol = solve_laplace_transmission(grid, piece(-lap(pf), -lap(ps)), rho)
    return l2_error(grid, sol.phi, _cells_exact(grid, pf, ps))


# Stokes ---------------------------------------------------------------------------

STOKES_PARAMS = StokesParams(1.0, 2.0, 1.0, 3.0)
STOKES_SPACE = StokesMMS(
    ux=("cos(pi*y)*sin(x)*exp(-t)", "(y**2+x)*exp(-t)"),
    uy=("sin(pi*y)*cos(2*x)*exp(-t)", "(x*y - y**3)*exp(-t)"),
    p=("cos(x)*cos(pi*y)*exp(-t)", "(x*y+1)*exp(-t)"),
)
# linear in space: the spatial discretization is exact, only the stepper errs
STOKES_TIME = StokesMMS(
    ux=("(1+x)*exp(-2*t)", "(1+x)*exp(-2*t)"),
    uy=("-y*exp(-2*t)", "-y*exp(-2*t)"),
    p=("x*sin(3*t)", "x*sin(3*t)"),
)


def _stokes_error(mms: StokesMMS, nx: int, ny: int, dt: float, T: float) -> float:
    grid = build_reference_domain(L_BOX, H, nx, ny)
    ns = max(1, int(round(T / dt)))
    pb = mms.problem(grid, STOKES_PARAMS, T / ns, ns)
    sol = solve_two_phase(pb, check=False)
    ex = mms.exact(grid, sol.times[-1])
    return l2_error(grid, sol.ux[-1], ex["ux"]) + l2_error(grid, sol.uy[-1], ex["uy"])


def stokes_space_error(nx: int, ny: int, dt: float) -> float:
    return _stokes_error(STOKES_SPACE, nx, ny, dt, 0.02)


def stokes_time_error(nx: int, ny: int, dt: float) -> float:
    return _stokes_error(STOKES_TIME, nx, ny, dt, 0.5)


def identity_error(nx: int, ny: int, dt: float) -> float:
    """Rigid translation along the axis: exact for the discrete system."""
    mms = StokesMMS(ux=("1", "1"), uy=("0", "0"), p=("0", "0"))
    return _stokes_error(mms, nx, ny, dt, 5 * dt)


# heat and parabolic -----------------------------------------------------------------

HEAT_D = 0.7
HEAT_SPACE = {
    "fluid": (1 + t) * sp.cos(sp.pi * x / L_BOX) * sp.cos(y) + t * x**2,
    "solid": sp.exp(-t) * sp.sin(x) * sp.cos(2 * y) + y * t,
}
HEAT_TIME = {"fluid": (2 + x) * sp.exp(-2 * t), "solid": (1 + x - y) * sp.exp(-2 * t)}


def _heat_error(c, region: str, nx: int, ny: int, dt: float, T: float) -> float:
    D = HEAT_D
    grid = build_reference_domain(L_BOX, H, nx, ny)
    f = sp.diff(c, t) - D * (sp.diff(c, x, 2) + sp.diff(c, y, 2))
    flux = {"left": lam(-D * sp.diff(c, x)), "right": lam(D * sp.diff(c, x))}
    if region == "fluid":
        flux["sigma"] = lam(D * sp.diff(c, y))
    else:
        flux["sigma"] = lam(-D * sp.diff(c, y))
        flux["top"] = lam(D * sp.diff(c, y))
    ns = max(1, int(round(T / dt)))
    pr = HeatProblem(grid, D, lam(f), flux, lam(c), T / ns, ns)
    sol = solve_heat_neumann(pr, region, check=False)
    X, Y = grid.coords("cell")
    ex = lam(c)(X, Y, sol.times[-1])[:, region_rows(grid, region)]
    return float(np.sqrt(np.sum((sol.c[-1] - ex) ** 2) * grid.dx * grid.dy))


def heat_space_error(nx: int, ny: int, dt: float) -> float:
    return max(_heat_error(HEAT_SPACE[r], r, nx, ny, dt, 0.1) for r in ("fluid", "solid"))


def heat_time_error(nx: int, ny: int, dt: float) -> float:
    return max(_heat_error(HEAT_TIME[r], r, nx, ny, dt, 0.5) for r in ("fluid", "solid"))


PARABOLIC_FIELDS = (
    [(1 + t) * sp.cos(x) * sp.cos(y), t * sp.sin(x) * sp.sin(y)],
    [(1 + t) * sp.cos(x) * sp.cos(y) + t * (y - sp.Rational(1, 2)) * x, t * sp.sin(x) * sp.sin(y) * sp.exp(y - sp.Rational(1, 2))],
)


def parabolic_problem(grid, dt: float, nsteps: int, fields=PARABOLIC_FIELDS, params=STOKES_PARAMS, orientation=-1):
    """Vector-diffusion transmission data manufactured from per-phase fields."""
    uf, us = ([as_expr(c) for c in u] for u in fields)
    h = sp.Rational(grid.js, grid.Ny)
    comps = []
    for u, rho, mu in ((uf, params.rho_f, params.mu_f), (us, params.rho_s, params.mu_s)):
        f = [rho * sp.diff(c, t) - mu * (sp.diff(c, x, 2) + sp.diff(c, y, 2)) for c in u]
        tau = mu * (sp.diff(u[0], y) + sp.diff(u[1], x))
        nn = 2 * mu * sp.diff(u[1], y)
        comps.append((f, tau, nn, 2 * mu * sp.diff(u[0], x)))
    sign = 1 if orientation == -1 else -1
    g1 = [sign * (uf[k] - us[k]).subs(y, h) for k in range(2)]
    g2 = [(comps[1][1] - comps[0][1]).subs(y, h), (comps[1][2] - comps[0][2]).subs(y, h)]
    return StokesProblem(
        grid, params,
        f_u=(piece(comps[0][0][0], comps[1][0][0]), piece(comps[0][0][1], comps[1][0][1])),
        g1=(lam(g1[0]), lam(g1[1])), g2=(lam(g2[0]), lam(g2[1])),
        g3=piece(uf[1], us[1]), g4=piece(comps[0][3], comps[1][3]),
        g5=(lam(us[0]), lam(us[1])), u0=(piece(uf[0], us[0]), piece(uf[1], us[1])),
        dt=dt, nsteps=nsteps, orientation=orientation,
    )


def parabolic_space_error(nx: int, ny: int, dt: float) -> float:
    grid = build_reference_domain(L_BOX, H, nx, ny)
    T = 0.05
    ns = max(1, int(round(T / dt)))
    sol = solve_parabolic_transmission(parabolic_problem(grid, T / ns, ns), check=False)
    Xx, Yx = grid.coords("xface")
    uf, us = PARABOLIC_FIELDS
    ex = np.where(Yx < grid.h, lam(uf[0])(Xx, Yx, sol.times[-1]), lam(us[0])(Xx, Yx, sol.times[-1]))
    return l2_error(grid, sol.ux[-1], ex)


# registry ---------------------------------------------------------------------

def _space_levels(base: int = 16, n: int = 3, aspect: int = 2, c: float = 0.5) -> list[Level]:
    out = []
    for k in range(n):
        N = base * 2**k
        out.append((aspect * N, N, c / N**2))
    return out


def _time_levels(N: int = 16, dt0: float = 0.1, n: int = 3, aspect: int = 2) -> list[Level]:
    return [(aspect * N, N, dt0 / 2**k) for k in range(n)]


STUDIES: dict[str, tuple[str, Callable, Callable[[], list[Level]]]] = {
    "elliptic": ("space", elliptic_error, lambda: [(2 * N, N, 0.0) for N in (16, 32, 64)]),
    "laplace": ("space", laplace_error, lambda: [(2 * N, N, 0.0) for N in (16, 32, 64)]),
    "stokes_space": ("space", stokes_space_error, _space_levels),
    "stokes_time": ("time", stokes_time_error, _time_levels),
    "heat_space": ("space", heat_space_error, lambda: _space_levels(c=0.8)),
    "heat_time": ("time", heat_time_error, _time_levels),
    "parabolic_space": ("space", parabolic_space_error, _space_levels),
    "identity": ("space", identity_error, lambda: [(2 * N, N, 0.01) for N in (8, 16, 32)]),
}


def run_study(name: str, levels: list[Level] | None = None) -> ConvergenceTable:
    if name not in STUDIES:
        raise KeyError(f"no manufactured oracle for {name!r}; known: {sorted(STUDIES)}")
    refine, fn, default = STUDIES[name]
    return _run(name, refine, levels if levels is not None else default(), fn)
