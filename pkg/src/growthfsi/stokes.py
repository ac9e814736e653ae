"""
Unsteady Stokes solvers on the reference grid.

The two-phase configuration has outflow ends at x = 0 and x = L (tangential
velocity and normal stress -p + 2 mu d_x u_x prescribed), no-slip data on
the wall y = 1, a symmetry axis at y = 0 and the interface y = h with
prescribed velocity jump g1 and stress jump g2.

Jumps follow the orientation of the interface normal nu: [f] is the value on
the side nu points into minus the other one. The default nu = -e_y points
from the solid into the fluid, so [f] = f_fluid - f_solid.

Data may be constants, callables f(x, y, t), Piecewise(fluid, solid) or
arrays. Vector data are (x-component, y-component) pairs. Array layouts:

    f_u    (fx on x-faces, fy on y-faces)
    f_d    cells
    g1, g2 (x-part at nodes x_i on Sigma (Nx+1), y-part at x_{i+1/2} (Nx))
    g3     (2, Ny+1) u_y on the left/right end at nodes y_j
    g4     (2, Ny)   normal stress on the left/right end at y_{j+1/2}
    g5     (x-part (Nx+1), y-part (Nx)) on y = 1
    u0     (ux on x-faces, uy on y-faces)

with an optional leading time axis of length nsteps + 1.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .fields import Datum, Piecewise, is_zero, sample
from .geometry import ReferenceGrid
from .mac import BC, MACSystem, SingularSystemError, SolverError
from .report import CompatibilityError, ConditionReport

logger = logging.getLogger(__name__)

__all__ = [
    "BC",
    "StokesParams",
    "StokesProblem",
    "StokesSolution",
    "SingularSystemError",
    "SolverError",
    "solve_single_phase",
    "solve_two_phase",
    "solve_with_concentration_source",
    "stokes_residual",
]

CYLINDER_BCS = {
    "left": BC.OUTFLOW,
    "right": BC.OUTFLOW,
    "bottom": BC.SYMMETRY,
    "top": BC.DIRICHLET,
}


@dataclass(frozen=True)
class StokesParams:
    rho_f: float = 1.0
    rho_s: float = 1.0
    mu_f: float = 1.0
    mu_s: float = 1.0

    def __post_init__(self) -> None:
        if min(self.rho_f, self.rho_s, self.mu_f, self.mu_s) <= 0:
            raise ValueError("densities and viscosities must be positive")


def _pair(v: Any) -> tuple[Datum, Datum]:
    if v is None:
        return (None, None)
    return v


@dataclass
class StokesProblem:
    grid: ReferenceGrid
    params: StokesParams = field(default_factory=StokesParams)
    f_u: Any = None
    f_d: Datum = None
    g1: Any = None
    g2: Any = None
    g3: Datum = None
    g4: Datum = None
    g5: Any = None
    u0: Any = None
    dt: float = 0.01
    nsteps: int = 1
    orientation: int = -1

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        if self.nsteps < 0:
            raise ValueError("nsteps must be non-negative")
        for name in ("f_u", "g1", "g2", "g5", "u0"):
            setattr(self, name, _pair(getattr(self, name)))

    def time(self, n: int) -> float:
        return n * self.dt


@dataclass
class StokesSolution:
    grid: ReferenceGrid
    times: np.ndarray
    ux: np.ndarray  # (nt, Nx+1, Ny)
    uy: np.ndarray  # (nt, Nx, Ny+1), fluid side on Sigma
    uy_sigma_s: np.ndarray  # (nt, Nx) solid side on Sigma
    u_sigma_f: np.ndarray  # (nt, Nx+1) fluid trace of u_x on Sigma
    u_sigma_s: np.ndarray  # (nt, Nx+1)
    p: np.ndarray  # (nt, Nx, Ny)
    traces: dict[str, np.ndarray] = field(default_factory=dict)
    two_phase: bool = True

    @property
    def nt(self) -> int:
        return len(self.times)

    def divergence(self, n: int) -> np.ndarray:
        g = self.grid
        div = np.diff(self.ux[n], axis=0) / g.dx
        uy_top = self.uy[n][:, 1:].copy()
        uy_bot = self.uy[n][:, :-1].copy()
        if self.two_phase:
            uy_bot[:, g.js] = self.uy_sigma_s[n]
        return div + (uy_top - uy_bot) / g.dy


# data sampling ---------------------------------------------------------------

def _end_sample(datum: Datum, end: int, x, y, t, n, fluid) -> np.ndarray:
    """Sample boundary data on one end; arrays are stacked as (2, ...) per end."""
    if isinstance(datum, np.ndarray):
        arr = datum[n] if datum.ndim == 3 else datum
        return np.broadcast_to(arr[end], np.shape(x)).astype(float)
    return sample(datum, x, y, t, n, fluid)


def _on_faces(datum: Any) -> bool:
    """Array data (or per-phase arrays) are read face by face, not at points."""
    if isinstance(datum, Piecewise):
        return isinstance(datum.solid, np.ndarray)
    return isinstance(datum, np.ndarray)


def cylinder_blocks(problem: StokesProblem, n: int, extra_fd: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Data blocks of the two-phase cylinder problem at time level n."""
    g = problem.grid
    t = problem.time(n)
    h = g.h
    fx, fy = problem.f_u
    Xx, Yx = g.coords("xface")
    Xy, Yy = g.coords("yface")
    Xc, Yc = g.coords("cell")
    blocks: dict[str, np.ndarray] = {
        "fx": sample(fx, Xx, Yx, t, n, Yx < h),
        "fy": sample(fy, Xy, Yy, t, n, Yy <= h),
        "fy_s": sample(fy, Xy, Yy, t, n, Yy < h)[:, g.js]
        if _on_faces(fy)
        else sample(fy, g.xc, np.full(g.Nx, h), t, n, False),
        "fd": sample(problem.f_d, Xc, Yc, t, n, Yc < h),
    }
    if extra_fd is not None:
        blocks["fd"] = blocks["fd"] + extra_fd
    yn = g.yn
    for end, name, x0 in ((0, "left", 0.0), (1, "right", g.L)):
        xs = np.full(g.Ny + 1, x0)
        blocks[f"tan_{name}"] = _end_sample(problem.g3, end, xs, yn, t, n, yn <= h)
        blocks[f"tan_{name}_s"] = (
            _end_sample(problem.g3, end, xs, yn, t, n, yn < h)[g.js : g.js + 1]
        )
        blocks[f"nrm_{name}"] = _end_sample(problem.g4, end, xs[:-1], g.yc, t, n, g.yc < h)
    g5x, g5y = problem.g5
    blocks["tan_top"] = sample(g5x, g.xn, np.ones(g.Nx + 1), t, n, False)
    blocks["nrm_top"] = sample(g5y, g.xc, np.ones(g.Nx), t, n, False)
    blocks["tan_bottom"] = np.zeros(g.Nx + 1)
    blocks["nrm_bottom"] = np.zeros(g.Nx)
    for name, pair in (("g1", problem.g1), ("g2", problem.g2)):
        blocks[f"{name}x"] = sample(pair[0], g.xn, np.full(g.Nx + 1, h), t, n, True)
        blocks[f"{name}y"] = sample(pair[1], g.xc, np.full(g.Nx, h), t, n, True)
    return blocks


def initial_velocity(problem: StokesProblem) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    g = problem.grid
    h = g.h
    ux0, uy0 = problem.u0
    Xx, Yx = g.coords("xface")
    Xy, Yy = g.coords("yface")
    ux = sample(ux0, Xx, Yx, 0.0, 0, Yx < h)
    uy = sample(uy0, Xy, Yy, 0.0, 0, Yy <= h)
    if isinstance(uy0, Piecewise):
        uys = sample(uy0, g.xc, np.full(g.Nx, h), 0.0, 0, False)
    else:
        uys = uy[:, g.js].copy()
    return ux, uy, uys


# solves -----------------------------------------------------------------------

@functools.lru_cache(maxsize=16)
def _cached_system(grid, rho, mu, sides, dt, two_phase, form, pressure, orientation) -> MACSystem:
    return MACSystem(grid, rho, mu, dict(sides), dt, two_phase=two_phase, form=form,
                     pressure=pressure, orientation=orientation)


def _system(
    problem: StokesProblem,
    sides: dict[str, BC],
    two_phase: bool,
    form: str = "stress",
    pressure: bool = True,
) -> MACSystem:
    # iterations re-solve the same configuration many times; keep the factorization
    p = problem.params
    if two_phase:
        rho, mu = (p.rho_f, p.rho_s), (p.mu_f, p.mu_s)
    else:
        rho, mu = (p.rho_f, p.rho_f), (p.mu_f, p.mu_f)
    key = tuple(sorted((k, BC(v)) for k, v in sides.items()))
    return _cached_system(
        problem.grid, rho, mu, key, problem.dt, two_phase, form, pressure, problem.orientation
    )


def _march(problem: StokesProblem, system: MACSystem, blocks_at, x0: np.ndarray) -> StokesSolution:
    g = problem.grid
    nt = problem.nsteps + 1
    states = [system.unpack(x0)]
    x = x0
    for n in range(1, nt):
        d = system.data_vector(blocks_at(n))
        x = system.step(x, d)
        states.append(system.unpack(x))
    zeros_n = np.zeros(g.Nx)
    zeros_n1 = np.zeros(g.Nx + 1)
    sol = StokesSolution(
        grid=g,
        times=problem.dt * np.arange(nt),
        ux=np.array([s["ux"] for s in states]),
        uy=np.array([s["uy"] for s in states]),
        uy_sigma_s=np.array([s.get("uys", zeros_n) for s in states]),
        u_sigma_f=np.array([s.get("Uf", zeros_n1) for s in states]),
        u_sigma_s=np.array([s.get("Us", zeros_n1) for s in states]),
        p=np.array([s.get("p", np.zeros((g.Nx, g.Ny))) for s in states]),
        two_phase=system.two_phase,
    )
    # the initial pressure is not an unknown of the stepper; level 0 copies level 1
    if nt > 1:
        sol.p[0] = sol.p[1]
    _pressure_traces(sol, problem, system)
    return sol


def _pressure_traces(sol: StokesSolution, problem: StokesProblem, system: MACSystem) -> None:
    g = sol.grid
    p = sol.p
    js = g.js
    mu_f = system.mu[0]
    if system.two_phase:
        pf = 1.5 * p[:, :, js - 1] - 0.5 * p[:, :, js - 2]
        ps = 1.5 * p[:, :, js] - 0.5 * p[:, :, js + 1]
        sol.traces["p_sigma_f"] = pf
        sol.traces["p_sigma_s"] = ps
        sol.traces["p_jump"] = (pf - ps) if problem.orientation == -1 else (ps - pf)
    mu_rows = np.where(g.yc < g.h, system.mu[0], system.mu[1]) if system.two_phase else mu_f
    for end, name in ((0, "left"), (1, "right")):
        if system.sides[name] != BC.OUTFLOW:
            continue
        ux = sol.ux
        if end == 0:
            dudx = (-3 * ux[:, 0] + 4 * ux[:, 1] - ux[:, 2]) / (2 * g.dx)
        else:
            dudx = (3 * ux[:, -1] - 4 * ux[:, -2] + ux[:, -3]) / (2 * g.dx)
        g4 = np.array([
            _end_sample(problem.g4, end, np.full(g.Ny, 0.0 if end == 0 else g.L), g.yc, t, n, g.yc < g.h)
            for n, t in enumerate(sol.times)
        ])
        sol.traces[f"p_G_{name}"] = 2 * mu_rows * dudx - g4


def solve_single_phase(problem: StokesProblem, bc_spec: dict[str, BC | str]) -> StokesSolution:
    """One-phase solve on the whole rectangle with coefficients (rho_f, mu_f).

    bc_spec maps each of left/right/bottom/top to dirichlet, outflow or
    symmetry. See `single_phase_blocks` for where side data are read from.
    """
    sides = {k: BC(v) for k, v in bc_spec.items()}
    system = _system(problem, sides, two_phase=False)
    return _march(problem, system, lambda n: single_phase_blocks(problem, sides, n), _x0(problem, system))


def single_phase_blocks(problem: StokesProblem, sides: dict[str, BC], n: int) -> dict[str, np.ndarray]:
    """Data blocks for the generic one-phase box.

    Ends (left/right): g3 gives the tangential velocity; g4 gives the normal
    stress on outflow ends and the normal velocity on Dirichlet ends.
    Bottom/top: g5 gives (u_x, u_y); on an outflow bottom/top the y-part of g5
    is read as the normal stress.
    """
    g = problem.grid
    t = problem.time(n)
    fx, fy = problem.f_u
    Xx, Yx = g.coords("xface")
    Xy, Yy = g.coords("yface")
    Xc, Yc = g.coords("cell")
    blocks = {
        "fx": sample(fx, Xx, Yx, t, n, True),
        "fy": sample(fy, Xy, Yy, t, n, True),
        "fd": sample(problem.f_d, Xc, Yc, t, n, True),
    }
    for end, name, x0 in ((0, "left", 0.0), (1, "right", g.L)):
        blocks[f"tan_{name}"] = _end_sample(problem.g3, end, np.full(g.Ny + 1, x0), g.yn, t, n, True)
        blocks[f"nrm_{name}"] = _end_sample(problem.g4, end, np.full(g.Ny, x0), g.yc, t, n, True)
    g5x, g5y = problem.g5
    for name, y0 in (("bottom", 0.0), ("top", 1.0)):
        blocks[f"tan_{name}"] = sample(g5x, g.xn, np.full(g.Nx + 1, y0), t, n, True)
        blocks[f"nrm_{name}"] = sample(g5y, g.xc, np.full(g.Nx, y0), t, n, True)
    for side, bc in sides.items():
        if bc == BC.SYMMETRY:
            blocks[f"nrm_{side}"] = np.zeros_like(blocks[f"nrm_{side}"])
    return blocks


def _x0(problem: StokesProblem, system: MACSystem) -> np.ndarray:
    ux, uy, uys = initial_velocity(problem)
    return system.pack(ux, uy, uys)


def solve_two_phase(
    problem: StokesProblem,
    check: bool = True,
    extra_fd: Any = None,
) -> StokesSolution:
    """Two-phase cylinder solve; refuses data failing the compatibility lists."""
    if check:
        from .norms_compat import check_stokes_compatibility

        report = check_stokes_compatibility(problem)
        if not report.passed:
            raise CompatibilityError(report)
    system = _system(problem, CYLINDER_BCS, two_phase=True)

    def blocks_at(n: int) -> dict[str, np.ndarray]:
        src = None if extra_fd is None else extra_fd(n)
        return cylinder_blocks(problem, n, src)

    return _march(problem, system, blocks_at, _x0(problem, system))


def solve_with_concentration_source(
    problem: StokesProblem,
    c_s: Any,
    gamma: float,
    beta: float,
    check: bool = True,
) -> StokesSolution:
    """Two-phase solve with divergence target f_d + (gamma beta / rho_s) c_s on solid cells.

    c_s: array (nsteps+1, Nx, Ny) or (Nx, Ny), a constant, or a callable.
    """
    g = problem.grid
    k = gamma * beta / problem.params.rho_s
    solid = g.solid_cells
    Xc, Yc = g.coords("cell")

    def source(n: int) -> np.ndarray:
        c = sample(c_s, Xc, Yc, problem.time(n), n, False)
        return np.where(solid, k * c, 0.0)

    if is_zero(c_s):
        return solve_two_phase(problem, check=check)
    return solve_two_phase(problem, check=check, extra_fd=source)


# independent residual evaluation --------------------------------------------

@dataclass
class FaceBalance:
    """Per-face momentum terms: inertia - viscous - pressure - data - body = 0.

    x arrays have shape (Nx+1, Ny); y arrays (Nx, Ny+1) with the Sigma row
    holding the combined fluid/solid balance and the axis/wall rows zero.
    """

    inertia_x: np.ndarray
    viscous_x: np.ndarray
    pressure_x: np.ndarray
    data_x: np.ndarray
    body_x: np.ndarray
    inertia_y: np.ndarray
    viscous_y: np.ndarray
    pressure_y: np.ndarray
    data_y: np.ndarray
    body_y: np.ndarray
    tau: np.ndarray  # corner shear, fluid side on Sigma
    tau_s: np.ndarray  # solid-side shear on Sigma

    @property
    def residual_x(self) -> np.ndarray:
        return self.inertia_x - self.viscous_x - self.pressure_x - self.data_x - self.body_x

    @property
    def residual_y(self) -> np.ndarray:
        return self.inertia_y - self.viscous_y - self.pressure_y - self.data_y - self.body_y


def face_balance(
    solution: StokesSolution, problem: StokesProblem, n: int, extra_fd: np.ndarray | None = None
) -> FaceBalance:
    """Evaluate the two-phase cylinder momentum balances with array stencils at level n >= 1."""
    g = problem.grid
    pr = problem.params
    dx, dy, dt, js, h = g.dx, g.dy, problem.dt, g.js, g.h
    b = cylinder_blocks(problem, n, extra_fd)
    ux, uy, p = solution.ux[n], solution.uy[n], solution.p[n]
    uys, Uf, Us = solution.uy_sigma_s[n], solution.u_sigma_f[n], solution.u_sigma_s[n]
    ux_old, uy_old, uys_old = solution.ux[n - 1], solution.uy[n - 1], solution.uy_sigma_s[n - 1]
    mu_c = np.where(g.yc < h, pr.mu_f, pr.mu_s)[None, :]
    rho_x = np.where(g.yc < h, pr.rho_f, pr.rho_s)[None, :]

    # corner derivatives on the node lattice; fluid-side values on Sigma
    dudy = np.zeros((g.Nx + 1, g.Ny + 1))
    dudy[:, 1:-1] = np.diff(ux, axis=1) / dy
    dudy[:, -1] = (b["tan_top"] - ux[:, -1]) * 2 / dy
    dudy[:, js] = (Uf - ux[:, js - 1]) * 2 / dy
    dudy_s = (ux[:, js] - Us) * 2 / dy
    dvdx = np.zeros((g.Nx + 1, g.Ny + 1))
    dvdx[1:-1] = np.diff(uy, axis=0) / dx
    dvdx[0] = (uy[0] - b["tan_left"]) * 2 / dx
    dvdx[-1] = (b["tan_right"] - uy[-1]) * 2 / dx
    dvdx_s = np.zeros(g.Nx + 1)
    dvdx_s[1:-1] = np.diff(uys) / dx
    dvdx_s[0] = (uys[0] - b["tan_left_s"][0]) * 2 / dx
    dvdx_s[-1] = (b["tan_right_s"][0] - uys[-1]) * 2 / dx
    mu_n = np.where(g.yn < h, pr.mu_f, pr.mu_s)
    mu_n[js] = pr.mu_f
    tau = mu_n[None, :] * (dudy + dvdx)
    tau[:, 0] = 0.0
    tau_s = pr.mu_s * (dudy_s + dvdx_s)

    uy_below = uy[:, :-1].copy()
    uy_below[:, js] = uys
    vxx = 2 * mu_c * np.diff(ux, axis=0) / dx
    vyy = 2 * mu_c * (uy[:, 1:] - uy_below) / dy

    # x-faces, half volumes at the outflow ends
    w = np.full((g.Nx + 1, 1), dx)
    w[0] = w[-1] = dx / 2
    tau_top = tau[:, 1:]
    tau_bot = tau[:, :-1].copy()
    tau_bot[:, js] = tau_s
    zx = np.zeros((1, g.Ny))
    vx_ext = np.concatenate([zx, vxx, zx], axis=0)
    px_ext = np.concatenate([zx, -p, zx], axis=0)
    data_x = np.zeros((g.Nx + 1, g.Ny))
    data_x[0] = -dy * b["nrm_left"]
    data_x[-1] = dy * b["nrm_right"]
    inertia_x = rho_x * w * dy * (ux - ux_old) / dt
    viscous_x = dy * np.diff(vx_ext, axis=0) + w * (tau_top - tau_bot)
    pressure_x = dy * np.diff(px_ext, axis=0)
    body_x = w * dy * b["fx"]

    # y-faces: interior rows, Sigma row combined; axis and wall rows stay zero
    shp = (g.Nx, g.Ny + 1)
    inertia_y, viscous_y, pressure_y, data_y, body_y = (np.zeros(shp) for _ in range(5))
    rho_n = np.where(g.yn < h, pr.rho_f, pr.rho_s)
    for j in range(1, g.Ny):
        if j == js:
            continue
        inertia_y[:, j] = rho_n[j] * dx * dy * (uy[:, j] - uy_old[:, j]) / dt
        viscous_y[:, j] = dx * (vyy[:, j] - vyy[:, j - 1]) + dy * (tau[1:, j] - tau[:-1, j])
        pressure_y[:, j] = -dx * (p[:, j] - p[:, j - 1])
        body_y[:, j] = dx * dy * b["fy"][:, j]
    inertia_y[:, js] = (
        0.5 * dx * dy * (pr.rho_f * (uy[:, js] - uy_old[:, js]) + pr.rho_s * (uys - uys_old)) / dt
    )
    viscous_y[:, js] = (
        dx * (vyy[:, js] - vyy[:, js - 1])
        + 0.5 * dy * (tau[1:, js] - tau[:-1, js])
        + 0.5 * dy * (tau_s[1:] - tau_s[:-1])
    )
    pressure_y[:, js] = -dx * (p[:, js] - p[:, js - 1])
    data_y[:, js] = -dx * b["g2y"]
    body_y[:, js] = 0.5 * dx * dy * (b["fy"][:, js] + b["fy_s"])
    return FaceBalance(
        inertia_x, viscous_x, pressure_x, data_x, body_x,
        inertia_y, viscous_y, pressure_y, data_y, body_y, tau, tau_s,
    )


def stokes_residual(
    solution: StokesSolution,
    problem: StokesProblem,
    extra_fd: np.ndarray | None = None,
    threshold: float = 1e-8,
) -> ConditionReport:
    """Re-evaluate every equation of the two-phase cylinder system with array stencils.

    Residuals are max-norms over time levels 1..nt-1, momentum rows scaled by
    their mass coefficient. The per-face momentum residuals of the last level
    are kept on the report as `momentum_fields`.
    """
    g = problem.grid
    pr = problem.params
    dx, dy, dt, js = g.dx, g.dy, problem.dt, g.js
    o = problem.orientation
    rho_x = np.where(g.yc < g.h, pr.rho_f, pr.rho_s)[None, :]
    w = np.full((g.Nx + 1, 1), dx)
    w[0] = w[-1] = dx / 2
    scale_x = rho_x * w * dy / dt
    scale_y = min(pr.rho_f, pr.rho_s) * dx * dy / dt
    worst: dict[str, float] = {}
    fields: dict[str, np.ndarray] = {}

    def bump(name: str, value: float) -> None:
        worst[name] = max(worst.get(name, 0.0), float(value))

    for n in range(1, solution.nt):
        src = None if extra_fd is None else extra_fd[n]
        fb = face_balance(solution, problem, n, src)
        b = cylinder_blocks(problem, n, src)
        rx = fb.residual_x / scale_x
        ry = fb.residual_y / scale_y
        bump("momentum_x", np.abs(rx[1:-1]).max())
        bump("momentum_y", np.abs(ry[:, 1:-1]).max())
        bump("outflow_normal_stress", max(np.abs(rx[0]).max(), np.abs(rx[-1]).max()))
        fields["momentum_x"] = fb.residual_x
        fields["momentum_y"] = fb.residual_y
        bump("divergence", np.abs(solution.divergence(n) - b["fd"]).max())
        Uf, Us = solution.u_sigma_f[n], solution.u_sigma_s[n]
        uy, uys = solution.uy[n], solution.uy_sigma_s[n]
        bump("velocity_jump_x", np.abs(-o * (Uf - Us) - b["g1x"]).max())
        bump("velocity_jump_y", np.abs(-o * (uy[:, js] - uys) - b["g1y"]).max())
        bump("stress_jump_tangential", np.abs(fb.tau_s - fb.tau[:, js] - b["g2x"]).max())
        bump("wall_normal_velocity", np.abs(uy[:, -1] - b["nrm_top"]).max())
        bump("axis_normal_velocity", np.abs(uy[:, 0]).max())

    rep = ConditionReport("stokes residual")
    anchors = {
        "momentum_x": "momentum balance, x",
        "momentum_y": "momentum balance, y (incl. interface normal stress)",
        "divergence": "div u = f_d",
        "velocity_jump_x": "[u] = g1, tangential",
        "velocity_jump_y": "[u] = g1, normal",
        "stress_jump_tangential": "[S(u,p)] nu = g2, tangential",
        "outflow_normal_stress": "-p + 2 mu d_n u_n = g4 on G",
        "wall_normal_velocity": "u = g5 on S",
        "axis_normal_velocity": "u_y = 0 on the axis",
    }
    for name, anchor in anchors.items():
        rep.add(name, anchor, worst.get(name, 0.0), threshold)
    rep.momentum_fields = fields  # type: ignore[attr-defined]
    return rep
