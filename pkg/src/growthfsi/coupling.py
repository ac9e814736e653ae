"""
Lagrangian kinematics, the nonlinear right-hand sides and the outer Picard loop.

All fields live on the fixed reference grid. Tensors are cell-centred arrays of
shape (..., 2, 2) with T[..., i, j] = T_ij; velocity gradients follow
(grad v)_ij = d_j v_i. The interface normal points from the solid into the
fluid (-e_y) and jumps are fluid minus solid, as in the linear solvers.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .fields import Datum, Piecewise, sample
from .geometry import ReferenceGrid
from .heat import HeatProblem, solve_coupled_concentrations
from .stokes import StokesParams, StokesProblem, solve_with_concentration_source

logger = logging.getLogger(__name__)

EYE = np.eye(2)


@dataclass(frozen=True)
class CouplingParams:
    rho_f: float = 1.0
    rho_s: float = 1.0
    nu_f: float = 1.0
    nu_s: float = 1.0
    mu_s: float = 1.0
    D_f: float = 1.0
    D_s: float = 1.0
    zeta: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    n: int = 2

    def __post_init__(self) -> None:
        positive = ("rho_f", "rho_s", "nu_f", "nu_s", "D_f", "D_s", "zeta")
        bad = [k for k in positive if not getattr(self, k) > 0]
        if bad:
            raise ValueError(f"parameters must be positive: {bad}")
        if self.mu_s < 0 or self.beta < 0 or self.gamma < 0:
            raise ValueError("mu_s, beta and gamma must be non-negative")
        if self.n not in (2, 3):
            raise ValueError(f"n must be 2 or 3, got {self.n}")

    @property
    def growth_rate(self) -> float:
        """gamma beta / (n rho_s)"""
        return self.gamma * self.beta / (self.n * self.rho_s)

    def stokes(self) -> StokesParams:
        return StokesParams(self.rho_f, self.rho_s, self.nu_f, self.nu_s)


# pointwise tensor algebra ------------------------------------------------------

def det2(A: np.ndarray) -> np.ndarray:
    return A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]


def inv2(A: np.ndarray) -> np.ndarray:
    d = det2(A)
    out = np.empty_like(A, dtype=float)
    out[..., 0, 0] = A[..., 1, 1]
    out[..., 1, 1] = A[..., 0, 0]
    out[..., 0, 1] = -A[..., 0, 1]
    out[..., 1, 0] = -A[..., 1, 0]
    return out / d[..., None, None]


def tr(A: np.ndarray) -> np.ndarray:
    return np.swapaxes(A, -1, -2)


def mm(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A @ B


def mv(A: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...j->...i", A, v)


def ddot(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...ij->...", A, B)


def _scal(s: Any) -> np.ndarray:
    return np.asarray(s, dtype=float)[..., None, None]


def sigma_fluid(pi, grad_v, F, nu) -> np.ndarray:
    Fi = inv2(F)
    return -_scal(pi) * EYE + _scal(nu) * (Fi @ grad_v + tr(grad_v) @ tr(Fi))


def sigma_solid_elastic(pi, F, g, mu) -> np.ndarray:
    return -_scal(pi) * EYE + _scal(mu) * (F @ tr(F) / _scal(g) ** 2 - EYE)


def sigma_solid_viscous(grad_v, F, nu) -> np.ndarray:
    return _scal(nu) * (grad_v + tr(grad_v)) @ tr(F)


def ktilde_fluid(pi, grad_v, F, nu) -> np.ndarray:
    Fi = inv2(F)
    FiT = tr(Fi)
    A = FiT - EYE
    visc = Fi @ grad_v + tr(grad_v) @ FiT
    return -_scal(pi) * A + _scal(nu) * (visc @ A) + _scal(nu) * ((Fi - EYE) @ grad_v + tr(grad_v) @ A)


def ktilde_solid(pi, F, g, mu) -> np.ndarray:
    A = tr(inv2(F)) - EYE
    g2 = _scal(g) ** 2
    return -_scal(pi) * A + _scal(mu) * ((F - EYE) / g2 + (1.0 / g2 - 1.0) * EYE - A)


def ftilde(grad_c, F, D) -> np.ndarray:
    Fi = inv2(F)
    return np.asarray(D, dtype=float)[..., None] * mv(Fi @ tr(Fi) - EYE, grad_c)


# grid helpers -----------------------------------------------------------------

def _phases(grid: ReferenceGrid) -> tuple[slice, slice]:
    return slice(0, grid.js), slice(grid.js, grid.Ny)


def _dy_phases(a: np.ndarray, grid: ReferenceGrid) -> np.ndarray:
    """d/dy of a cell field, separately in each phase (no differencing across Sigma)."""
    out = np.empty_like(a, dtype=float)
    for rows in _phases(grid):
        out[:, rows] = np.gradient(a[:, rows], grid.dy, axis=1, edge_order=2)
    return out


def _dx(a: np.ndarray, grid: ReferenceGrid) -> np.ndarray:
    return np.gradient(a, grid.dx, axis=0, edge_order=2)


def _trace(a0, a1):
    """Linear extrapolation to a boundary half a cell beyond a0."""
    return 1.5 * a0 - 0.5 * a1


def cell_velocity_gradient(ux, uy, uys, grid: ReferenceGrid) -> np.ndarray:
    """(Nx, Ny, 2, 2) velocity gradient at cell centres from the staggered layout."""
    js = grid.js
    bot = uy[:, :-1].copy()
    bot[:, js] = uys
    top = uy[:, 1:]
    uxc = 0.5 * (ux[1:] + ux[:-1])
    uyc = 0.5 * (top + bot)
    G = np.empty((grid.Nx, grid.Ny, 2, 2))
    G[..., 0, 0] = np.diff(ux, axis=0) / grid.dx
    G[..., 0, 1] = _dy_phases(uxc, grid)
    G[..., 1, 0] = _dx(uyc, grid)
    G[..., 1, 1] = (top - bot) / grid.dy
    return G


def cell_velocity(ux, uy, uys, grid: ReferenceGrid) -> np.ndarray:
    bot = uy[:, :-1].copy()
    bot[:, grid.js] = uys
    return np.stack([0.5 * (ux[1:] + ux[:-1]), 0.5 * (uy[:, 1:] + bot)], axis=-1)


def cell_scalar_gradient(c: np.ndarray, grid: ReferenceGrid) -> np.ndarray:
    return np.stack([_dx(c, grid), _dy_phases(c, grid)], axis=-1)


def _xface_values(a: np.ndarray) -> np.ndarray:
    """Cell values to x-faces; end faces by linear extrapolation."""
    out = np.empty((a.shape[0] + 1,) + a.shape[1:])
    out[1:-1] = 0.5 * (a[1:] + a[:-1])
    out[0] = _trace(a[0], a[1])
    out[-1] = _trace(a[-1], a[-2])
    return out


def _yface_values(a: np.ndarray, grid: ReferenceGrid) -> tuple[np.ndarray, np.ndarray]:
    """Cell values to y-faces phase by phase; returns (fluid-side, solid-side) at Sigma."""
    js = grid.js
    out = np.empty((a.shape[0], grid.Ny + 1) + a.shape[2:])
    out[:, 1:-1] = 0.5 * (a[:, 1:] + a[:, :-1])
    out[:, 0] = _trace(a[:, 0], a[:, 1])
    out[:, -1] = _trace(a[:, -1], a[:, -2])
    fl = out.copy()
    so = out.copy()
    fl[:, js] = _trace(a[:, js - 1], a[:, js - 2])
    so[:, js] = _trace(a[:, js], a[:, js + 1])
    return fl, so


def divergence_to_faces(T: np.ndarray, grid: ReferenceGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """div T of a cell tensor on the velocity faces.

    The normal-normal part is differenced face to face (conservative); the
    cross part is differenced along the face row. Returns (x-faces, fluid-side
    y-faces, solid-side y-faces); the two y arrays differ only on Sigma.
    """
    js, dx, dy = grid.js, grid.dx, grid.dy
    Kx = np.empty((grid.Nx + 1, grid.Ny))
    Kx[1:-1] = np.diff(T[..., 0, 0], axis=0) / dx
    Kx[0] = 2 * Kx[1] - Kx[2]
    Kx[-1] = 2 * Kx[-2] - Kx[-3]
    Kx += _dy_phases(_xface_values(T[..., 0, 1]), grid)

    Ky = np.zeros((grid.Nx, grid.Ny + 1))
    Ky[:, 1:-1] = np.diff(T[..., 1, 1], axis=1) / dy
    Ky[:, 0] = 2 * Ky[:, 1] - Ky[:, 2]
    Ky[:, -1] = 2 * Ky[:, -2] - Ky[:, -3]
    Kf, Ks = Ky.copy(), Ky.copy()
    Kf[:, js] = 2 * Ky[:, js - 1] - Ky[:, js - 2]
    Ks[:, js] = 2 * Ky[:, js + 1] - Ky[:, js + 2]
    cf, cs = _yface_values(T[..., 1, 0], grid)
    return Kx, Kf + _dx(cf, grid), Ks + _dx(cs, grid)


def vector_to_faces(v: np.ndarray, grid: ReferenceGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    fl, so = _yface_values(v[..., 1], grid)
    return _xface_values(v[..., 0]), fl, so


# kinematics -------------------------------------------------------------------

class KinematicsError(ValueError):
    """The deformation gradient lost positive orientation (mesh entanglement)."""

    def __init__(self, message: str, cell: tuple[int, int], level: int):
        super().__init__(message)
        self.cell = cell
        self.level = level


@dataclass
class Kinematics:
    """Deformation gradient per cell and time level, with the growth split on solid cells.

    F: (nt, Nx, Ny, 2, 2); g: (nt, Nx, Ny) with g = 1 on fluid cells.
    """

    grid: ReferenceGrid
    F: np.ndarray
    g: np.ndarray
    J: np.ndarray = field(init=False)
    Finv: np.ndarray = field(init=False)
    Fse: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.J = det2(self.F)
        self._refuse_entangled()
        if np.any(self.g <= 0):
            raise ValueError("growth metric must stay positive")
        self.Finv = inv2(self.F)
        solid = self.grid.solid_cells[None, :, :, None, None]
        self.Fse = np.where(solid, self.F / self.g[..., None, None], np.nan)

    def _refuse_entangled(self) -> None:
        bad = np.argwhere(self.J <= 0)
        if len(bad):
            n, i, j = (int(v) for v in bad[0])
            raise KinematicsError(
                f"det F = {self.J[n, i, j]:.3e} <= 0 in cell ({i}, {j}) at level {n}", (i, j), n
            )

    @classmethod
    def identity(cls, grid: ReferenceGrid) -> Kinematics:
        F = np.broadcast_to(EYE, (1, grid.Nx, grid.Ny, 2, 2)).copy()
        return cls(grid, F, np.ones((1, grid.Nx, grid.Ny)))

    @property
    def nt(self) -> int:
        return self.F.shape[0]

    @property
    def Fsg(self) -> np.ndarray:
        return self.g[..., None, None] * EYE

    @property
    def Jsg(self) -> np.ndarray:
        return self.g**2

    @property
    def Jse(self) -> np.ndarray:
        return self.J / self.Jsg

    def level(self, n: int) -> Kinematics:
        return Kinematics(self.grid, self.F[n : n + 1 if n != -1 else None], self.g[n : n + 1 if n != -1 else None])


def update_kinematics(kin: Kinematics, grad_v: np.ndarray, dt: float, g: np.ndarray | None = None) -> Kinematics:
    """Append one level F <- F + dt grad_v (the backward-Euler sum of the stepper)."""
    F_new = kin.F[-1] + dt * np.asarray(grad_v, dtype=float)
    g_new = kin.g[-1] if g is None else np.where(kin.grid.solid_cells, g, 1.0)
    J_new = det2(F_new)
    bad = np.argwhere(J_new <= 0)
    if len(bad):
        i, j = (int(v) for v in bad[0])
        raise KinematicsError(f"det F = {J_new[i, j]:.3e} <= 0 in cell ({i}, {j})", (i, j), kin.nt)
    return Kinematics(kin.grid, np.concatenate([kin.F, F_new[None]]), np.concatenate([kin.g, g_new[None]]))


# growth and foam ODEs ---------------------------------------------------------

def ode_rhs(c_s, c_star, g, params: CouplingParams) -> tuple[np.ndarray, np.ndarray]:
    """Closed nonlinear forms: (d_t c*, d_t g)."""
    foam = params.beta * c_s * (1.0 - params.gamma / params.rho_s * c_star)
    return foam, params.growth_rate * c_s * g


def ode_sources(c_s, c_star, g, params: CouplingParams) -> tuple[np.ndarray, np.ndarray]:
    """F5 and F6, the nonlinear parts of the linearized ODE pair."""
    F5 = -params.gamma * params.beta / params.rho_s * c_s * c_star
    F6 = params.growth_rate * c_s * (g - 1.0)
    return F5, F6


def ode_rhs_linearized(c_s, c_star, g, params: CouplingParams) -> tuple[np.ndarray, np.ndarray]:
    F5, F6 = ode_sources(c_s, c_star, g, params)
    return params.beta * c_s + F5, params.growth_rate * c_s + F6


def integrate_odes(c_s: np.ndarray, params: CouplingParams, dt: float, tol: float = 1e-12):
    """RK4 for foam and growth driven by a c_s trajectory (leading axis = time levels).

    Stage values of c_s between levels are linear interpolants. Starts from
    c* = 0, g = 1.
    """
    c_s = np.asarray(c_s, dtype=float)
    if c_s.min(initial=0.0) < -tol:
        warnings.warn(f"negative solid concentration {c_s.min():.3e} fed to the growth ODEs", RuntimeWarning)
    cstar = np.zeros_like(c_s)
    g = np.ones_like(c_s)
    for n in range(len(c_s) - 1):
        a, b = c_s[n], c_s[n + 1]
        m = 0.5 * (a + b)
        y = (cstar[n], g[n])
        k1 = ode_rhs(a, *y, params)
        k2 = ode_rhs(m, y[0] + 0.5 * dt * k1[0], y[1] + 0.5 * dt * k1[1], params)
        k3 = ode_rhs(m, y[0] + 0.5 * dt * k2[0], y[1] + 0.5 * dt * k2[1], params)
        k4 = ode_rhs(b, y[0] + dt * k3[0], y[1] + dt * k3[1], params)
        cstar[n + 1] = y[0] + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        g[n + 1] = y[1] + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return cstar, g


# states -----------------------------------------------------------------------

@dataclass
class State:
    """One time level: MAC velocity, cell pressure/concentration, solid-cell ODE fields."""

    grid: ReferenceGrid
    ux: np.ndarray
    uy: np.ndarray
    uys: np.ndarray
    p: np.ndarray
    c: np.ndarray
    c_star: np.ndarray
    g: np.ndarray

    @classmethod
    def rest(cls, grid: ReferenceGrid, c: float = 0.0) -> State:
        Nx, Ny = grid.Nx, grid.Ny
        return cls(grid, np.zeros((Nx + 1, Ny)), np.zeros((Nx, Ny + 1)), np.zeros(Nx),
                   np.zeros((Nx, Ny)), np.full((Nx, Ny), float(c)), np.zeros((Nx, Ny)), np.ones((Nx, Ny)))

    def grad_v(self) -> np.ndarray:
        return cell_velocity_gradient(self.ux, self.uy, self.uys, self.grid)


def _mu_rows(grid: ReferenceGrid, fluid: float, solid: float) -> np.ndarray:
    return np.broadcast_to(np.where(grid.yc < grid.h, fluid, solid), (grid.Nx, grid.Ny))


def assemble_stresses(w: State, kin: Kinematics, params: CouplingParams):
    """Cauchy stresses pulled back: (sigma_f, sigma_s) on all cells (use by phase)."""
    F = kin.F[-1]
    g = kin.g[-1]
    G = w.grad_v()
    sf = sigma_fluid(w.p, G, F, params.nu_f)
    ss = sigma_solid_elastic(w.p, F, g, params.mu_s) + sigma_solid_viscous(G, F, params.nu_s)
    return sf, ss


@dataclass
class NonlinearTerms:
    """Right-hand sides at one time level.

    K_f, K_s: (x-faces, y-faces) supported in their own phase; both carry
    their own-side value on Sigma. F1_f, F1_s, F5, F6 on cells of the phase.
    F2_f, F2_s at x_{i+1/2} on Sigma; F3 (2, Ny) per end row; F4 on y = 1.
    H1 = (x-part on nodes, y-part at x_{i+1/2}); H2 (2, Ny+1) tangential data
    on the ends at nodes; H3 (2, Ny) normal stress data on the ends.
    """

    K_f: tuple[np.ndarray, np.ndarray]
    K_s: tuple[np.ndarray, np.ndarray]
    K_sg: tuple[np.ndarray, np.ndarray]
    G: np.ndarray
    H1: tuple[np.ndarray, np.ndarray]
    H2: np.ndarray
    H3: np.ndarray
    F1_f: np.ndarray
    F1_s: np.ndarray
    F2_f: np.ndarray
    F2_s: np.ndarray
    F3: np.ndarray
    F4: np.ndarray
    F5: np.ndarray
    F6: np.ndarray

    def magnitudes(self) -> dict[str, float]:
        out = {}
        for name in ("K_f", "K_s", "H1"):
            out[name] = max(float(np.abs(a).max()) for a in getattr(self, name))
        for name in ("G", "H2", "H3", "F1_f", "F1_s", "F2_f", "F2_s", "F3", "F4", "F5", "F6"):
            out[name] = float(np.abs(getattr(self, name)).max())
        return out

    def momentum_faces(self, grid: ReferenceGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(f_x, f_y fluid-side, f_y solid-side) for the Stokes solver."""
        js = grid.js
        fx = self.K_f[0] + self.K_s[0]
        fy = self.K_f[1] + self.K_s[1]
        fy_f, fy_s = fy.copy(), fy.copy()
        fy_f[:, js] = self.K_f[1][:, js]
        fy_s[:, js] = self.K_s[1][:, js]
        return fx, fy_f, fy_s


def assemble_nonlinear_rhs(w: State, kin: Kinematics, params: CouplingParams) -> NonlinearTerms:
    """Every nonlinear datum of the Lagrangian system at one time level."""
    grid = w.grid
    js, Nx, Ny = grid.js, grid.Nx, grid.Ny
    if np.any(kin.J[-1] <= 0):
        kin._refuse_entangled()
    F = kin.F[-1]
    Fi = kin.Finv[-1]
    FiT = tr(Fi)
    solid = grid.solid_cells
    fluid = ~solid
    g = np.where(solid, kin.g[-1], 1.0)
    Gv = w.grad_v()
    p = w.p
    c = w.c
    n = params.n

    # momentum
    Kt = np.where(fluid[..., None, None],
                  ktilde_fluid(p, Gv, F, params.nu_f),
                  ktilde_solid(p, F, g, params.mu_s))
    Kx, Kyf, Kys = divergence_to_faces(Kt, grid)
    sf, ss = assemble_stresses(w, kin, params)
    sig = np.where(fluid[..., None, None], sf, ss)
    grad_g = cell_scalar_gradient(g, grid)
    ksg = -mv(ss @ FiT, n * grad_g / g[..., None])
    ksg = np.where(solid[..., None], ksg, 0.0)
    gx, _, gys = vector_to_faces(ksg, grid)
    xrow_f = np.broadcast_to(grid.yc < grid.h, (Nx + 1, Ny))
    yf_f = np.broadcast_to(np.arange(Ny + 1) <= js, (Nx, Ny + 1))
    yf_s = np.broadcast_to(np.arange(Ny + 1) >= js, (Nx, Ny + 1))
    K_f = (np.where(xrow_f, Kx, 0.0), np.where(yf_f, Kyf, 0.0))
    K_sg = (np.where(xrow_f, 0.0, gx), np.where(yf_s, gys, 0.0))
    K_s = (np.where(xrow_f, 0.0, Kx) + K_sg[0], np.where(yf_s, Kys, 0.0) + K_sg[1])

    # divergence
    Gdiv = -ddot(FiT - EYE, Gv)

    # interface stress: -[K~] n with n = -e_y
    Kf_tr = _trace(Kt[:, js - 1], Kt[:, js - 2])
    Ks_tr = _trace(Kt[:, js], Kt[:, js + 1])
    jump = (Kf_tr - Ks_tr)[:, :, 1]  # ([K~] e_y) per component at x_{i+1/2}
    H1 = (_xface_values(jump[:, 0]), jump[:, 1])

    # outflow ends
    vel = cell_velocity(w.ux, w.uy, w.uys, grid)
    nu_rows = np.where(grid.yc < grid.h, params.nu_f, params.nu_s)
    H2 = np.zeros((2, Ny + 1))
    H3 = np.zeros((2, Ny))
    for end, i in ((0, 0), (1, Nx - 1)):
        a = FiT[i, :, :, 0]  # F^{-T} e_x; the sign of the normal cancels
        ahat = a / np.linalg.norm(a, axis=-1, keepdims=True)
        tang = ahat[:, 1] * np.einsum("ji,ji->j", ahat, vel[i])
        H2[end] = np.interp(grid.yn, grid.yc, tang)
        S_nn = -p[i] + 2 * nu_rows * Gv[i, :, 0, 0]
        H3[end] = S_nn - np.einsum("ji,ji->j", mv(sig[i], a), a)

    # concentrations
    Drow = _mu_rows(grid, params.D_f, params.D_s)
    Ft = ftilde(cell_scalar_gradient(c, grid), F, Drow)
    fx_faces = _xface_values(Ft[..., 0])
    fy_f, fy_s = _yface_values(Ft[..., 1], grid)
    fy_faces = np.where(np.arange(Ny + 1) <= js, fy_f, fy_s)
    fy_faces[:, 0] = 0.0  # the axis carries no flux
    F1 = np.diff(fx_faces, axis=0) / grid.dx
    F1_lo = fy_faces[:, :-1].copy()
    F1_lo[:, js] = fy_s[:, js]
    F1 += (fy_faces[:, 1:] - F1_lo) / grid.dy
    cs = c[:, js:]
    gs = g[:, js:]
    Fs = Fi[:, js:]
    grad_cs = cell_scalar_gradient(c, grid)[:, js:]
    Fsg = -params.beta * cs * (1 + params.gamma / params.rho_s * cs) - np.einsum(
        "...i,...i->...", n * grad_g[:, js:] / gs[..., None], params.D_s * mv(Fs @ tr(Fs), grad_cs)
    )
    F1_f = F1[:, :js]
    F1_s = F1[:, js:] + Fsg
    F2_f = fy_f[:, js] - fy_s[:, js]
    F2_s = fy_s[:, js].copy()
    # zero-flux ends and wall in the deformed state: D grad c . n = -F~ . n
    F3 = np.stack([fx_faces[0], -fx_faces[-1]])
    F4 = -fy_s[:, -1]
    F5, F6 = ode_sources(cs, w.c_star[:, js:], gs, params)
    return NonlinearTerms(K_f, K_s, K_sg, Gdiv, H1, H2, H3, F1_f, F1_s, F2_f, F2_s, F3, F4, F5, F6)


# trajectories and the Picard loop --------------------------------------------

@dataclass
class Trajectory:
    """A state per time level; velocity, pressure and concentration from the solvers."""

    grid: ReferenceGrid
    times: np.ndarray
    ux: np.ndarray
    uy: np.ndarray
    uys: np.ndarray
    p: np.ndarray
    p_jump: np.ndarray
    c: np.ndarray
    c_star: np.ndarray
    g: np.ndarray

    @property
    def nt(self) -> int:
        return len(self.times)

    def level(self, n: int) -> State:
        return State(self.grid, self.ux[n], self.uy[n], self.uys[n], self.p[n], self.c[n],
                     self.c_star[n], self.g[n])

    def minus(self, other: Trajectory) -> Trajectory:
        names = ("ux", "uy", "uys", "p", "p_jump", "c", "c_star", "g")
        return replace(self, **{k: getattr(self, k) - getattr(other, k) for k in names})


def initial_trajectory(grid: ReferenceGrid, v0: Any, c0: Datum, dt: float, nsteps: int) -> Trajectory:
    """Constant-in-time extension of the initial data, the starting iterate."""
    from .stokes import initial_velocity

    carrier = StokesProblem(grid, u0=v0, dt=dt, nsteps=nsteps)
    ux, uy, uys = initial_velocity(carrier)
    Xc, Yc = grid.coords("cell")
    if isinstance(c0, np.ndarray):
        c = np.broadcast_to(c0, (grid.Nx, grid.Ny)).astype(float)
    else:
        c = sample(c0, Xc, Yc, 0.0, 0, Yc < grid.h)
    nt = nsteps + 1
    rep = lambda a: np.repeat(a[None], nt, axis=0)  # noqa: E731
    ones = np.ones((grid.Nx, grid.Ny))
    return Trajectory(grid, dt * np.arange(nt), rep(ux), rep(uy), rep(uys), np.zeros((nt, grid.Nx, grid.Ny)),
                      np.zeros((nt, grid.Nx)), rep(c), np.zeros((nt, grid.Nx, grid.Ny)), rep(ones))


def trajectory_norm(w: Trajectory, q: float = 6.0) -> float:
    """Surrogate for the solution-space norm.

    max over levels of the discrete L^q norms of velocity, pressure-jump trace
    and concentration, plus the W^{1,q}-in-time norms of c* and g on solid cells.
    """
    grid = w.grid
    cell = grid.dx * grid.dy
    dt = w.times[1] - w.times[0] if w.nt > 1 else 1.0

    def lq(a, vol):
        return (np.sum(np.abs(a) ** q, axis=tuple(range(1, a.ndim))) * vol) ** (1 / q)

    spatial = lq(w.ux, cell) + lq(w.uy, cell) + lq(w.c, cell) + lq(w.p_jump, grid.dx)
    out = float(spatial.max())
    js = grid.js
    for a in (w.c_star[:, :, js:], w.g[:, :, js:]):
        vals = lq(a, cell)
        rates = lq(np.diff(a, axis=0) / dt, cell) if w.nt > 1 else np.zeros(1)
        out += float((np.sum(vals**q) * dt) ** (1 / q) + (np.sum(rates**q) * dt) ** (1 / q))
    return out


def kinematics_of(w: Trajectory, dt: float) -> Kinematics:
    kin = Kinematics.identity(w.grid)
    kin.g[0] = w.g[0]
    for n in range(1, w.nt):
        kin = update_kinematics(kin, w.level(n).grad_v(), dt, g=w.g[n])
    return kin


class PicardDivergence(RuntimeError):
    """The fixed-point iteration failed to contract."""

    def __init__(self, message: str, history: PicardHistory):
        super().__init__(message)
        self.history = history


@dataclass
class PicardHistory:
    T: float
    deltas: list[float] = field(default_factory=list)
    norms: list[float] = field(default_factory=list)

    @property
    def ratios(self) -> list[float]:
        d = self.deltas
        return [d[k] / d[k - 1] if d[k - 1] > 0 else 0.0 for k in range(1, len(d))]

    def to_csv(self) -> str:
        lines = ["k,delta,norm,ratio"]
        r = [float("nan")] + self.ratios
        for k, (d, m) in enumerate(zip(self.deltas, self.norms)):
            lines.append(f"{k + 1},{d:.12e},{m:.12e},{r[k]:.12e}")
        return "\n".join(lines) + "\n"


@dataclass
class PicardResult:
    trajectory: Trajectory
    history: PicardHistory
    converged: bool
    iterations: int


def _concentration_problems(grid, params, w0, terms: list[NonlinearTerms], dt, nsteps):
    js = grid.js
    F1 = np.array([np.concatenate([t.F1_f, t.F1_s], axis=1) for t in terms])
    F3 = np.array([t.F3 for t in terms])
    F4 = np.array([t.F4 for t in terms])
    c0 = w0.c[0]
    fluid = HeatProblem(grid, params.D_f, f_c=F1, flux={"left": F3[:, :, :js], "right": F3[:, :, :js]},
                        c0=c0, dt=dt, nsteps=nsteps)
    solid = HeatProblem(grid, params.D_s, f_c=F1,
                        flux={"left": F3[:, :, js:], "right": F3[:, :, js:], "top": F4},
                        c0=c0, dt=dt, nsteps=nsteps)
    F2 = (np.array([t.F2_f for t in terms]), np.array([t.F2_s for t in terms]))
    return fluid, solid, F2


def _stokes_problem(grid, params, v0, terms: list[NonlinearTerms], dt, nsteps) -> StokesProblem:
    faces = [t.momentum_faces(grid) for t in terms]
    fx = np.array([f[0] for f in faces])
    fy = Piecewise(np.array([f[1] for f in faces]), np.array([f[2] for f in faces]))
    return StokesProblem(
        grid, params.stokes(),
        f_u=(fx, fy),
        f_d=np.array([t.G for t in terms]),
        g2=(np.array([t.H1[0] for t in terms]), np.array([t.H1[1] for t in terms])),
        g3=np.array([t.H2 for t in terms]),
        g4=np.array([t.H3 for t in terms]),
        u0=v0, dt=dt, nsteps=nsteps,
    )


def picard_map(w: Trajectory, w0: Trajectory, v0: Any, params: CouplingParams, dt: float) -> Trajectory:
    """One sweep: concentrations, then the ODEs, then Stokes, all data taken from w."""
    grid = w.grid
    nsteps = w.nt - 1
    kin = kinematics_of(w, dt)
    terms = [assemble_nonlinear_rhs(w.level(n), kin.level(n), params) for n in range(w.nt)]
    fluid, solid, F2 = _concentration_problems(grid, params, w0, terms, dt, nsteps)
    conc = solve_coupled_concentrations(fluid, solid, params.zeta, F2)
    c = np.concatenate([conc.fluid.c, conc.solid.c], axis=2)
    cstar_s, g_s = integrate_odes(conc.solid.c, params, dt)
    js = grid.js
    c_star = np.zeros_like(c)
    g = np.ones_like(c)
    c_star[:, :, js:] = cstar_s
    g[:, :, js:] = g_s
    problem = _stokes_problem(grid, params, v0, terms, dt, nsteps)
    sol = solve_with_concentration_source(problem, c, params.gamma, params.beta, check=False)
    return Trajectory(grid, w.times, sol.ux, sol.uy, sol.uy_sigma_s, sol.p, sol.traces["p_jump"],
                      c, c_star, g)


def picard_solve(
    grid: ReferenceGrid,
    v0: Any,
    c0: Datum,
    T: float,
    params: CouplingParams = CouplingParams(),
    nsteps: int = 10,
    tol: float = 1e-8,
    max_iter: int = 30,
    q: float = 6.0,
    check: bool = True,
    raise_on_divergence: bool = True,
) -> PicardResult:
    """Iterate w <- L^{-1} N(w, w0) from the constant extension of (v0, c0).

    Stops when the surrogate norm of the update drops below tol. Three
    consecutive growing updates, a non-finite update or an exhausted budget
    end the run as a divergence.
    """
    if check:
        from .norms_compat import check_nonlinear_initial
        from .report import CompatibilityError

        rep = check_nonlinear_initial(v0, c0, params, grid)
        if not rep.passed:
            raise CompatibilityError(rep)
    dt = T / nsteps
    w0 = initial_trajectory(grid, v0, c0, dt, nsteps)
    w = w0
    hist = PicardHistory(T)
    grow = 0
    failure = None
    for k in range(1, max_iter + 1):
        try:
            w_new = picard_map(w, w0, v0, params, dt)
        except KinematicsError as exc:
            failure = f"iteration {k}: {exc}"
            break
        delta = trajectory_norm(w_new.minus(w), q)
        hist.deltas.append(delta)
        hist.norms.append(trajectory_norm(w_new, q))
        logger.debug("picard T=%g k=%d delta=%.3e", T, k, delta)
        w = w_new
        if not np.isfinite(delta):
            failure = f"iteration {k}: non-finite update"
            break
        if delta < tol:
            return PicardResult(w, hist, True, k)
        r = hist.ratios
        grow = grow + 1 if r and r[-1] > 1 else 0
        if grow >= 3:
            failure = f"update grew for 3 consecutive iterations (last ratio {r[-1]:.3g})"
            break
    else:
        failure = f"no convergence within {max_iter} iterations"
    if raise_on_divergence:
        raise PicardDivergence(f"Picard iteration diverged at T={T}: {failure}", hist)
    return PicardResult(w, hist, False, len(hist.deltas))


def small_initial_data(grid: ReferenceGrid, amplitude: float = 1e-2, c_level: float = 1e-2):
    """Compatible smooth data: stream-function velocity with sup norm `amplitude`, constant c.

    psi = A(y) cos(pi x / L) with A = y - 2y^3 + y^5, so u_y vanishes on the
    ends and the axis, u vanishes on the wall, and d_y u_x vanishes on the axis.
    """
    L = grid.L
    k = np.pi / L
    yy = np.linspace(0, 1, 2001)
    A = lambda y: y - 2 * y**3 + y**5  # noqa: E731
    dA = lambda y: 1 - 6 * y**2 + 5 * y**4  # noqa: E731
    peak = max(np.abs(dA(yy)).max(), k * np.abs(A(yy)).max())
    s = amplitude / peak
    ux = lambda x, y, t: s * dA(y) * np.cos(k * x)  # noqa: E731
    uy = lambda x, y, t: s * k * A(y) * np.sin(k * x)  # noqa: E731
    return (ux, uy), c_level
