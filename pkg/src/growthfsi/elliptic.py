"""
Cell-centred elliptic transmission solver.

Solves lambda phi - Laplace phi = f in both phases with

    [rho phi] = g1,  [d_nu phi] = g2   on Sigma
    rho phi = g3                       on G (x = 0, L)
    d_y phi = g4                       on S (y = 1)
    d_y phi = 0                        on the axis

The interface traces are eliminated in closed form from the two jump
conditions, leaving one one-sided flux q_f per Sigma face. Scaling each cell
row by its phase density makes the matrix symmetric.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import Datum, Piecewise, is_zero, sample
from .geometry import ReferenceGrid
from .report import CompatibilityError

logger = logging.getLogger(__name__)


class IndefiniteError(RuntimeError):
    pass


@dataclass
class EllipticProblem:
    grid: ReferenceGrid
    lam: float = 1.0
    rho: tuple[float, float] = (1.0, 1.0)
    f: Datum = None
    g1: Datum = None
    g2: Datum = None
    g3: Datum = None
    g4: Datum = None
    orientation: int = -1
    lam_min: float = 1.0

    def __post_init__(self) -> None:
        if min(self.rho) <= 0:
            raise ValueError("rho must be positive in both phases")
        if self.orientation not in (-1, 1):
            raise ValueError("orientation must be -1 or +1")


@dataclass
class EllipticSolution:
    grid: ReferenceGrid
    phi: np.ndarray
    grad_x: np.ndarray  # (Nx+1, Ny) face gradients
    grad_y: np.ndarray  # (Nx, Ny+1), fluid side on Sigma
    grad_y_s: np.ndarray  # (Nx,) solid side on Sigma
    phi_sigma: tuple[np.ndarray, np.ndarray] = field(default=None)  # fluid, solid traces

    def divergence(self) -> np.ndarray:
        g = self.grid
        gy_bot = self.grad_y[:, :-1].copy()
        gy_bot[:, g.js] = self.grad_y_s
        return np.diff(self.grad_x, axis=0) / g.dx + (self.grad_y[:, 1:] - gy_bot) / g.dy


class EllipticOperator:
    """Assembled symmetric operator for fixed (grid, lambda, rho, orientation)."""

    def __init__(self, grid: ReferenceGrid, lam: float, rho: tuple[float, float], orientation: int = -1):
        self.grid = grid
        self.lam = lam
        self.rho = rho
        self.orientation = orientation
        g = grid
        self.k = 0.5 * g.dy
        self.rho_cell = np.where(g.yc < g.h, rho[0], rho[1])
        self._assemble()

    def idx(self, i: int, j: int) -> int:
        return i * self.grid.Ny + j

    def _assemble(self) -> None:
        g = self.grid
        dx, dy, js, k = g.dx, g.dy, g.js, self.k
        rf, rs = self.rho
        rows, cols, vals = [], [], []

        def add(r, c, v):
            rows.append(r)
            cols.append(c)
            vals.append(v)

        for i in range(g.Nx):
            for j in range(g.Ny):
                r = self.idx(i, j)
                rc = self.rho_cell[j]
                diag = self.lam * dx * dy
                # east / west
                for nb, at_end in ((i + 1, i == g.Nx - 1), (i - 1, i == 0)):
                    if at_end:
                        diag += dy / (0.5 * dx)
                    else:
                        diag += dy / dx
                        add(r, self.idx(nb, j), -rc * dy / dx)
                # north
                if j + 1 == js:
                    coef = dx / (k * (rf + rs))
                    diag += rf * coef
                    add(r, self.idx(i, js), -rc * rs * coef)
                elif j + 1 < g.Ny:
                    diag += dx / dy
                    add(r, self.idx(i, j + 1), -rc * dx / dy)
                # south
                if j == js:
                    coef = dx / (k * (rf + rs))
                    diag += rs * coef
                    add(r, self.idx(i, js - 1), -rc * rf * coef)
                elif j > 0:
                    diag += dx / dy
                    add(r, self.idx(i, j - 1), -rc * dx / dy)
                add(r, r, rc * diag)
        n = g.Nx * g.Ny
        self.A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        self._lu = None

    def check_definite(self) -> float:
        """Smallest eigenvalue bound; raises IndefiniteError if not positive."""
        A = self.A
        diag = A.diagonal()
        off = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(diag)
        if np.all(diag > 0) and np.all(diag >= off):
            return float(np.min(diag - off))
        lam = float(spla.eigsh(A, k=1, which="SA", return_eigenvectors=False, tol=1e-8)[0])
        if lam <= 0:
            raise IndefiniteError(f"assembled operator is not positive definite (min eigenvalue {lam:.3e})")
        return lam

    def rhs(self, f: np.ndarray, g1: np.ndarray, g2: np.ndarray, g3: np.ndarray, g4: np.ndarray) -> np.ndarray:
        """Right-hand side from sampled data.

        f: cells; g1, g2: Sigma faces (Nx,); g3: (2, Ny) rho phi on the ends;
        g4: wall faces (Nx,).
        """
        g = self.grid
        dx, dy, js, k = g.dx, g.dy, g.js, self.k
        rf, rs = self.rho
        b = f * dx * dy
        b[0, :] += dy / (0.5 * dx) * g3[0] / self.rho_cell
        b[-1, :] += dy / (0.5 * dx) * g3[1] / self.rho_cell
        b[:, -1] += dx * g4
        G1 = -self.orientation * g1
        qdata = (G1 - rs * k * g2) / (k * (rf + rs))
        b[:, js - 1] += dx * qdata
        b[:, js] -= dx * (qdata + g2)
        return (b * self.rho_cell[None, :]).ravel()

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._lu is None:
            self._lu = spla.splu(self.A.tocsc())
        x = self._lu.solve(rhs)
        r = np.linalg.norm(self.A @ x - rhs)
        nb = np.linalg.norm(rhs)
        if nb > 0 and r > 1e-12 * nb:
            x = x - self._lu.solve(self.A @ x - rhs)
        return x.reshape(self.grid.Nx, self.grid.Ny)

    def gradients(self, phi: np.ndarray, g1, g2, g3, g4) -> EllipticSolution:
        g = self.grid
        dx, dy, js, k = g.dx, g.dy, g.js, self.k
        rf, rs = self.rho
        gx = np.zeros((g.Nx + 1, g.Ny))
        gx[1:-1] = np.diff(phi, axis=0) / dx
        gx[0] = (phi[0] - g3[0] / self.rho_cell) / (0.5 * dx)
        gx[-1] = (g3[1] / self.rho_cell - phi[-1]) / (0.5 * dx)
        gy = np.zeros((g.Nx, g.Ny + 1))
        gy[:, 1:-1] = np.diff(phi, axis=1) / dy
        gy[:, -1] = g4
        G1 = -self.orientation * g1
        qf = (rs * phi[:, js] - rf * phi[:, js - 1] + G1 - rs * k * g2) / (k * (rf + rs))
        qs = qf + g2
        gy[:, js] = qf
        traces = (phi[:, js - 1] + k * qf, phi[:, js] - k * qs)
        return EllipticSolution(g, phi, gx, gy, qs, traces)


def _sample_data(problem: EllipticProblem):
    g = problem.grid
    h = g.h
    Xc, Yc = g.coords("cell")
    f = sample(problem.f, Xc, Yc, 0.0, None, Yc < h)
    g1 = sample(problem.g1, g.xc, np.full(g.Nx, h), 0.0, None, True)
    g2 = sample(problem.g2, g.xc, np.full(g.Nx, h), 0.0, None, True)
    if isinstance(problem.g3, np.ndarray):
        g3 = np.broadcast_to(problem.g3, (2, g.Ny)).astype(float)
    else:
        g3 = np.stack([
            sample(problem.g3, np.full(g.Ny, x0), g.yc, 0.0, None, g.yc < h) for x0 in (0.0, g.L)
        ])
    g4 = sample(problem.g4, g.xc, np.ones(g.Nx), 0.0, None, False)
    return f, g1, g2, g3, g4


def solve_elliptic_transmission(problem: EllipticProblem, check: bool = True) -> EllipticSolution:
    """Solve the two-phase elliptic transmission problem; refuses incompatible contact data."""
    if check:
        from .norms_compat import check_elliptic_compatibility

        report = check_elliptic_compatibility(problem)
        if not report.passed:
            raise CompatibilityError(report)
    op = EllipticOperator(problem.grid, problem.lam, problem.rho, problem.orientation)
    if problem.lam < problem.lam_min:
        op.check_definite()
    data = _sample_data(problem)
    phi = op.solve(op.rhs(*data))
    return op.gradients(phi, *data[1:])


def solve_laplace_transmission(
    grid: ReferenceGrid, f: Datum, rho: tuple[float, float] = (1.0, 1.0), orientation: int = -1
) -> EllipticSolution:
    """-Laplace phi = f with rho phi = 0 on G, zero jumps and zero wall flux."""
    return solve_elliptic_transmission(
        EllipticProblem(grid, lam=0.0, rho=rho, f=f, orientation=orientation), check=False
    )


def _mac_divergence(grid: ReferenceGrid, ux: np.ndarray, uy: np.ndarray, uys: np.ndarray | None) -> np.ndarray:
    bot = uy[:, :-1].copy()
    if uys is not None:
        bot[:, grid.js] = uys
    return np.diff(ux, axis=0) / grid.dx + (uy[:, 1:] - bot) / grid.dy


def reduce_divergence(
    grid: ReferenceGrid,
    f_d: np.ndarray,
    u_bar: tuple[np.ndarray, np.ndarray] | None = None,
    rho: tuple[float, float] = (1.0, 1.0),
) -> list[EllipticSolution]:
    """Per time level, the gradient potential with div grad phi = f_d - div u_bar.

    f_d: (nt, Nx, Ny); u_bar: (ux (nt, Nx+1, Ny), uy (nt, Nx, Ny+1)) or None.
    """
    f_d = np.asarray(f_d, dtype=float)
    if f_d.ndim == 2:
        f_d = f_d[None]
    if f_d.shape[1:] != (grid.Nx, grid.Ny):
        raise ValueError(f"f_d must live on the {grid.Nx}x{grid.Ny} cells, got {f_d.shape[1:]}")
    if u_bar is not None:
        ux, uy = (np.asarray(a, dtype=float) for a in u_bar)
        if ux.shape != (len(f_d), grid.Nx + 1, grid.Ny) or uy.shape != (len(f_d), grid.Nx, grid.Ny + 1):
            raise ValueError("u_bar does not match the grid and time levels of f_d")
    op = EllipticOperator(grid, 0.0, rho)
    zeros = (np.zeros(grid.Nx), np.zeros(grid.Nx), np.zeros((2, grid.Ny)), np.zeros(grid.Nx))
    out = []
    for n in range(len(f_d)):
        target = f_d[n].copy()
        if u_bar is not None:
            target -= _mac_divergence(grid, ux[n], uy[n], None)
        # div grad phi = target  <=>  -Laplace phi = -target
        phi = op.solve(op.rhs(-target, *zeros))
        out.append(op.gradients(phi, *zeros))
    return out


# pressure duality -------------------------------------------------------------

def default_test_potential(grid: ReferenceGrid, rho: tuple[float, float]) -> dict[str, Callable]:
    """A smooth phi* meeting the adjoint conditions, with exact gradient and Laplacian.

    rho phi* = sin(pi x / L) Y(y), Y = cos(pi y / h) below Sigma and
    -cos(pi (y - h)/(1 - h)) above: rho phi* vanishes on G, is continuous
    across Sigma, and d_y phi* vanishes on Sigma, the axis and the wall.
    """
    L, h = grid.L, grid.h
    a, b = np.pi / h, np.pi / (1 - h)
    kx = np.pi / L

    def parts(X, Y):
        fl = Y <= h
        r = np.where(fl, rho[0], rho[1])
        Yv = np.where(fl, np.cos(a * Y), -np.cos(b * (Y - h)))
        dY = np.where(fl, -a * np.sin(a * Y), b * np.sin(b * (Y - h)))
        d2Y = np.where(fl, -a * a * np.cos(a * Y), b * b * np.cos(b * (Y - h)))
        return r, Yv, dY, d2Y

    def phi(X, Y):
        r, Yv, _, _ = parts(X, Y)
        return np.sin(kx * X) * Yv / r

    def dphidx(X, Y):
        r, Yv, _, _ = parts(X, Y)
        return kx * np.cos(kx * X) * Yv / r

    def dphidy(X, Y):
        r, _, dY, _ = parts(X, Y)
        return np.sin(kx * X) * dY / r

    def lap(X, Y):
        r, Yv, _, d2Y = parts(X, Y)
        return np.sin(kx * X) * (d2Y - kx * kx * Yv) / r

    return {"phi": phi, "dx": dphidx, "dy": dphidy, "lap": lap}


@dataclass
class DualityTerms:
    lhs: float
    volume: float
    viscous: float
    boundary: float
    interface: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - (self.volume - self.viscous - self.boundary - self.interface))


def _check_duality_hypothesis(problem) -> None:
    ux0, uy0 = problem.u0
    for name, datum in (
        ("u0_x", ux0),
        ("u0_y", uy0),
        ("f_d", problem.f_d),
        ("g1 normal", problem.g1[1]),
        ("g5 normal", problem.g5[1]),
    ):
        if not is_zero(datum):
            raise ValueError(f"duality identity needs {name} = 0 in the generating problem")


def pressure_duality_residual(
    solution,
    problem,
    n: int,
    psi: np.ndarray | None = None,
    mode: str = "adjoint",
    seed: int = 0,
    potential: dict[str, Callable] | None = None,
) -> DualityTerms:
    """Integration-by-parts identity for the pressure at time level n >= 1.

    mode='adjoint': phi solves the discrete adjoint problem Laplace phi = psi
    (rho phi = 0 on G, zero jumps, zero wall flux) and the identity holds to
    round-off. psi defaults to a seeded random cell field.
    mode='continuous': a smooth phi* (default_test_potential) with exact face
    gradients and psi = Laplace phi*; the mismatch is discretization error.
    """
    from .stokes import face_balance

    _check_duality_hypothesis(problem)
    g = problem.grid
    rho = (problem.params.rho_f, problem.params.rho_s)
    if mode == "adjoint":
        if psi is None:
            psi = np.random.default_rng(seed).standard_normal((g.Nx, g.Ny))
        op = EllipticOperator(g, 0.0, rho, problem.orientation)
        zeros = (np.zeros(g.Nx), np.zeros(g.Nx), np.zeros((2, g.Ny)), np.zeros(g.Nx))
        phi = op.solve(op.rhs(-psi, *zeros))
        es = op.gradients(phi, *zeros)
        wx, wy = es.grad_x, es.grad_y
    elif mode == "continuous":
        pot = potential or default_test_potential(g, rho)
        Xc, Yc = g.coords("cell")
        psi = pot["lap"](Xc, Yc)
        Xx, Yx = g.coords("xface")
        Xy, Yy = g.coords("yface")
        wx = pot["dx"](Xx, Yx)
        wy = pot["dy"](Xy, Yy)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    fb = face_balance(solution, problem, n)
    V = g.dx * g.dy
    lhs = float(np.sum(solution.p[n] * psi) * V)
    volume = float(np.sum(wx * (fb.inertia_x - fb.body_x)) + np.sum(wy * (fb.inertia_y - fb.body_y)))
    viscous = float(np.sum(wx * fb.viscous_x) + np.sum(wy * fb.viscous_y))
    boundary = float(np.sum(wx * fb.data_x))
    interface = float(np.sum(wy * fb.data_y))
    return DualityTerms(lhs, volume, viscous, boundary, interface)
