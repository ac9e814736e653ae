"""
Finite-volume assembly of backward-Euler Stokes-type systems on the MAC grid.

Every momentum equation is a balance over the control volume of its face:
edge fluxes (normal stresses on cell edges, shear stresses on corner edges)
minus inertia plus body force. Boundary faces of an outflow side own a half
control volume whose outer edge carries the prescribed normal stress. On the
interface row y = h each u_y face is split into a fluid and a solid half; the
two halves are added with the normal-stress jump substituted, so the sum
reduces to the plain interior stencil when coefficients and jumps vanish.

Unknown vector: [u_x | u_y | u_y solid side on Sigma | U_f | U_s | p | gauge]
where U_f, U_s are the one-sided traces of u_x on Sigma at the nodes x_i.

Rows are linear forms in unknowns and data; data enter through a sparse
matrix B applied to a flat data vector assembled by block name, so a time
step costs one sample of the data plus one back-substitution.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import ReferenceGrid

logger = logging.getLogger(__name__)


class BC(str, enum.Enum):
    DIRICHLET = "dirichlet"
    OUTFLOW = "outflow"
    SYMMETRY = "symmetry"


SIDES = ("left", "right", "bottom", "top")


class SingularSystemError(RuntimeError):
    pass


class SolverError(RuntimeError):
    def __init__(self, message: str, history: list[float]):
        self.history = history
        super().__init__(f"{message}; residual history {history}")


class _Form:
    """Sparse linear form over unknown columns (u) and data columns (d)."""

    __slots__ = ("u", "d")

    def __init__(self, u: dict | None = None, d: dict | None = None):
        self.u = u if u is not None else {}
        self.d = d if d is not None else {}

    def _combine(self, other: _Form, sign: float) -> _Form:
        u = dict(self.u)
        d = dict(self.d)
        for k, v in other.u.items():
            u[k] = u.get(k, 0.0) + sign * v
        for k, v in other.d.items():
            d[k] = d.get(k, 0.0) + sign * v
        return _Form(u, d)

    def __add__(self, other: _Form) -> _Form:
        return self._combine(other, 1.0)

    def __sub__(self, other: _Form) -> _Form:
        return self._combine(other, -1.0)

    def __mul__(self, c: float) -> _Form:
        return _Form({k: c * v for k, v in self.u.items()}, {k: c * v for k, v in self.d.items()})

    __rmul__ = __mul__

    def __neg__(self) -> _Form:
        return self * -1.0


ZERO = _Form()


@dataclass(frozen=True)
class Layout:
    """Index bookkeeping for unknowns and data blocks."""

    grid: ReferenceGrid
    two_phase: bool
    pressure: bool
    gauge: bool

    @property
    def n_ux(self) -> int:
        return (self.grid.Nx + 1) * self.grid.Ny

    @property
    def n_uy(self) -> int:
        return self.grid.Nx * (self.grid.Ny + 1)

    def offsets(self) -> dict[str, int]:
        g = self.grid
        sizes = [
            ("ux", self.n_ux),
            ("uy", self.n_uy),
            ("uys", g.Nx if self.two_phase else 0),
            ("Uf", g.Nx + 1 if self.two_phase else 0),
            ("Us", g.Nx + 1 if self.two_phase else 0),
            ("p", g.Nx * g.Ny if self.pressure else 0),
            ("gauge", 1 if self.gauge else 0),
        ]
        out, k = {}, 0
        for name, n in sizes:
            out[name] = k
            k += n
        out["end"] = k
        return out

    def data_blocks(self) -> dict[str, int]:
        g = self.grid
        blocks = {
            "fx": (g.Nx + 1) * g.Ny,
            "fy": g.Nx * (g.Ny + 1),
            "tan_left": g.Ny + 1,
            "tan_right": g.Ny + 1,
            "tan_bottom": g.Nx + 1,
            "tan_top": g.Nx + 1,
            "nrm_left": g.Ny,
            "nrm_right": g.Ny,
            "nrm_bottom": g.Nx,
            "nrm_top": g.Nx,
        }
        if self.two_phase:
            blocks.update(
                fy_s=g.Nx, tan_left_s=1, tan_right_s=1, g1x=g.Nx + 1, g1y=g.Nx, g2x=g.Nx + 1, g2y=g.Nx
            )
        if self.pressure:
            blocks["fd"] = g.Nx * g.Ny
        return blocks


class MACSystem:
    """Assembled backward-Euler operator for one configuration.

    form='stress' uses div(mu(grad u + grad u^T)); form='laplacian' uses the
    componentwise div(mu grad u) with the normal flux data halved, which is the
    parabolic transmission system. Without pressure there is no continuity row.
    """

    def __init__(
        self,
        grid: ReferenceGrid,
        rho: tuple[float, float],
        mu: tuple[float, float],
        sides: dict[str, BC],
        dt: float,
        two_phase: bool = True,
        form: Literal["stress", "laplacian"] = "stress",
        pressure: bool = True,
        orientation: int = -1,
    ):
        if not dt > 0:
            raise ValueError(f"time step must be positive, got {dt}")
        if orientation not in (-1, 1):
            raise ValueError("orientation must be -1 (solid to fluid) or +1")
        if set(sides) != set(SIDES):
            raise ValueError(f"boundary conditions needed on all of {SIDES}")
        if min(rho) <= 0 or min(mu) <= 0:
            raise ValueError("densities and viscosities must be positive")
        if two_phase and BC.SYMMETRY in (sides["left"], sides["right"]):
            raise ValueError("two-phase systems need non-symmetric ends")
        self.grid = grid
        self.rho = rho
        self.mu = mu
        self.sides = {k: BC(v) for k, v in sides.items()}
        self.dt = dt
        self.two_phase = two_phase
        self.form = form
        self.pressure = pressure
        self.orientation = orientation
        gauge = pressure and BC.OUTFLOW not in self.sides.values()
        self.layout = Layout(grid, two_phase, pressure, gauge)
        self.off = self.layout.offsets()
        self.blocks = self.layout.data_blocks()
        self.boff: dict[str, int] = {}
        k = 0
        for name, n in self.blocks.items():
            self.boff[name] = k
            k += n
        self.n_data = k
        self.n = self.off["end"]
        self._assemble()
        self._lu = spla.splu(self.A.tocsc())

    # index helpers ---------------------------------------------------------
    def ix(self, i: int, j: int) -> int:
        return self.off["ux"] + i * self.grid.Ny + j

    def iy(self, i: int, j: int) -> int:
        return self.off["uy"] + i * (self.grid.Ny + 1) + j

    def ip(self, i: int, j: int) -> int:
        return self.off["p"] + i * self.grid.Ny + j

    def U(self, col: int) -> _Form:
        return _Form({col: 1.0})

    def D(self, block: str, k: int = 0) -> _Form:
        return _Form(d={self.boff[block] + k: 1.0})

    def _phase(self, j: float) -> int:
        # 0 fluid, 1 solid; j measured in cell rows (half-integers for cells)
        if not self.two_phase:
            return 0
        return 0 if j < self.grid.js else 1

    def mu_at(self, j: float, side: str = "f") -> float:
        if self.two_phase and j == self.grid.js:
            return self.mu[0] if side == "f" else self.mu[1]
        return self.mu[self._phase(j)]

    def rho_at(self, j: float) -> float:
        return self.rho[self._phase(j)]

    def is_sigma(self, j: int) -> bool:
        return self.two_phase and j == self.grid.js

    # stencil pieces --------------------------------------------------------
    def uy(self, i: int, j: int, side: str = "f") -> _Form:
        if self.is_sigma(j) and side == "s":
            return self.U(self.off["uys"] + i)
        return self.U(self.iy(i, j))

    def _tan_end(self, which: str, j: int, side: str) -> _Form:
        if self.is_sigma(j) and side == "s":
            return self.D(f"tan_{which}_s")
        return self.D(f"tan_{which}", j)

    def dudy(self, i: int, j: int, side: str) -> _Form:
        g = self.grid
        if j == 0:
            return (self.U(self.ix(i, 0)) - self.D("tan_bottom", i)) * (2.0 / g.dy)
        if j == g.Ny:
            return (self.D("tan_top", i) - self.U(self.ix(i, g.Ny - 1))) * (2.0 / g.dy)
        if self.is_sigma(j):
            if side == "f":
                return (self.U(self.off["Uf"] + i) - self.U(self.ix(i, j - 1))) * (2.0 / g.dy)
            return (self.U(self.ix(i, j)) - self.U(self.off["Us"] + i)) * (2.0 / g.dy)
        return (self.U(self.ix(i, j)) - self.U(self.ix(i, j - 1))) * (1.0 / g.dy)

    def dvdx(self, i: int, j: int, side: str) -> _Form:
        g = self.grid
        if i == 0:
            return (self.uy(0, j, side) - self._tan_end("left", j, side)) * (2.0 / g.dx)
        if i == g.Nx:
            return (self._tan_end("right", j, side) - self.uy(g.Nx - 1, j, side)) * (2.0 / g.dx)
        return (self.uy(i, j, side) - self.uy(i - 1, j, side)) * (1.0 / g.dx)

    def _on_symmetry(self, i: int, j: int) -> bool:
        g, s = self.grid, self.sides
        return (
            (j == 0 and s["bottom"] == BC.SYMMETRY)
            or (j == g.Ny and s["top"] == BC.SYMMETRY)
            or (i == 0 and s["left"] == BC.SYMMETRY)
            or (i == g.Nx and s["right"] == BC.SYMMETRY)
        )

    def shear(self, i: int, j: int, side: str, eq: str) -> _Form:
        """Corner flux at node (i, j): eq 'x', 'y' or 'sym' (always symmetric)."""
        if self._on_symmetry(i, j):
            return ZERO
        mu = self.mu_at(j, side)
        if self.form == "stress" or eq == "sym":
            return mu * (self.dudy(i, j, side) + self.dvdx(i, j, side))
        if eq == "x":
            return mu * self.dudy(i, j, side)
        return mu * self.dvdx(i, j, side)

    def _coef(self) -> float:
        return 2.0 if self.form == "stress" else 1.0

    def _pressure(self, i: int, j: int) -> _Form:
        return self.U(self.ip(i, j)) if self.pressure else ZERO

    def sigma_xx(self, i: int, j: int) -> _Form:
        g = self.grid
        mu = self.mu[self._phase(j + 0.5)]
        grad = (self.U(self.ix(i + 1, j)) - self.U(self.ix(i, j))) * (1.0 / g.dx)
        return -self._pressure(i, j) + (self._coef() * mu) * grad

    def sigma_yy(self, i: int, j: int) -> _Form:
        g = self.grid
        mu = self.mu[self._phase(j + 0.5)]
        grad = (self.uy(i, j + 1, "f") - self.uy(i, j, "s")) * (1.0 / g.dy)
        return -self._pressure(i, j) + (self._coef() * mu) * grad

    def _normal_datum(self, block: str, k: int) -> _Form:
        scale = 1.0 if self.form == "stress" else 0.5
        return scale * self.D(block, k)

    # assembly --------------------------------------------------------------
    def _assemble(self) -> None:
        g = self.grid
        rows_A: list[int] = []
        cols_A: list[int] = []
        vals_A: list[float] = []
        rows_B: list[int] = []
        cols_B: list[int] = []
        vals_B: list[float] = []
        rows_M: list[int] = []
        cols_M: list[int] = []
        vals_M: list[float] = []

        def emit(row: int, form: _Form) -> None:
            for c, v in form.u.items():
                if v != 0.0:
                    rows_A.append(row)
                    cols_A.append(c)
                    vals_A.append(v)
            for c, v in form.d.items():
                if v != 0.0:
                    rows_B.append(row)
                    cols_B.append(c)
                    vals_B.append(-v)

        def mass(row: int, col: int, v: float) -> None:
            rows_M.append(row)
            cols_M.append(col)
            vals_M.append(v)

        dt, dx, dy = self.dt, g.dx, g.dy
        s = self.sides

        # x-momentum ---------------------------------------------------------
        for i in range(g.Nx + 1):
            end = "left" if i == 0 else "right" if i == g.Nx else None
            for j in range(g.Ny):
                row = self.ix(i, j)
                if end is not None and s[end] != BC.OUTFLOW:
                    datum = ZERO if s[end] == BC.SYMMETRY else self.D(f"nrm_{end}", j)
                    emit(row, self.U(row) - datum)
                    continue
                w = dx if end is None else 0.5 * dx
                rho = self.rho_at(j + 0.5)
                right = self._normal_datum("nrm_right", j) if i == g.Nx else self.sigma_xx(i, j)
                left = self._normal_datum("nrm_left", j) if i == 0 else self.sigma_xx(i - 1, j)
                top = self.shear(i, j + 1, "f", "x")
                bot = self.shear(i, j, "s", "x")
                forces = dy * (right - left) + w * (top - bot)
                m = rho * w * dy / dt
                emit(row, m * self.U(row) - forces - (w * dy) * self.D("fx", i * g.Ny + j))
                mass(row, row, m)

        # y-momentum ---------------------------------------------------------
        for i in range(g.Nx):
            for j in range(g.Ny + 1):
                row = self.iy(i, j)
                end = "bottom" if j == 0 else "top" if j == g.Ny else None
                fy = self.D("fy", i * (g.Ny + 1) + j)
                if end is not None and s[end] != BC.OUTFLOW:
                    datum = ZERO if s[end] == BC.SYMMETRY else self.D(f"nrm_{end}", i)
                    emit(row, self.U(row) - datum)
                    continue
                if self.is_sigma(j):
                    self._sigma_row(i, emit, mass)
                    continue
                w = dy if end is None else 0.5 * dy
                rho = self.rho_at(j if end != "top" else j - 0.5)
                top = self._normal_datum("nrm_top", i) if j == g.Ny else self.sigma_yy(i, j)
                bot = self._normal_datum("nrm_bottom", i) if j == 0 else self.sigma_yy(i, j - 1)
                right = self.shear(i + 1, j, "f", "y")
                left = self.shear(i, j, "f", "y")
                forces = dx * (top - bot) + w * (right - left)
                m = rho * w * dx / dt
                emit(row, m * self.U(row) - forces - (w * dx) * fy)
                mass(row, row, m)

        # interface rows ------------------------------------------------------
        if self.two_phase:
            o = self.orientation
            js = g.js
            for i in range(g.Nx):
                row = self.off["uys"] + i
                jump = self.uy(i, js, "f") - self.uy(i, js, "s")
                emit(row, (-o) * jump - self.D("g1y", i))
            for i in range(g.Nx + 1):
                jump = self.U(self.off["Uf"] + i) - self.U(self.off["Us"] + i)
                emit(self.off["Uf"] + i, (-o) * jump - self.D("g1x", i))
                tau = self.shear(i, js, "s", "sym") - self.shear(i, js, "f", "sym")
                emit(self.off["Us"] + i, tau - self.D("g2x", i))

        # continuity ----------------------------------------------------------
        if self.pressure:
            for i in range(g.Nx):
                for j in range(g.Ny):
                    row = self.ip(i, j)
                    div = (self.U(self.ix(i + 1, j)) - self.U(self.ix(i, j))) * (1.0 / dx) + (
                        self.uy(i, j + 1, "f") - self.uy(i, j, "s")
                    ) * (1.0 / dy)
                    if self.layout.gauge:
                        div = div + self.U(self.off["gauge"])
                    emit(row, div - self.D("fd", i * g.Ny + j))
            if self.layout.gauge:
                cols = {self.ip(i, j): dx * dy for i in range(g.Nx) for j in range(g.Ny)}
                emit(self.off["gauge"], _Form(cols))

        n = self.n
        self.A = sp.csr_matrix((vals_A, (rows_A, cols_A)), shape=(n, n))
        self.B = sp.csr_matrix((vals_B, (rows_B, cols_B)), shape=(n, self.n_data))
        self.M = sp.csr_matrix((vals_M, (rows_M, cols_M)), shape=(n, n))

    def _sigma_row(self, i: int, emit, mass) -> None:
        g = self.grid
        js, dx, dy, dt = g.js, g.dx, g.dy, self.dt
        row = self.iy(i, js)
        srow = self.off["uys"] + i
        jump_n = self._normal_datum("g2y", i)
        forces = (
            dx * (self.sigma_yy(i, js) - self.sigma_yy(i, js - 1))
            - dx * jump_n
            + (0.5 * dy) * (self.shear(i + 1, js, "f", "y") - self.shear(i, js, "f", "y"))
            + (0.5 * dy) * (self.shear(i + 1, js, "s", "y") - self.shear(i, js, "s", "y"))
        )
        mf = self.rho[0] * 0.5 * dy * dx / dt
        ms = self.rho[1] * 0.5 * dy * dx / dt
        force = (0.5 * dx * dy) * (self.D("fy", i * (g.Ny + 1) + js) + self.D("fy_s", i))
        emit(row, mf * self.U(row) + ms * self.U(srow) - forces - force)
        mass(row, row, mf)
        mass(row, srow, ms)

    # data and solves -------------------------------------------------------
    def data_vector(self, blocks: dict[str, np.ndarray]) -> np.ndarray:
        d = np.zeros(self.n_data)
        for name, vals in blocks.items():
            if name not in self.blocks:
                continue
            vals = np.asarray(vals, dtype=float).ravel()
            if vals.size != self.blocks[name]:
                raise ValueError(f"data block {name} needs {self.blocks[name]} values, got {vals.size}")
            d[self.boff[name] : self.boff[name] + vals.size] = vals
        return d

    def flux_defect(self, d: np.ndarray) -> float:
        """Net outward Dirichlet flux plus interface mass jump minus the divergence budget."""
        g = self.grid

        def blk(name: str) -> np.ndarray:
            return d[self.boff[name] : self.boff[name] + self.blocks[name]]

        out = 0.0
        for side, sign, length in (("left", -1, g.dy), ("right", 1, g.dy), ("bottom", -1, g.dx), ("top", 1, g.dx)):
            if self.sides[side] == BC.DIRICHLET:
                out += sign * length * blk(f"nrm_{side}").sum()
        if self.two_phase:
            out += -self.orientation * g.dx * blk("g1y").sum()
        return out - g.dx * g.dy * blk("fd").sum()

    def step(self, x_old: np.ndarray, d: np.ndarray) -> np.ndarray:
        rhs = self.B @ d + self.M @ x_old
        if self.layout.gauge:
            defect = self.flux_defect(d)
            scale = max(1.0, float(np.abs(d).max()))
            if abs(defect) > 1e-9 * scale:
                raise SingularSystemError(
                    f"all-Dirichlet velocity data are incompatible with the divergence source: "
                    f"net outflow minus integral of f_d = {defect:.3e}"
                )
        x = self._lu.solve(rhs)
        r = self.A @ x - rhs
        rel = float(np.linalg.norm(r) / max(np.linalg.norm(rhs), 1e-300))
        history = [rel]
        if rel > 1e-10:
            # one step of iterative refinement before giving up
            x = x - self._lu.solve(r)
            r = self.A @ x - rhs
            rel = float(np.linalg.norm(r) / max(np.linalg.norm(rhs), 1e-300))
            history.append(rel)
            if rel > 1e-10 and np.linalg.norm(rhs) > 0:
                raise SolverError("direct solve failed to reach relative residual 1e-10", history)
        return x

    # unpacking -------------------------------------------------------------
    def unpack(self, x: np.ndarray) -> dict[str, np.ndarray]:
        g, o = self.grid, self.off
        out = {
            "ux": x[o["ux"] : o["ux"] + self.layout.n_ux].reshape(g.Nx + 1, g.Ny),
            "uy": x[o["uy"] : o["uy"] + self.layout.n_uy].reshape(g.Nx, g.Ny + 1),
        }
        if self.two_phase:
            out["uys"] = x[o["uys"] : o["uys"] + g.Nx]
            out["Uf"] = x[o["Uf"] : o["Uf"] + g.Nx + 1]
            out["Us"] = x[o["Us"] : o["Us"] + g.Nx + 1]
        if self.pressure:
            out["p"] = x[o["p"] : o["p"] + g.Nx * g.Ny].reshape(g.Nx, g.Ny)
        return out

    def pack(self, ux: np.ndarray, uy: np.ndarray, uys: np.ndarray | None = None) -> np.ndarray:
        x = np.zeros(self.n)
        o = self.off
        x[o["ux"] : o["ux"] + self.layout.n_ux] = np.asarray(ux, float).ravel()
        x[o["uy"] : o["uy"] + self.layout.n_uy] = np.asarray(uy, float).ravel()
        if self.two_phase:
            x[o["uys"] : o["uys"] + self.grid.Nx] = uy[:, self.grid.js] if uys is None else uys
        return x
