"""
Backward-Euler diffusion solvers on the fluid strip and the solid ring.

Cell-centred finite volumes. Boundary data are outward fluxes D grad c . nu
on each segment of the region:

    fluid: left, right, sigma (top of the strip); the axis carries zero flux
    solid: left, right, sigma (bottom of the ring), top

End fluxes are sampled at the region's cell rows, sigma/top fluxes at x_{i+1/2}.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import Datum, sample
from .geometry import ReferenceGrid
from .mac import BC
from .report import CompatibilityError

logger = logging.getLogger(__name__)

SEGMENTS = {"fluid": ("left", "right", "sigma"), "solid": ("left", "right", "sigma", "top")}


@dataclass
class HeatProblem:
    grid: ReferenceGrid
    D: float = 1.0
    f_c: Datum = None
    flux: dict[str, Datum] = field(default_factory=dict)
    c0: Datum = None
    dt: float = 0.01
    nsteps: int = 1
    robin: float | None = None

    def __post_init__(self) -> None:
        if not self.D > 0:
            raise ValueError(f"diffusivity must be positive, got {self.D}")
        if not self.dt > 0:
            raise ValueError("time step must be positive")
        if self.robin is not None and not self.robin > 0:
            raise ValueError(f"interface coefficient must be positive, got {self.robin}")
        unknown = set(self.flux) - {"left", "right", "sigma", "top"}
        if unknown:
            raise ValueError(f"unknown flux segments {sorted(unknown)}")

    def time(self, n: int) -> float:
        return n * self.dt


@dataclass
class HeatSolution:
    grid: ReferenceGrid
    region: str
    times: np.ndarray
    c: np.ndarray  # (nt, Nx, rows)

    @property
    def rows(self) -> slice:
        return region_rows(self.grid, self.region)

    def mass(self, n: int) -> float:
        return float(self.c[n].sum() * self.grid.dx * self.grid.dy)


def region_rows(grid: ReferenceGrid, region: str) -> slice:
    if region == "fluid":
        return slice(0, grid.js)
    if region == "solid":
        return slice(grid.js, grid.Ny)
    raise ValueError(f"region must be 'fluid' or 'solid', got {region!r}")


class _Region:
    """Index bookkeeping and flux-data sampling for one region."""

    def __init__(self, grid: ReferenceGrid, region: str, offset: int = 0):
        self.grid = grid
        self.region = region
        self.rows = region_rows(grid, region)
        self.m = self.rows.stop - self.rows.start
        self.offset = offset
        self.yc = grid.yc[self.rows]
        self.size = grid.Nx * self.m

    def idx(self, i: int, j: int) -> int:
        return self.offset + i * self.m + j

    def cell_coords(self) -> tuple[np.ndarray, np.ndarray]:
        X, Y = self.grid.coords("cell")
        return X[:, self.rows], Y[:, self.rows]

    def fluid_mask(self) -> bool:
        return self.region == "fluid"

    def flux_samples(self, problem: HeatProblem, n: int) -> dict[str, np.ndarray]:
        g = self.grid
        t = problem.time(n)
        fl = self.fluid_mask()
        out = {}
        for name, x0 in (("left", 0.0), ("right", g.L)):
            d = problem.flux.get(name)
            if isinstance(d, np.ndarray):
                arr = d[n] if d.ndim == 3 else d
                out[name] = np.broadcast_to(arr[0 if name == "left" else 1], (self.m,)).astype(float)
            else:
                out[name] = sample(d, np.full(self.m, x0), self.yc, t, n, fl)
        ysig = np.full(g.Nx, g.h)
        out["sigma"] = sample(problem.flux.get("sigma"), g.xc, ysig, t, n, fl)
        out["top"] = sample(problem.flux.get("top"), g.xc, np.ones(g.Nx), t, n, fl)
        return out

    def laplacian(self, D: float) -> tuple[list, list, list]:
        """Entries of -D * (flux sum) / V with every region boundary closed.

        Boundary and interface fluxes are added separately as sources or rows.
        """
        g = self.grid
        rows, cols, vals = [], [], []
        cx, cy = D / g.dx**2, D / g.dy**2
        for i in range(g.Nx):
            for j in range(self.m):
                r = self.idx(i, j)
                diag = 0.0
                nbrs = []
                if i > 0:
                    nbrs.append((self.idx(i - 1, j), cx))
                if i < g.Nx - 1:
                    nbrs.append((self.idx(i + 1, j), cx))
                if j > 0:
                    nbrs.append((self.idx(i, j - 1), cy))
                if j < self.m - 1:
                    nbrs.append((self.idx(i, j + 1), cy))
                for c, w in nbrs:
                    rows.append(r)
                    cols.append(c)
                    vals.append(-w)
                    diag += w
                rows.append(r)
                cols.append(r)
                vals.append(diag)
        return rows, cols, vals

    def boundary_source(self, fl: dict[str, np.ndarray], include_sigma: bool) -> np.ndarray:
        """Outward flux data turned into a per-volume source."""
        g = self.grid
        b = np.zeros((g.Nx, self.m))
        b[0, :] += fl["left"] / g.dx
        b[-1, :] += fl["right"] / g.dx
        if self.region == "fluid":
            if include_sigma:
                b[:, -1] += fl["sigma"] / g.dy
        else:
            if include_sigma:
                b[:, 0] += fl["sigma"] / g.dy
            b[:, -1] += fl["top"] / g.dy
        return b


def _initial(problem: HeatProblem, reg: _Region) -> np.ndarray:
    X, Y = reg.cell_coords()
    if isinstance(problem.c0, np.ndarray) and problem.c0.shape == (reg.grid.Nx, reg.grid.Ny):
        return problem.c0[:, reg.rows].astype(float)
    return sample(problem.c0, X, Y, 0.0, 0, reg.fluid_mask())


def _forcing(problem: HeatProblem, reg: _Region, n: int) -> np.ndarray:
    X, Y = reg.cell_coords()
    f = problem.f_c
    if isinstance(f, np.ndarray):
        arr = f[n] if f.ndim == 3 else f
        if arr.shape == (reg.grid.Nx, reg.grid.Ny):
            return arr[:, reg.rows].astype(float)
        return np.broadcast_to(arr, X.shape).astype(float)
    return sample(f, X, Y, problem.time(n), n, reg.fluid_mask())


def solve_heat_neumann(problem: HeatProblem, region: str, check: bool = True) -> HeatSolution:
    """Pure-Neumann backward-Euler solve on one region."""
    if check:
        from .norms_compat import check_heat_compatibility

        report = check_heat_compatibility(problem, region)
        if not report.passed:
            raise CompatibilityError(report)
    reg = _Region(problem.grid, region)
    r, c, v = reg.laplacian(problem.D)
    n = reg.size
    A = sp.identity(n, format="csr") / problem.dt + sp.csr_matrix((v, (r, c)), shape=(n, n))
    lu = spla.splu(A.tocsc())
    c_now = _initial(problem, reg)
    traj = [c_now]
    for k in range(1, problem.nsteps + 1):
        src = _forcing(problem, reg, k) + reg.boundary_source(reg.flux_samples(problem, k), True)
        rhs = (c_now / problem.dt + src).ravel()
        c_now = lu.solve(rhs).reshape(problem.grid.Nx, reg.m)
        traj.append(c_now)
    return HeatSolution(problem.grid, region, problem.dt * np.arange(problem.nsteps + 1), np.array(traj))


# Robin-coupled pair ----------------------------------------------------------

@dataclass
class CoupledSolution:
    fluid: HeatSolution
    solid: HeatSolution
    trace_f: np.ndarray  # (nt, Nx) interface traces
    trace_s: np.ndarray
    flux_f: np.ndarray  # (nt, Nx) D_f d_y c_f on Sigma
    flux_s: np.ndarray  # (nt, Nx) D_s d_y c_s on Sigma

    @property
    def jump(self) -> np.ndarray:
        """c_f - c_s on Sigma (the normal points from the solid into the fluid)."""
        return self.trace_f - self.trace_s

    def total_mass(self, n: int) -> float:
        return self.fluid.mass(n) + self.solid.mass(n)


def _flux_weights(d: float) -> tuple[float, float, float]:
    """Weights (trace, near, far) of the derivative toward the trace, cells at d/2 and 3d/2."""
    return 8.0 / (3 * d), -9.0 / (3 * d), 1.0 / (3 * d)


def solve_coupled_concentrations(
    fluid: HeatProblem,
    solid: HeatProblem,
    zeta: float,
    F2: tuple[Datum, Datum] = (None, None),
) -> CoupledSolution:
    """Monolithic backward-Euler step for both regions coupled through Sigma.

    Interface equations with n = -e_y (solid to fluid) and [c] = c_f - c_s:

        D_f grad c_f . n = D_s grad c_s . n + F2_f
        D_s grad c_s . n = zeta [c] + F2_s

    Fluxes use one-sided second-order stencils on the trace unknowns; the cell
    balances next to Sigma use the same flux expressions, so with F2 = 0 and
    zero exterior flux the total mass telescopes exactly.
    """
    if not zeta > 0:
        raise ValueError(f"interface permeability must be positive, got {zeta}")
    g = fluid.grid
    if solid.grid != g or solid.dt != fluid.dt or solid.nsteps != fluid.nsteps:
        raise ValueError("fluid and solid problems must share grid, dt and nsteps")
    dt, dy, Nx = fluid.dt, g.dy, g.Nx
    rf = _Region(g, "fluid", 0)
    rs = _Region(g, "solid", rf.size)
    tf0 = rf.size + rs.size
    ts0 = tf0 + Nx
    n = ts0 + Nx
    rows, cols, vals = [], [], []
    for reg, prob in ((rf, fluid), (rs, solid)):
        r, c, v = reg.laplacian(prob.D)
        rows += r
        cols += c
        vals += v
        rows += [reg.offset + k for k in range(reg.size)]
        cols += [reg.offset + k for k in range(reg.size)]
        vals += [1.0 / dt] * reg.size
    w_t, w_1, w_2 = _flux_weights(dy)
    Df, Ds = fluid.D, solid.D

    def qf_terms(i):  # D_f d_y c_f at Sigma
        return [(tf0 + i, Df * w_t), (rf.idx(i, rf.m - 1), Df * w_1), (rf.idx(i, rf.m - 2), Df * w_2)]

    def qs_terms(i):  # D_s d_y c_s at Sigma (derivative toward +y is minus the inward one)
        return [(ts0 + i, -Ds * w_t), (rs.idx(i, 0), -Ds * w_1), (rs.idx(i, 1), -Ds * w_2)]

    def put(r, terms, scale=1.0):
        for c, v in terms:
            rows.append(r)
            cols.append(c)
            vals.append(scale * v)

    for i in range(Nx):
        # cell balances: fluid gains D_f d_y c_f / dy, solid loses D_s d_y c_s / dy
        put(rf.idx(i, rf.m - 1), qf_terms(i), -1.0 / dy)
        put(rs.idx(i, 0), qs_terms(i), 1.0 / dy)
        # -D_f d_y c_f + D_s d_y c_s = F2_f
        put(tf0 + i, qf_terms(i), -1.0)
        put(tf0 + i, qs_terms(i), 1.0)
        # -D_s d_y c_s - zeta (c_f - c_s) = F2_s
        put(ts0 + i, qs_terms(i), -1.0)
        put(ts0 + i, [(tf0 + i, -zeta), (ts0 + i, zeta)])
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n)).tocsc()
    lu = spla.splu(A)

    cf = _initial(fluid, rf)
    cs = _initial(solid, rs)
    x = np.zeros(n)
    x[: rf.size] = cf.ravel()
    x[rf.size : tf0] = cs.ravel()
    # consistent initial traces from the interface equations with the cell values
    x[tf0:] = _initial_traces(cf, cs, Df, Ds, zeta, dy)
    states = [x.copy()]
    for k in range(1, fluid.nsteps + 1):
        t = fluid.time(k)
        rhs = np.zeros(n)
        ff = _forcing(fluid, rf, k) + rf.boundary_source(rf.flux_samples(fluid, k), False)
        fs = _forcing(solid, rs, k) + rs.boundary_source(rs.flux_samples(solid, k), False)
        rhs[: rf.size] = (x[: rf.size].reshape(Nx, rf.m) / dt + ff).ravel()
        rhs[rf.size : tf0] = (x[rf.size : tf0].reshape(Nx, rs.m) / dt + fs).ravel()
        ysig = np.full(Nx, g.h)
        rhs[tf0:ts0] = sample(F2[0], g.xc, ysig, t, k, True)
        rhs[ts0:] = sample(F2[1], g.xc, ysig, t, k, False)
        x = lu.solve(rhs)
        states.append(x.copy())
    S = np.array(states)
    times = dt * np.arange(fluid.nsteps + 1)
    c_f = S[:, : rf.size].reshape(-1, Nx, rf.m)
    c_s = S[:, rf.size : tf0].reshape(-1, Nx, rs.m)
    tr_f, tr_s = S[:, tf0:ts0], S[:, ts0:]
    flux_f = Df * (w_t * tr_f + w_1 * c_f[:, :, -1] + w_2 * c_f[:, :, -2])
    flux_s = -Ds * (w_t * tr_s + w_1 * c_s[:, :, 0] + w_2 * c_s[:, :, 1])
    return CoupledSolution(
        HeatSolution(g, "fluid", times, c_f), HeatSolution(g, "solid", times, c_s), tr_f, tr_s, flux_f, flux_s
    )


def _initial_traces(cf, cs, Df, Ds, zeta, dy) -> np.ndarray:
    w_t, w_1, w_2 = _flux_weights(dy)
    a = Df * (w_1 * cf[:, -1] + w_2 * cf[:, -2])  # flux_f = Df w_t T_f + a
    b = -Ds * (w_1 * cs[:, 0] + w_2 * cs[:, 1])  # flux_s = -Ds w_t T_s + b
    Nx = cf.shape[0]
    out = np.zeros(2 * Nx)
    for i in range(Nx):
        M = np.array([[-Df * w_t, -Ds * w_t], [-zeta, Ds * w_t + zeta]])
        r = np.array([a[i] - b[i], b[i]])
        out[i], out[Nx + i] = np.linalg.solve(M, r)
    return out


# parabolic transmission ------------------------------------------------------

PARABOLIC_BCS = {"left": BC.OUTFLOW, "right": BC.OUTFLOW, "bottom": BC.SYMMETRY, "top": BC.DIRICHLET}


def solve_parabolic_transmission(problem: Any, check: bool = True):
    """Vector diffusion rho d_t u - mu Laplace u = f with the two-phase cylinder conditions.

    Uses the Stokes data carrier without pressure: g1 velocity jump, g2
    symmetric-stress jump, g3 tangential velocity and g4 = 2 mu d_x u_x on
    the ends, g5 velocity on the wall. f_d must be absent.
    """
    from .stokes import _march, _system, _x0, cylinder_blocks

    if problem.f_d is not None:
        raise ValueError("the parabolic transmission system has no divergence constraint; f_d must be None")
    if check:
        from .norms_compat import check_parabolic_transmission

        report = check_parabolic_transmission(problem)
        if not report.passed:
            raise CompatibilityError(report)
    system = _system(problem, PARABOLIC_BCS, two_phase=True, form="laplacian", pressure=False)
    return _march(problem, system, lambda n: cylinder_blocks(problem, n), _x0(problem, system))
