"""
Discrete Sobolev and Slobodeckij norms, and compatibility checkers.

Every checker returns a ConditionReport with one entry per condition. Residuals
are discrete L-infinity values over the set named in the entry's anchor (the
t = 0 slice, a contact point, or all time levels at a contact point).
Thresholds are 10 dx^2 times the magnitude of the data involved.

Boundary values come from half-offset samples by quadratic extrapolation and
normal derivatives from the one-sided stencil (-2, 3, -1)/d, both exact for
quadratics.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from .fields import Piecewise, sample
from .geometry import GridError, ReferenceGrid
from .report import ConditionReport


# norms -----------------------------------------------------------------------

def slobodeckij_seminorm(
    samples: np.ndarray,
    s: float,
    q: float,
    spacing: float | None = None,
    coords: np.ndarray | None = None,
    dim: int = 1,
) -> float:
    """Double-sum quadrature of (sum_{i != j} |f_i - f_j|^q / |x_i - x_j|^(dim + s q) w_i w_j)^(1/q).

    samples: shape (N,) or (N, ...); trailing axes are measured in the discrete
    l^q norm, which gives the time-interval version with values in a space.
    Points are midpoints of equal cells of width `spacing`, or given by `coords`
    with trapezoid-free cell weights from neighbour spacing.
    """
    if not 0.0 < s < 1.0:
        raise ValueError(f"smoothness s must lie in (0, 1), got {s}")
    if q < 1:
        raise ValueError(f"exponent q must be >= 1, got {q}")
    f = np.asarray(samples, dtype=float)
    N = f.shape[0]
    if N < 4:
        raise ValueError("at least 4 samples are needed")
    if coords is None:
        h = 1.0 / N if spacing is None else float(spacing)
        x = (np.arange(N) + 0.5) * h
        w = np.full(N, h)
    else:
        x = np.asarray(coords, dtype=float)
        edges = np.concatenate([[x[0] - 0.5 * (x[1] - x[0])], 0.5 * (x[1:] + x[:-1]), [x[-1] + 0.5 * (x[-1] - x[-2])]])
        w = np.diff(edges)
    flat = f.reshape(N, -1)
    diff = np.abs(flat[:, None, :] - flat[None, :, :])
    num = (diff**q).sum(axis=2)
    dist = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(dist, 1.0)
    kern = num / dist ** (dim + s * q) * w[:, None] * w[None, :]
    np.fill_diagonal(kern, 0.0)
    return float(kern.sum() ** (1.0 / q))


def _lq(a: np.ndarray, q: float, cell: float) -> float:
    return float((np.sum(np.abs(a) ** q) * cell) ** (1.0 / q))


def sobolev_norm_discrete(field: Any, k: int, q: float, dx: float | None = None, dy: float | None = None) -> float:
    """Additive W^k_q norm: sum over |alpha| <= k of ||D^alpha f||_{L^q}.

    field: cell samples (Nx, Ny) with spacings dx, dy, or a GridField.
    Derivatives are second-order difference quotients (one-sided at the edges).
    """
    if k not in (0, 1, 2):
        raise ValueError(f"order k must be 0, 1 or 2, got {k}")
    if hasattr(field, "grid"):
        dx, dy = field.grid.dx, field.grid.dy
        f = np.asarray(field.values, dtype=float)
    else:
        f = np.asarray(field, dtype=float)
        if dx is None or dy is None:
            raise ValueError("spacings dx and dy are required for raw arrays")
    cell = dx * dy
    total = _lq(f, q, cell)
    if k >= 1:
        fx = np.gradient(f, dx, axis=0, edge_order=2)
        fy = np.gradient(f, dy, axis=1, edge_order=2)
        total += _lq(fx, q, cell) + _lq(fy, q, cell)
    if k == 2:
        total += _lq(np.gradient(fx, dx, axis=0, edge_order=2), q, cell)
        total += 2 * _lq(np.gradient(fx, dy, axis=1, edge_order=2), q, cell)
        total += _lq(np.gradient(fy, dy, axis=1, edge_order=2), q, cell)
    return total


# stencils --------------------------------------------------------------------

def _edge(a0, a1, a2):
    """Boundary value from samples at distances d/2, 3d/2, 5d/2."""
    return (15 * a0 - 10 * a1 + 3 * a2) / 8


def _dwall(a0, a1, a2, d):
    """Derivative at the boundary, toward the samples at d/2, 3d/2, 5d/2."""
    return (-2 * a0 + 3 * a1 - a2) / d


def _dnode(a0, a1, a2, d):
    """Derivative at a node sample a0, toward a1, a2 at distances d, 2d."""
    return (-3 * a0 + 4 * a1 - a2) / (2 * d)


def _end(a, end: int, axis: int = 0):
    """Samples ordered from the given end inward along an axis."""
    a = np.moveaxis(np.asarray(a), axis, 0)
    return (a[0], a[1], a[2]) if end == 0 else (a[-1], a[-2], a[-3])


def _mag(*arrays) -> float:
    return 1.0 + max((float(np.max(np.abs(a))) if np.size(a) else 0.0) for a in arrays)


def _linf(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.max(np.abs(a))) if a.size else 0.0


def _need_rows(grid: ReferenceGrid) -> None:
    if grid.js < 3 or grid.Ny - grid.js < 3:
        raise GridError("contact-point stencils need at least 3 cell rows in each phase")


# two-phase Stokes ------------------------------------------------------------

class _StokesContact:
    """Contact-point quantities of the cylinder data at one time level and end."""

    def __init__(self, problem, blocks: dict[str, np.ndarray], end: int):
        g = problem.grid
        p = problem.params
        js, dy = g.js, g.dy
        name = "left" if end == 0 else "right"
        tl = blocks[f"tan_{name}"]
        tls = blocks[f"tan_{name}_s"][0]
        nl = blocks[f"nrm_{name}"]
        o = problem.orientation
        self.g3_f, self.g3_s = tl[js], tls
        self.dg3_f = (3 * tl[js] - 4 * tl[js - 1] + tl[js - 2]) / (2 * dy)
        self.dg3_s = _dnode(tls, tl[js + 1], tl[js + 2], dy)
        self.g4_f = _edge(nl[js - 1], nl[js - 2], nl[js - 3])
        self.g4_s = _edge(nl[js], nl[js + 1], nl[js + 2])
        self.g4_top = _edge(nl[-1], nl[-2], nl[-3])
        fd = blocks["fd"]
        rows = _edge(*_end(fd, end))  # x-extrapolated, one value per cell row
        self.fd_f = _edge(rows[js - 1], rows[js - 2], rows[js - 3])
        self.fd_s = _edge(rows[js], rows[js + 1], rows[js + 2])
        self.g1y = _edge(*_end(blocks["g1y"], end))
        self.g2y = _edge(*_end(blocks["g2y"], end))
        self.g3_top = tl[-1]
        self.g5y = _edge(*_end(blocks["nrm_top"], end))
        g5x = blocks["tan_top"]
        a0, a1, a2 = _end(g5x, end)
        self.dg5x = _dnode(a0, a1, a2, g.dx) * (1 if end == 0 else -1)
        self.jump_g3 = -o * (self.g3_f - self.g3_s)
        self.mu = (p.mu_f, p.mu_s)


def _u0_traces(problem):
    """Sampled initial velocity and its traces on Sigma, the ends and the wall."""
    from .stokes import initial_velocity

    g = problem.grid
    js, dy, dx = g.js, g.dy, g.dx
    p = problem.params
    ux, uy, uys = initial_velocity(problem)
    o = problem.orientation
    out = {"ux": ux, "uy": uy, "uys": uys}
    # velocity jumps on Sigma
    uxf = _edge(ux[:, js - 1], ux[:, js - 2], ux[:, js - 3])
    uxs = _edge(ux[:, js], ux[:, js + 1], ux[:, js + 2])
    out["jump_x"] = -o * (uxf - uxs)
    out["jump_y"] = -o * (uy[:, js] - uys)
    # tangential stress jump at interior Sigma nodes
    dudy_f = -_dwall(ux[1:-1, js - 1], ux[1:-1, js - 2], ux[1:-1, js - 3], dy)
    dudy_s = _dwall(ux[1:-1, js], ux[1:-1, js + 1], ux[1:-1, js + 2], dy)
    dvdx_f = np.diff(uy[:, js]) / dx
    dvdx_s = np.diff(uys) / dx
    out["tau_jump"] = p.mu_s * (dudy_s + dvdx_s) - p.mu_f * (dudy_f + dvdx_f)
    # tangential velocity on the ends at nodes y_j, Sigma node per phase
    for end, name in ((0, "left"), (1, "right")):
        t = _edge(*_end(uy, end))
        ts = _edge(*_end(uys, end))
        out[f"tan_{name}"] = t
        out[f"tan_{name}_s"] = ts
        out[f"dudx_{name}"] = _dnode(*_end(ux, end), dx) * (1 if end == 0 else -1)
    # wall traces
    out["top_x"] = _edge(ux[:, -1], ux[:, -2], ux[:, -3])
    out["top_y"] = uy[:, -1]
    # discrete divergence
    bot = uy[:, :-1].copy()
    bot[:, js] = uys
    out["div"] = np.diff(ux, axis=0) / dx + (uy[:, 1:] - bot) / dy
    return out


def _threshold(grid: ReferenceGrid, dt: float, scale: float) -> float:
    # every check compares exact data through second-order stencils; no time differences
    return 10.0 * max(grid.dx, grid.dy) ** 2 * scale


def check_stokes_compatibility(problem) -> ConditionReport:
    """Initial and contact-line compatibility of two-phase cylinder data."""
    from .stokes import cylinder_blocks

    g = problem.grid
    _need_rows(g)
    dt = problem.dt
    rep = ConditionReport("two-phase Stokes compatibility")
    b0 = cylinder_blocks(problem, 0)
    u = _u0_traces(problem)
    js = g.js

    rep.add("div_u0", "t=0, all cells", _linf(u["div"] - b0["fd"]),
            _threshold(g, dt, _mag(b0["fd"], u["ux"], u["uy"])))
    res = []
    for name in ("left", "right"):
        tan = u[f"tan_{name}"].copy()
        res.append(tan - b0[f"tan_{name}"])
        res.append(u[f"tan_{name}_s"][None] - b0[f"tan_{name}_s"])
    rep.add("u0_tangential_G", "t=0, both ends", max(_linf(r) for r in res),
            _threshold(g, dt, _mag(u["uy"], b0["tan_left"], b0["tan_right"])))
    res_w = max(_linf(u["top_x"] - b0["tan_top"]), _linf(u["top_y"] - b0["nrm_top"]))
    rep.add("u0_wall_S", "t=0, wall y=1", res_w, _threshold(g, dt, _mag(u["ux"], u["uy"], b0["tan_top"])))
    res_j = max(_linf(u["jump_x"] - b0["g1x"]), _linf(u["jump_y"] - b0["g1y"]))
    rep.add("u0_jump_Sigma", "t=0, interface", res_j, _threshold(g, dt, _mag(u["ux"], u["uy"], b0["g1x"])))
    rep.add("u0_tangential_stress_jump", "t=0, interior interface nodes",
            _linf(u["tau_jump"] - b0["g2x"][1:-1]), _threshold(g, dt, _mag(u["tau_jump"], b0["g2x"])))

    r_g, r_j, r_n, s_g, s_j, s_n = 0.0, 0.0, 0.0, 1.0, 1.0, 1.0
    for n in range(problem.nsteps + 1):
        bl = cylinder_blocks(problem, n)
        for end in (0, 1):
            c = _StokesContact(problem, bl, end)
            r_g = max(r_g, abs(c.g3_top - c.g5y))
            s_g = max(s_g, _mag(c.g3_top, c.g5y))
            r_j = max(r_j, abs(c.jump_g3 - c.g1y))
            s_j = max(s_j, _mag(c.g3_f, c.g3_s, c.g1y))
            mu_f, mu_s = c.mu
            rhs = (4 * mu_s * c.dg3_s + c.g4_s - 2 * mu_s * c.fd_s) - (4 * mu_f * c.dg3_f + c.g4_f - 2 * mu_f * c.fd_f)
            r_n = max(r_n, abs(c.g2y - rhs))
            s_n = max(s_n, _mag(c.g2y, rhs, 4 * mu_s * c.dg3_s, c.g4_s, c.g4_f))
    rep.add("g3_equals_g5_contact_G", "wall/end corners, all levels", r_g, _threshold(g, dt, s_g))
    rep.add("g3_jump_equals_g1_contact_Sigma", "interface/end corners, all levels", r_j, _threshold(g, dt, s_j))
    rep.add("g2_normal_contact_Sigma", "interface/end corners, all levels", r_n, _threshold(g, dt, s_n))
    return rep


# parabolic transmission -------------------------------------------------------

def _finite_levels(problem, keys: list[str]) -> float:
    from .stokes import cylinder_blocks

    for n in range(problem.nsteps + 1):
        bl = cylinder_blocks(problem, n)
        for k in keys:
            if not np.all(np.isfinite(bl[k])):
                return float("inf")
    return 0.0


def check_parabolic_transmission(problem) -> ConditionReport:
    """The twelve regularity and compatibility items of the vector diffusion system.

    Items 1-6 are the regularity classes of f, g1..g5, measured by finiteness
    of the samples at every level. Item 10 concerns a velocity component
    across the cylinder that the reduced geometry does not carry; it is
    reported with residual 0.
    """
    from .stokes import cylinder_blocks

    g = problem.grid
    _need_rows(g)
    dt = problem.dt
    p = problem.params
    rep = ConditionReport("parabolic transmission compatibility")
    groups = [
        ("01_forcing", ["fx", "fy", "fy_s"]),
        ("02_g1", ["g1x", "g1y"]),
        ("03_g2", ["g2x", "g2y"]),
        ("04_g3", ["tan_left", "tan_right", "tan_left_s", "tan_right_s"]),
        ("05_g4", ["nrm_left", "nrm_right"]),
        ("06_g5", ["tan_top", "nrm_top"]),
    ]
    for name, keys in groups:
        rep.add(name, "finite samples at every level", _finite_levels(problem, keys), 0.0)
    b0 = cylinder_blocks(problem, 0)
    u = _u0_traces(problem)
    r7 = max(_linf(u["jump_x"] - b0["g1x"]), _linf(u["jump_y"] - b0["g1y"]), _linf(u["tau_jump"] - b0["g2x"][1:-1]))
    rep.add("07_initial_interface", "t=0, interface", r7, _threshold(g, dt, _mag(u["ux"], u["uy"], b0["g1x"], b0["g2x"])))
    mu_rows = np.where(g.yc < g.h, p.mu_f, p.mu_s)
    r8 = 0.0
    for name in ("left", "right"):
        r8 = max(r8, _linf(u[f"tan_{name}"] - b0[f"tan_{name}"]), _linf(u[f"tan_{name}_s"] - b0[f"tan_{name}_s"]))
        r8 = max(r8, _linf(2 * mu_rows * u[f"dudx_{name}"] - b0[f"nrm_{name}"]))
    r8 = max(r8, _linf(u["top_x"] - b0["tan_top"]), _linf(u["top_y"] - b0["nrm_top"]))
    rep.add("08_initial_boundary", "t=0, ends and wall", r8,
            _threshold(g, dt, _mag(u["ux"], u["uy"], b0["nrm_left"], b0["nrm_right"])))
    r9 = r11 = r12 = 0.0
    s9 = s11 = s12 = 1.0
    for n in range(problem.nsteps + 1):
        bl = cylinder_blocks(problem, n)
        for end in (0, 1):
            c = _StokesContact(problem, bl, end)
            r9 = max(r9, abs(c.jump_g3 - c.g1y))
            s9 = max(s9, _mag(c.g3_f, c.g3_s, c.g1y))
            rhs = 2 * p.mu_s * c.dg3_s - 2 * p.mu_f * c.dg3_f
            r11 = max(r11, abs(c.g2y - rhs))
            s11 = max(s11, _mag(c.g2y, rhs))
            r12 = max(r12, abs(c.g3_top - c.g5y), abs(c.g4_top - 2 * p.mu_s * c.dg5x))
            s12 = max(s12, _mag(c.g3_top, c.g5y, c.g4_top, 2 * p.mu_s * c.dg5x))
    rep.add("09_g3_jump_contact_Sigma", "interface/end corners, all levels", r9, _threshold(g, dt, s9))
    rep.add("10_crossflow_contact_Sigma", "no cross-flow component in the reduced geometry", 0.0, 0.0)
    rep.add("11_g2_normal_contact_Sigma", "interface/end corners, all levels", r11, _threshold(g, dt, s11))
    rep.add("12_contact_S", "wall/end corners, all levels", r12, _threshold(g, dt, s12))
    return rep


# elliptic --------------------------------------------------------------------

def check_elliptic_compatibility(problem) -> ConditionReport:
    """Contact-point conditions of the elliptic transmission data."""
    from .elliptic import _sample_data

    g = problem.grid
    _need_rows(g)
    js, dy = g.js, g.dy
    rf, rs = problem.rho
    _, g1, g2, g3, g4 = _sample_data(problem)
    rep = ConditionReport("elliptic transmission compatibility")
    r1 = r2 = r3 = 0.0
    s1 = s2 = s3 = 1.0
    for end in (0, 1):
        col = g3[end]
        f_h = _edge(col[js - 1], col[js - 2], col[js - 3])
        s_h = _edge(col[js], col[js + 1], col[js + 2])
        jump = -problem.orientation * (f_h - s_h)
        g1e = _edge(*_end(g1, end))
        r1 = max(r1, abs(jump - g1e))
        s1 = max(s1, _mag(f_h, s_h, g1e))
        d_f = -_dwall(col[js - 1], col[js - 2], col[js - 3], dy) / rf
        d_s = _dwall(col[js], col[js + 1], col[js + 2], dy) / rs
        g2e = _edge(*_end(g2, end))
        r2 = max(r2, abs((d_s - d_f) - g2e))
        s2 = max(s2, _mag(d_s, d_f, g2e))
        d_top = -_dwall(col[-1], col[-2], col[-3], dy) / rs
        g4e = _edge(*_end(g4, end))
        r3 = max(r3, abs(d_top - g4e))
        s3 = max(s3, _mag(d_top, g4e))
    rep.add("g3_jump_equals_g1_contact_Sigma", "interface/end corners", r1, _threshold(g, 0.0, s1))
    rep.add("normal_derivative_jump_contact_Sigma", "interface/end corners", r2, _threshold(g, 0.0, s2))
    rep.add("normal_derivative_contact_S", "wall/end corners", r3, _threshold(g, 0.0, s3))
    return rep


# heat ------------------------------------------------------------------------

def check_heat_compatibility(problem, region: str) -> ConditionReport:
    """Initial flux consistency and corner conditions of a Neumann heat problem."""
    from .heat import SEGMENTS, _initial, _Region

    g = problem.grid
    reg = _Region(g, region)
    if reg.m < 3 or g.Nx < 3:
        raise GridError("corner stencils need at least 3 cell rows and columns in the region")
    dx, dy, dt = g.dx, g.dy, problem.dt
    D = problem.D
    rep = ConditionReport(f"heat compatibility ({region})")
    c0 = _initial(problem, reg)
    f0 = reg.flux_samples(problem, 0)
    # outward normal derivative = minus the derivative toward the interior
    res = [
        -D * _dwall(*_end(c0, 0), dx) - f0["left"],
        -D * _dwall(*_end(c0, 1), dx) - f0["right"],
    ]
    if region == "fluid":
        res.append(-D * _dwall(c0[:, -1], c0[:, -2], c0[:, -3], dy) - f0["sigma"])
    else:
        res.append(-D * _dwall(c0[:, 0], c0[:, 1], c0[:, 2], dy) - f0["sigma"])
        res.append(-D * _dwall(c0[:, -1], c0[:, -2], c0[:, -3], dy) - f0["top"])
    scale = _mag(D * c0, *f0.values())
    rep.add("initial_flux", "t=0, every boundary segment", max(_linf(r) for r in res), _threshold(g, dt, scale))

    corners = [("sigma", "sigma")] if region == "fluid" else [("sigma", "sigma"), ("top", "S")]
    for seg, label in corners:
        r, s = 0.0, 1.0
        for n in range(problem.nsteps + 1):
            fl = reg.flux_samples(problem, n)
            for end, name in ((0, "left"), (1, "right")):
                along = -_dwall(*_end(fl[seg], end), dx)
                col = fl[name]
                at_top = (seg == "sigma" and region == "fluid") or seg == "top"
                if at_top:
                    across = -_dwall(col[-1], col[-2], col[-3], dy)
                else:
                    across = -_dwall(col[0], col[1], col[2], dy)
                r = max(r, abs(along - across))
                s = max(s, _mag(along, across))
        rep.add(f"corner_{label}", f"{label}/end corners, all levels", r, _threshold(g, dt, s))
    return rep


# nonlinear initial data ------------------------------------------------------

def check_nonlinear_initial(v0: Any, c0: Any, params: Any, grid: ReferenceGrid) -> ConditionReport:
    """Compatibility of initial velocity and concentrations for the coupled system.

    v0: (u_x, u_y) data; c0: concentration data on cells (Piecewise or array).
    params needs nu_f, nu_s, D_f, D_s, zeta. Interface normal solid to fluid.
    """
    from .stokes import StokesParams, StokesProblem

    _need_rows(grid)
    js, dx, dy = grid.js, grid.dx, grid.dy
    carrier = StokesProblem(grid, StokesParams(1.0, 1.0, params.nu_f, params.nu_s), u0=v0, dt=1.0, nsteps=0)
    u = _u0_traces(carrier)
    rep = ConditionReport("nonlinear initial compatibility")
    thr = lambda *a: _threshold(grid, 0.0, _mag(*a))  # noqa: E731
    rep.add("div_v0", "t=0, all cells", _linf(u["div"]), thr(u["ux"], u["uy"]))
    tan = max(_linf(u[f"tan_{e}"]) for e in ("left", "right"))
    tan = max(tan, _linf(u["tan_left_s"]), _linf(u["tan_right_s"]))
    rep.add("tangential_v0_G", "t=0, both ends", tan, thr(u["uy"]))
    rep.add("v0_wall_S", "t=0, wall y=1", max(_linf(u["top_x"]), _linf(u["top_y"])), thr(u["ux"], u["uy"]))
    rep.add("v0_jump_Sigma", "t=0, interface", max(_linf(u["jump_x"]), _linf(u["jump_y"])), thr(u["ux"], u["uy"]))
    rep.add("v0_tangential_stress_jump", "t=0, interior interface nodes", _linf(u["tau_jump"]),
            thr(u["tau_jump"] * dx, u["ux"], u["uy"]))

    Xc, Yc = grid.coords("cell")
    if isinstance(c0, np.ndarray):
        c = np.broadcast_to(c0, (grid.Nx, grid.Ny)).astype(float)
    else:
        c = sample(c0, Xc, Yc, 0.0, 0, Yc < grid.h)
    cf_tr = _edge(c[:, js - 1], c[:, js - 2], c[:, js - 3])
    cs_tr = _edge(c[:, js], c[:, js + 1], c[:, js + 2])
    dcf = -_dwall(c[:, js - 1], c[:, js - 2], c[:, js - 3], dy)
    dcs = _dwall(c[:, js], c[:, js + 1], c[:, js + 2], dy)
    robin = params.zeta * (cf_tr - cs_tr) + params.D_s * dcs
    rep.add("robin_Sigma", "t=0, interface", _linf(robin), thr(params.zeta * c, params.D_s * c))
    rep.add("flux_continuity_Sigma", "t=0, interface", _linf(params.D_f * dcf - params.D_s * dcs),
            thr(params.D_f * c, params.D_s * c))
    Drow = np.where(grid.yc < grid.h, params.D_f, params.D_s)
    flux_g = max(_linf(Drow * _dwall(*_end(c, e), dx)) for e in (0, 1))
    rep.add("flux_G", "t=0, both ends", flux_g, thr(Drow * c))
    return rep
