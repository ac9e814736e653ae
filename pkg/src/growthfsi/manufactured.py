"""
Symbolic manufactured solutions.

Exact fields are given per phase as sympy expressions in x, y, t. Forcing,
jump and boundary data are derived symbolically and lambdified, so they are
independent of every discrete stencil in the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy as sp

from .fields import Piecewise, sample
from .geometry import ReferenceGrid

x, y, t = sp.symbols("x y t", real=True)


def as_expr(e) -> sp.Expr:
    return sp.sympify(e, locals={"x": x, "y": y, "t": t})


def lam(expr) -> Callable:
    f = sp.lambdify((x, y, t), as_expr(expr), modules="numpy")
    return lambda X, Y, T: np.broadcast_to(np.asarray(f(X, Y, T), dtype=float), np.shape(X)).copy()


def piece(fluid, solid) -> Piecewise:
    return Piecewise(lam(fluid), lam(solid))


@dataclass
class StokesMMS:
    """Exact (u_x, u_y, p) per phase; entries are (fluid, solid) expressions."""

    ux: tuple
    uy: tuple
    p: tuple

    def _phase(self, k: int, rho: float, mu: float):
        u = sp.Matrix([as_expr(self.ux[k]), as_expr(self.uy[k])])
        p = as_expr(self.p[k])
        grad = u.jacobian([x, y])
        stress = -p * sp.eye(2) + mu * (grad + grad.T)
        div_stress = sp.Matrix([sp.diff(stress[0, 0], x) + sp.diff(stress[0, 1], y),
                                sp.diff(stress[1, 0], x) + sp.diff(stress[1, 1], y)])
        force = rho * sp.diff(u, t) - div_stress
        return u, p, stress, force, grad.trace()

    def problem(self, grid: ReferenceGrid, params, dt: float, nsteps: int, orientation: int = -1):
        from .stokes import StokesProblem

        h = sp.Rational(grid.js, grid.Ny)
        uf, pf, sf, ff, df = self._phase(0, params.rho_f, params.mu_f)
        us, ps, ss, fs, ds = self._phase(1, params.rho_s, params.mu_s)
        sign = 1 if orientation == -1 else -1  # [f] = sign (f_f - f_s)
        g1 = [sign * (uf[k] - us[k]).subs(y, h) for k in range(2)]
        g2 = [(ss[k, 1] - sf[k, 1]).subs(y, h) for k in range(2)]
        # normal stress on either end equals sigma_xx
        return StokesProblem(
            grid=grid,
            params=params,
            f_u=(piece(ff[0], fs[0]), piece(ff[1], fs[1])),
            f_d=piece(df, ds),
            g1=(lam(g1[0]), lam(g1[1])),
            g2=(lam(g2[0]), lam(g2[1])),
            g3=piece(uf[1], us[1]),
            g4=piece(sf[0, 0], ss[0, 0]),
            g5=(lam(us[0]), lam(us[1])),
            u0=(piece(uf[0], us[0]), piece(uf[1], us[1])),
            dt=dt,
            nsteps=nsteps,
            orientation=orientation,
        )

    def exact(self, grid: ReferenceGrid, time: float) -> dict[str, np.ndarray]:
        h = grid.h
        Xx, Yx = grid.coords("xface")
        Xy, Yy = grid.coords("yface")
        Xc, Yc = grid.coords("cell")
        return {
            "ux": sample(piece(*self.ux), Xx, Yx, time, None, Yx < h),
            "uy": sample(piece(*self.uy), Xy, Yy, time, None, Yy <= h),
            "uys": sample(piece(*self.uy), grid.xc, np.full(grid.Nx, h), time, None, False),
            "p": sample(piece(*self.p), Xc, Yc, time, None, Yc < h),
        }


def l2_error(grid: ReferenceGrid, approx: np.ndarray, exact: np.ndarray) -> float:
    return float(np.sqrt(np.sum((approx - exact) ** 2) * grid.dx * grid.dy))


def observed_orders(errors: list[float], ratio: float = 2.0) -> list[float]:
    e = np.asarray(errors, dtype=float)
    return list(np.log(e[:-1] / e[1:]) / np.log(ratio))
