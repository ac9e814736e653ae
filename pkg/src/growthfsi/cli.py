"""
Scenario-driven batch runner.

    python -m growthfsi run <config>      solve or verify one scenario
    python -m growthfsi study <config>    manufactured convergence study
    python -m growthfsi report <dir>      aggregate the CSVs under a directory

A config is a list of `key = value` lines with dotted sections, for example

    kind = two_phase_stokes
    grid.Nx = 32
    params.mu_s = 10
    data.fx = sin(pi*x)*y^2
    data.fy.fluid = 0
    data.fy.solid = exp(-t)*cos(x)

Data expressions use + - * / ^, sin cos exp, the constant pi and the
variables x y t. Outputs go to $GROWTHFSI_OUTPUT_ROOT/<output> (default: the
current directory) together with manifest.csv listing a sha256 per file.

Exit status: 0 success, 2 config error, 3 compatibility refusal, 4 solver failure.
"""

from __future__ import annotations

import argparse
import ast
import csv
import hashlib
import io
import logging
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .fields import Piecewise
from .geometry import GridError, build_reference_domain
from .report import CompatibilityError, ConditionReport

logger = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "GROWTHFSI_OUTPUT_ROOT"


class ConfigError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class OracleFailure(RuntimeError):
    """A verification scenario ran but its oracle did not pass."""


# expressions --------------------------------------------------------------------

_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_CONSTS = {"pi": np.pi}
_VARS = ("x", "y", "t")
_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow,
          ast.USub, ast.UAdd, ast.Constant, ast.Name, ast.Call, ast.Load)


@dataclass(frozen=True)
class Expression:
    text: str
    fn: Callable = field(compare=False, repr=False)
    constant: bool = True

    def __call__(self, X, Y, T):
        return np.broadcast_to(np.asarray(self.fn(X, Y, T), dtype=float), np.shape(X)).copy()

    def value(self) -> float:
        return float(self.fn(0.0, 0.0, 0.0))


def compile_expression(text: str, line: int = 0, column: int = 0, variables: tuple = _VARS) -> Expression:
    """Parse an arithmetic expression through a whitelisted AST."""
    src = text.strip()
    lead = len(text) - len(text.lstrip())
    py = src.replace("^", "**")

    def col_of(pycol: int) -> int:
        # undo the one-character shift of each ^ before pycol
        shift, k, i = 0, 0, 0
        while i < pycol and k < len(src):
            if src[k] == "^":
                i += 2
                shift += 1
            else:
                i += 1
            k += 1
        return column + lead + pycol - shift + 1

    if not src:
        raise ConfigError("empty expression", line, column + 1)
    try:
        tree = ast.parse(py, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"bad expression {src!r}: {exc.msg}", line, col_of((exc.offset or 1) - 1)) from None
    uses_vars = False
    for node in ast.walk(tree):
        where = col_of(getattr(node, "col_offset", 0))
        if not isinstance(node, _NODES):
            raise ConfigError(f"{type(node).__name__} not allowed in {src!r}", line, where)
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ConfigError(f"only numeric constants allowed in {src!r}", line, where)
        if isinstance(node, ast.Name):
            if node.id in variables:
                uses_vars = True
            elif node.id not in _CONSTS and node.id not in _FUNCS:
                raise ConfigError(f"unknown name {node.id!r}", line, where)
        if isinstance(node, ast.Call):
            if not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS):
                raise ConfigError("only sin, cos and exp may be called", line, where)
            if len(node.args) != 1 or node.keywords:
                raise ConfigError(f"{node.func.id} takes one argument", line, where)
    code = compile(tree, "<config>", "eval")
    names = {**_FUNCS, **_CONSTS}

    def fn(X, Y, T):
        return eval(code, {"__builtins__": {}}, {**names, "x": X, "y": Y, "t": T})  # noqa: S307

    return Expression(src, fn, not uses_vars)


# config ----------------------------------------------------------------------

STOKES_PARAMS = {"rho_f", "rho_s", "mu_f", "mu_s"}
STOKES_DATA = {"fx", "fy", "fd", "g1x", "g1y", "g2x", "g2y", "g3", "g4", "g5x", "g5y", "u0x", "u0y"}
COUPLING_PARAMS = {"rho_f", "rho_s", "nu_f", "nu_s", "mu_s", "D_f", "D_s", "zeta", "beta", "gamma", "n"}
HEAT_DATA = {"f", "c0", "flux_left", "flux_right", "flux_sigma", "flux_top"}
ELLIPTIC_DATA = {"f", "g1", "g2", "g3", "g4"}

KINDS: dict[str, dict[str, set[str]]] = {
    "two_phase_stokes": {"params": STOKES_PARAMS | {"orientation"}, "data": STOKES_DATA, "solver": {"check"}},
    "parabolic_transmission": {"params": STOKES_PARAMS, "data": STOKES_DATA - {"fd"}, "solver": {"check"}},
    "heat_fluid": {"params": {"D"}, "data": HEAT_DATA - {"flux_top"}, "solver": {"check"}},
    "heat_solid": {"params": {"D"}, "data": HEAT_DATA, "solver": {"check"}},
    "coupled_concentration": {"params": {"D_f", "D_s", "zeta"}, "data": {"f", "c0", "F2_f", "F2_s"}},
    "elliptic": {"params": {"lambda", "rho_f", "rho_s", "orientation"}, "data": ELLIPTIC_DATA, "solver": {"check"}},
    "laplace": {"params": {"rho_f", "rho_s"}, "data": {"f"}},
    "model_problem": {"model": {"kind", "levels", "T", "nsteps", "min_order"}},
    "neumann_sweep": {"sweep": {"etas", "family", "N", "k", "T", "nsteps", "mu_s", "tol", "max_iter"}},
    "picard": {"params": COUPLING_PARAMS, "picard": {"T", "nsteps", "tol", "max_iter", "amplitude", "c0"}},
    "compat_check": {
        "params": STOKES_PARAMS | COUPLING_PARAMS | {"D", "lambda", "orientation"},
        "data": STOKES_DATA | HEAT_DATA | ELLIPTIC_DATA,
        "check": {"target"},
    },
    "convergence_study": {"study": {"name", "levels"}},
}
COMMON = {"grid": {"L", "h", "Nx", "Ny"}, "time": {"dt", "nsteps"}}
TOP = {"kind", "output", "seed"}
COMPAT_TARGETS = ("stokes", "parabolic", "elliptic", "heat_fluid", "heat_solid", "nonlinear")


@dataclass
class Value:
    raw: str
    line: int
    column: int


@dataclass
class Scenario:
    kind: str
    output: str
    seed: int
    entries: dict[str, Value]

    def has(self, key: str) -> bool:
        return key in self.entries

    def number(self, key: str, default: float | None = None) -> float:
        if key not in self.entries:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        v = self.entries[key]
        expr = compile_expression(v.raw, v.line, v.column)
        if not expr.constant:
            raise ConfigError(f"{key} must be a constant", v.line, v.column + 1)
        return expr.value()

    def integer(self, key: str, default: int | None = None) -> int:
        val = self.number(key, None if default is None else float(default))
        if val != int(val):
            v = self.entries[key]
            raise ConfigError(f"{key} must be an integer", v.line, v.column + 1)
        return int(val)

    def text(self, key: str, default: str | None = None, choices: tuple | None = None) -> str:
        if key not in self.entries:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        v = self.entries[key]
        if choices is not None and v.raw not in choices:
            raise ConfigError(f"{key} must be one of {list(choices)}, got {v.raw!r}", v.line, v.column + 1)
        return v.raw

    def flag(self, key: str, default: bool) -> bool:
        if key not in self.entries:
            return default
        v = self.entries[key]
        low = v.raw.lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"{key} must be true or false", v.line, v.column + 1)
        return low in ("true", "1", "yes")

    def literal(self, key: str, default: Any = None) -> Any:
        if key not in self.entries:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        v = self.entries[key]
        try:
            return ast.literal_eval(v.raw)
        except (ValueError, SyntaxError):
            raise ConfigError(f"{key} must be a literal list, got {v.raw!r}", v.line, v.column + 1) from None

    def datum(self, name: str) -> Any:
        """An expression, a per-phase pair (.fluid/.solid) or None."""
        key = f"data.{name}"
        if key in self.entries:
            v = self.entries[key]
            return compile_expression(v.raw, v.line, v.column)
        fl, so = f"{key}.fluid", f"{key}.solid"
        if fl in self.entries or so in self.entries:
            parts = []
            for k in (fl, so):
                v = self.entries.get(k)
                parts.append(compile_expression(v.raw, v.line, v.column) if v else 0.0)
            return Piecewise(*parts)
        return None

    def normalized(self) -> str:
        return "".join(f"{k} = {self.entries[k].raw}\n" for k in sorted(self.entries))


def parse_config(text: str) -> Scenario:
    entries: dict[str, Value] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", lineno, len(line) - len(line.lstrip()) + 1)
        key_part, val_part = line.split("=", 1)
        key = key_part.strip()
        kcol = len(key_part) - len(key_part.lstrip()) + 1
        if not key or any(not seg.isidentifier() for seg in key.split(".")):
            raise ConfigError(f"malformed key {key!r}", lineno, kcol)
        if key in entries:
            raise ConfigError(f"duplicate key {key!r} (first on line {entries[key].line})", lineno, kcol)
        value = val_part.strip()
        vcol = len(key_part) + 1 + (len(val_part) - len(val_part.lstrip()))
        if not value:
            raise ConfigError(f"empty value for {key!r}", lineno, vcol + 1)
        entries[key] = Value(value, lineno, vcol)
    if "kind" not in entries:
        raise ConfigError("missing 'kind'", 1, 1)
    kind = entries["kind"].raw
    if kind not in KINDS:
        v = entries["kind"]
        raise ConfigError(f"unknown kind {kind!r}; expected one of {sorted(KINDS)}", v.line, v.column + 1)
    allowed = {**COMMON, **KINDS[kind]}
    for key, v in entries.items():
        parts = key.split(".")
        if len(parts) == 1:
            ok = key in TOP
        elif parts[0] == "data" and "data" in allowed:
            ok = parts[1] in allowed["data"] and (len(parts) == 2 or (len(parts) == 3 and parts[2] in ("fluid", "solid")))
        else:
            ok = len(parts) == 2 and parts[1] in allowed.get(parts[0], ())
        if not ok:
            raise ConfigError(f"key {key!r} is not accepted by kind {kind!r}", v.line, 1)
        if parts[0] == "data":
            compile_expression(v.raw, v.line, v.column)
    sc = Scenario(kind, entries["output"].raw if "output" in entries else kind, 0, entries)
    sc.seed = sc.integer("seed", 0)
    return sc


# outputs -----------------------------------------------------------------------

def fmt(v: float) -> str:
    return f"{float(v):.12e}"


def csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


class Outputs:
    """Writes confined to one directory; the manifest covers every file written."""

    def __init__(self, directory: Path):
        self.dir = directory
        self.files: list[str] = []

    def write(self, name: str, content: str) -> Path:
        path = (self.dir / name).resolve()
        if self.dir.resolve() not in path.parents:
            raise ValueError(f"refusing to write {name!r} outside {self.dir}")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content)
        if name not in self.files:
            self.files.append(name)
        return path

    def manifest(self) -> Path:
        rows = []
        for name in sorted(self.files):
            data = (self.dir / name).read_bytes()
            rows.append([name, hashlib.sha256(data).hexdigest(), len(data)])
        return self.write_raw("manifest.csv", csv_text(["file", "sha256", "bytes"], rows))

    def write_raw(self, name: str, content: str) -> Path:
        path = self.dir / name
        path.write_text(content)
        return path


def output_dir(sc: Scenario, root: str | os.PathLike | None) -> Path:
    base = Path(root if root is not None else os.environ.get(OUTPUT_ROOT_ENV, ".")).resolve()
    out = (base / sc.output).resolve()
    if out != base and base not in out.parents:
        v = sc.entries.get("output")
        raise ConfigError(f"output {sc.output!r} leaves the output root", v.line if v else 0, 1)
    return out


# scenario handlers ------------------------------------------------------------

def _grid(sc: Scenario):
    try:
        return build_reference_domain(sc.number("grid.L", 1.0), sc.number("grid.h", 0.5),
                                      sc.integer("grid.Nx", 16), sc.integer("grid.Ny", 16))
    except GridError as exc:
        v = sc.entries.get("grid.Nx") or sc.entries.get("grid.L")
        raise ConfigError(str(exc), v.line if v else 0, 1) from None


def _time(sc: Scenario) -> tuple[float, int]:
    return sc.number("time.dt", 0.01), sc.integer("time.nsteps", 1)


def _stokes_problem(sc: Scenario, grid, with_pressure: bool = True):
    from .stokes import StokesParams, StokesProblem

    dt, ns = _time(sc)
    params = StokesParams(*(sc.number(f"params.{k}", 1.0) for k in ("rho_f", "rho_s", "mu_f", "mu_s")))
    d = sc.datum
    return StokesProblem(
        grid, params,
        f_u=(d("fx"), d("fy")), f_d=d("fd") if with_pressure else None,
        g1=(d("g1x"), d("g1y")), g2=(d("g2x"), d("g2y")), g3=d("g3"), g4=d("g4"),
        g5=(d("g5x"), d("g5y")), u0=(d("u0x"), d("u0y")),
        dt=dt, nsteps=ns, orientation=sc.integer("params.orientation", -1),
    )


def _velocity_rows(grid, sol, with_pressure: bool):
    from .coupling import cell_velocity

    n = sol.nt - 1
    v = cell_velocity(sol.ux[n], sol.uy[n], sol.uy_sigma_s[n], grid)
    rows = []
    for i in range(grid.Nx):
        for j in range(grid.Ny):
            r = [i, j, grid.xc[i], grid.yc[j], v[i, j, 0], v[i, j, 1]]
            if with_pressure:
                r.append(sol.p[n, i, j])
            rows.append(r)
    header = ["i", "j", "x", "y", "ux", "uy"] + (["p"] if with_pressure else [])
    return header, rows


def run_two_phase_stokes(sc: Scenario, out: Outputs) -> None:
    from .stokes import solve_two_phase

    grid = _grid(sc)
    problem = _stokes_problem(sc, grid)
    sol = solve_two_phase(problem, check=sc.flag("solver.check", True))
    out.write("fields.csv", csv_text(*_velocity_rows(grid, sol, True)))
    rows = [[n, sol.times[n], float(np.abs(sol.divergence(n)).max())] for n in range(sol.nt)]
    out.write("divergence.csv", csv_text(["n", "t", "max_abs_div"], rows))


def run_parabolic(sc: Scenario, out: Outputs) -> None:
    from .heat import solve_parabolic_transmission

    grid = _grid(sc)
    sol = solve_parabolic_transmission(_stokes_problem(sc, grid, False), check=sc.flag("solver.check", True))
    out.write("fields.csv", csv_text(*_velocity_rows(grid, sol, False)))


def _heat_problem(sc: Scenario, grid, D_key: str = "params.D"):
    from .heat import HeatProblem

    dt, ns = _time(sc)
    flux = {}
    for seg in ("left", "right", "sigma", "top"):
        d = sc.datum(f"flux_{seg}")
        if d is not None:
            flux[seg] = d
    return HeatProblem(grid, sc.number(D_key, 1.0), sc.datum("f"), flux, sc.datum("c0"), dt, ns)


def run_heat(sc: Scenario, out: Outputs, region: str) -> None:
    from .heat import solve_heat_neumann

    grid = _grid(sc)
    sol = solve_heat_neumann(_heat_problem(sc, grid), region, check=sc.flag("solver.check", True))
    rows_ = sol.rows
    c = sol.c[-1]
    rows = [[i, j, grid.xc[i], grid.yc[rows_.start + j], c[i, j]] for i in range(grid.Nx) for j in range(c.shape[1])]
    out.write("concentration.csv", csv_text(["i", "j", "x", "y", "c"], rows))
    out.write("mass.csv", csv_text(["n", "t", "mass"], [[n, sol.times[n], sol.mass(n)] for n in range(len(sol.times))]))


def run_coupled(sc: Scenario, out: Outputs) -> None:
    from .heat import HeatProblem, solve_coupled_concentrations

    grid = _grid(sc)
    dt, ns = _time(sc)
    f, c0 = sc.datum("f"), sc.datum("c0")
    fluid = HeatProblem(grid, sc.number("params.D_f", 1.0), f, {}, c0, dt, ns)
    solid = HeatProblem(grid, sc.number("params.D_s", 1.0), f, {}, c0, dt, ns)
    sol = solve_coupled_concentrations(fluid, solid, sc.number("params.zeta", 1.0),
                                       (sc.datum("F2_f"), sc.datum("F2_s")))
    rows = [[n, sol.fluid.times[n], sol.fluid.mass(n), sol.solid.mass(n), sol.total_mass(n)] for n in range(ns + 1)]
    out.write("mass.csv", csv_text(["n", "t", "mass_fluid", "mass_solid", "mass_total"], rows))
    out.write("interface.csv", csv_text(["i", "x", "jump"], [[i, grid.xc[i], sol.jump[-1, i]] for i in range(grid.Nx)]))


def _elliptic_problem(sc: Scenario, grid):
    from .elliptic import EllipticProblem

    d = sc.datum
    return EllipticProblem(
        grid, sc.number("params.lambda", 1.0), (sc.number("params.rho_f", 1.0), sc.number("params.rho_s", 1.0)),
        d("f"), d("g1"), d("g2"), d("g3"), d("g4"), orientation=sc.integer("params.orientation", -1),
    )


def _phi_rows(grid, phi):
    return [[i, j, grid.xc[i], grid.yc[j], phi[i, j]] for i in range(grid.Nx) for j in range(grid.Ny)]


def run_elliptic(sc: Scenario, out: Outputs) -> None:
    from .elliptic import solve_elliptic_transmission

    grid = _grid(sc)
    sol = solve_elliptic_transmission(_elliptic_problem(sc, grid), check=sc.flag("solver.check", True))
    out.write("phi.csv", csv_text(["i", "j", "x", "y", "phi"], _phi_rows(grid, sol.phi)))


def run_laplace(sc: Scenario, out: Outputs) -> None:
    from .elliptic import solve_laplace_transmission

    grid = _grid(sc)
    sol = solve_laplace_transmission(grid, sc.datum("f"), (sc.number("params.rho_f", 1.0), sc.number("params.rho_s", 1.0)))
    out.write("phi.csv", csv_text(["i", "j", "x", "y", "phi"], _phi_rows(grid, sol.phi)))


def run_model_problem(sc: Scenario, out: Outputs) -> None:
    from .model_problems import REFLECTION_KINDS, verify_reflection_symmetry

    kind = sc.text("model.kind", choices=REFLECTION_KINDS)
    levels = tuple(int(v) for v in sc.literal("model.levels", [16, 32, 64]))
    rep = verify_reflection_symmetry(kind, levels=levels, T=sc.number("model.T", 0.1),
                                     nsteps=sc.integer("model.nsteps", 5), min_order=sc.number("model.min_order", 0.9))
    out.write("report.csv", rep.to_csv())
    names = sorted(rep.table)
    rows = [[lvl] + [rep.table[k][i] for k in names] for i, lvl in enumerate(rep.levels)]
    out.write("levels.csv", csv_text(["N"] + names, rows))
    if not rep.passed:
        raise OracleFailure(f"reflection oracle failed: {rep.failed()}")


def run_neumann_sweep(sc: Scenario, out: Outputs) -> None:
    from .model_problems import contraction_sweep, interface_demo_problem, quarter_demo_problem, sweep_csv

    family = sc.text("sweep.family", "interface", ("interface", "quarter"))
    N = sc.integer("sweep.N", 64)
    T, ns = sc.number("sweep.T", 0.1), sc.integer("sweep.nsteps", 10)
    if family == "interface":
        problem = interface_demo_problem(N, T, ns, sc.number("sweep.mu_s", 10.0))
    else:
        problem = quarter_demo_problem(N, T, ns)
    etas = [float(e) for e in sc.literal("sweep.etas", [0.01, 0.02, 0.04, 0.08, 0.16, 0.5])]
    rows = contraction_sweep(etas, problem, k=sc.number("sweep.k", 2 * np.pi), kind=family,
                             tol=sc.number("sweep.tol", 1e-8), max_iter=sc.integer("sweep.max_iter", 60))
    out.write("sweep.csv", sweep_csv(rows, f"{N}x{N}"))
    summary = [[r.eta, int(r.converged), int(r.diverged), r.iterations, r.mean_ratio, r.max_ratio] for r in rows]
    out.write("sweep_summary.csv",
              csv_text(["eta", "converged", "diverged", "iterations", "mean_ratio", "max_ratio"], summary))


def _coupling_params(sc: Scenario):
    from .coupling import CouplingParams

    kw = {}
    for f_ in fields(CouplingParams):
        key = f"params.{f_.name}"
        if sc.has(key):
            kw[f_.name] = sc.integer(key) if f_.name == "n" else sc.number(key)
    return CouplingParams(**kw)


def run_picard(sc: Scenario, out: Outputs) -> None:
    from .coupling import PicardDivergence, picard_solve, small_initial_data

    grid = _grid(sc)
    params = _coupling_params(sc)
    v0, c0 = small_initial_data(grid, sc.number("picard.amplitude", 1e-2), sc.number("picard.c0", 1e-2))
    try:
        res = picard_solve(grid, v0, c0, sc.number("picard.T", 0.1), params, nsteps=sc.integer("picard.nsteps", 10),
                           tol=sc.number("picard.tol", 1e-8), max_iter=sc.integer("picard.max_iter", 30))
    except PicardDivergence as exc:
        out.write("picard_history.csv", exc.history.to_csv())
        raise
    out.write("picard_history.csv", res.history.to_csv())
    w = res.trajectory
    js = grid.js
    rows = [[n, w.times[n], float(np.abs(w.c[n]).max()), float(w.g[n][:, js:].max()),
             float(w.c_star[n][:, js:].max())] for n in range(w.nt)]
    out.write("picard_trajectory.csv", csv_text(["n", "t", "max_c", "max_g", "max_c_star"], rows))


def run_compat_check(sc: Scenario, out: Outputs) -> None:
    from . import norms_compat as nc

    target = sc.text("check.target", choices=COMPAT_TARGETS)
    grid = _grid(sc)
    if target == "stokes":
        rep = nc.check_stokes_compatibility(_stokes_problem(sc, grid))
    elif target == "parabolic":
        rep = nc.check_parabolic_transmission(_stokes_problem(sc, grid, False))
    elif target == "elliptic":
        rep = nc.check_elliptic_compatibility(_elliptic_problem(sc, grid))
    elif target in ("heat_fluid", "heat_solid"):
        rep = nc.check_heat_compatibility(_heat_problem(sc, grid), target.split("_")[1])
    else:
        rep = nc.check_nonlinear_initial((sc.datum("u0x"), sc.datum("u0y")), sc.datum("c0"),
                                         _coupling_params(sc), grid)
    out.write("report.csv", rep.to_csv())
    if not rep.passed:
        raise CompatibilityError(rep)


def run_convergence_study(sc: Scenario, out: Outputs) -> None:
    from .studies import STUDIES, run_study

    name = sc.text("study.name", choices=tuple(sorted(STUDIES)))
    levels = sc.literal("study.levels", []) or None
    if levels is not None:
        try:
            levels = [(int(a), int(b), float(c)) for a, b, c in levels]
        except (TypeError, ValueError):
            v = sc.entries["study.levels"]
            raise ConfigError("study.levels must be a list of (Nx, Ny, dt)", v.line, v.column + 1) from None
        if len(levels) < 3:
            v = sc.entries["study.levels"]
            raise ConfigError("a convergence study needs at least 3 levels", v.line, v.column + 1)
    tab = run_study(name, levels)
    out.write("convergence.csv", tab.to_csv())
    out.write("order.csv", csv_text(["study", "refine", "observed_order"], [[name, tab.refine, tab.observed_order]]))


HANDLERS: dict[str, Callable[[Scenario, Outputs], None]] = {
    "two_phase_stokes": run_two_phase_stokes,
    "parabolic_transmission": run_parabolic,
    "heat_fluid": lambda sc, out: run_heat(sc, out, "fluid"),
    "heat_solid": lambda sc, out: run_heat(sc, out, "solid"),
    "coupled_concentration": run_coupled,
    "elliptic": run_elliptic,
    "laplace": run_laplace,
    "model_problem": run_model_problem,
    "neumann_sweep": run_neumann_sweep,
    "picard": run_picard,
    "compat_check": run_compat_check,
    "convergence_study": run_convergence_study,
}


@dataclass
class RunResult:
    status: int
    message: str
    directory: Path | None = None


def _solver_errors() -> tuple[type[BaseException], ...]:
    from .coupling import KinematicsError, PicardDivergence
    from .elliptic import IndefiniteError
    from .mac import SingularSystemError, SolverError
    from .model_problems import NeumannDivergence

    return (SolverError, SingularSystemError, IndefiniteError, NeumannDivergence, PicardDivergence,
            KinematicsError, OracleFailure, np.linalg.LinAlgError, FloatingPointError, RuntimeError)


def run_scenario(text: str, root: str | os.PathLike | None = None, only: tuple[str, ...] | None = None) -> RunResult:
    """Parse, run and record one scenario; never raises for expected failures."""
    try:
        sc = parse_config(text)
        if only is not None and sc.kind not in only:
            raise ConfigError(f"kind {sc.kind!r} is not valid here; expected {list(only)}",
                              sc.entries["kind"].line, 1)
        directory = output_dir(sc, root)
    except ConfigError as exc:
        return RunResult(2, f"config error: {exc}")
    out = Outputs(directory)
    out.write("scenario.txt", sc.normalized())
    np.random.seed(sc.seed)
    try:
        HANDLERS[sc.kind](sc, out)
        result = RunResult(0, f"{sc.kind}: ok", directory)
    except ConfigError as exc:
        result = RunResult(2, f"config error: {exc}", directory)
    except CompatibilityError as exc:
        path = out.write("compat_report.csv", exc.report.to_csv())
        result = RunResult(3, f"compatibility refusal, failed {exc.report.failed()}; report: {path}", directory)
    except _solver_errors() as exc:
        out.write("diagnostics.txt", f"{type(exc).__name__}: {exc}\n")
        result = RunResult(4, f"solver failure: {type(exc).__name__}: {exc}", directory)
    out.manifest()
    return result


# reports -----------------------------------------------------------------------

SUMMARY_FILES = ("summary.txt", "summary.csv")


def emit_report(directory: str | os.PathLike) -> tuple[Path, Path]:
    """One plain-text and one CSV summary of every CSV under `directory`, in path order."""
    base = Path(directory)
    if not base.is_dir():
        raise FileNotFoundError(f"no such directory: {base}")
    sources = sorted(p for p in base.rglob("*.csv") if p.name not in SUMMARY_FILES and p.name != "manifest.csv")
    if not sources:
        raise FileNotFoundError(f"no result CSVs under {base}")
    text = []
    rows = []
    for p in sources:
        rel = p.relative_to(base).as_posix()
        content = p.read_text()
        text.append(f"== {rel} ==\n{content}")
        reader = csv.DictReader(io.StringIO(content))
        if reader.fieldnames and "pass" in reader.fieldnames:
            for rec in reader:
                rows.append([rel, rec.get("name", ""), "pass" if rec["pass"] == "1" else "fail"])
        else:
            rows.append([rel, "", "data"])
    txt = base / "summary.txt"
    txt.write_text("\n".join(text))
    tab = base / "summary.csv"
    tab.write_text(csv_text(["source", "name", "status"], rows))
    return txt, tab


# entry point ------------------------------------------------------------------

def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="growthfsi", description=__doc__.split("\n\n")[0].strip())
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in ("run", "study"):
        p = sub.add_parser(verb)
        p.add_argument("config")
        p.add_argument("--output-root", default=None)
    p = sub.add_parser("report")
    p.add_argument("directory")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    if args.verb == "report":
        try:
            txt, tab = emit_report(args.directory)
        except FileNotFoundError as exc:
            print(exc, file=sys.stderr)
            return 2
        print(f"wrote {txt} and {tab}")
        return 0
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    only = ("convergence_study",) if args.verb == "study" else None
    res = run_scenario(text, args.output_root, only)
    print(res.message, file=sys.stdout if res.status == 0 else sys.stderr)
    return res.status
