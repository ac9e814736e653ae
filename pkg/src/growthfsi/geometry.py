"""
Reference domain and staggered grid.

The domain is the rectangle [0, L] x [0, 1]. The fluid occupies y < h and the
solid ring occupies h < y < 1. The interface Sigma is the horizontal face row
y = h, the outflow ends G are x = 0 and x = L, the wall S is y = 1, and y = 0
is a symmetry axis.

Layout (MAC):
    cells    (x_{i+1/2}, y_{j+1/2})   shape (Nx, Ny)      pressure, concentration
    x-faces  (x_i, y_{j+1/2})         shape (Nx+1, Ny)    u_x
    y-faces  (x_{i+1/2}, y_j)         shape (Nx, Ny+1)    u_y
    nodes    (x_i, y_j)               shape (Nx+1, Ny+1)  shear, partition weights
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

logger = logging.getLogger(__name__)

Location = Literal["cell", "xface", "yface", "node"]


class GridError(ValueError):
    """Raised for grids that cannot be built as requested."""


class Tag(enum.IntEnum):
    FLUID_INTERIOR = 0
    SOLID_INTERIOR = 1
    G_F = 2
    G_S = 3
    S = 4
    SIGMA = 5
    AXIS = 6
    CONTACT_SIGMA = 7
    CONTACT_S = 8


@dataclass(frozen=True)
class ReferenceGrid:
    L: float
    h: float
    Nx: int
    Ny: int
    dx: float = field(init=False)
    dy: float = field(init=False)
    js: int = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "dx", self.L / self.Nx)
        object.__setattr__(self, "dy", 1.0 / self.Ny)
        object.__setattr__(self, "js", int(round(self.h * self.Ny)))

    # coordinates -----------------------------------------------------------
    @property
    def xn(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.Nx + 1)

    @property
    def yn(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.Ny + 1)

    @property
    def xc(self) -> np.ndarray:
        return (np.arange(self.Nx) + 0.5) * self.dx

    @property
    def yc(self) -> np.ndarray:
        return (np.arange(self.Ny) + 0.5) * self.dy

    def coords(self, location: Location) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid (indexing='ij') of the sample points of a location."""
        xs = {"cell": self.xc, "xface": self.xn, "yface": self.xc, "node": self.xn}[location]
        ys = {"cell": self.yc, "xface": self.yc, "yface": self.yn, "node": self.yn}[location]
        return np.meshgrid(xs, ys, indexing="ij")

    def shape(self, location: Location) -> tuple[int, int]:
        return {
            "cell": (self.Nx, self.Ny),
            "xface": (self.Nx + 1, self.Ny),
            "yface": (self.Nx, self.Ny + 1),
            "node": (self.Nx + 1, self.Ny + 1),
        }[location]

    @property
    def fluid_cells(self) -> np.ndarray:
        mask = np.zeros((self.Nx, self.Ny), dtype=bool)
        mask[:, : self.js] = True
        return mask

    @property
    def solid_cells(self) -> np.ndarray:
        return ~self.fluid_cells

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy

    # tags ------------------------------------------------------------------
    @property
    def xface_tags(self) -> np.ndarray:
        tags = np.full((self.Nx + 1, self.Ny), Tag.FLUID_INTERIOR, dtype=int)
        tags[:, self.js :] = Tag.SOLID_INTERIOR
        for i in (0, self.Nx):
            tags[i, : self.js] = Tag.G_F
            tags[i, self.js :] = Tag.G_S
        return tags

    @property
    def yface_tags(self) -> np.ndarray:
        tags = np.full((self.Nx, self.Ny + 1), Tag.FLUID_INTERIOR, dtype=int)
        tags[:, self.js + 1 :] = Tag.SOLID_INTERIOR
        tags[:, 0] = Tag.AXIS
        tags[:, self.Ny] = Tag.S
        tags[:, self.js] = Tag.SIGMA
        return tags

    @property
    def contact_points(self) -> dict[Tag, list[tuple[int, int]]]:
        """Node indices of the contact points, keyed by contact tag."""
        return {
            Tag.CONTACT_SIGMA: [(0, self.js), (self.Nx, self.js)],
            Tag.CONTACT_S: [(0, self.Ny), (self.Nx, self.Ny)],
        }

    def tag_counts(self) -> dict[Tag, int]:
        counts = {t: 0 for t in Tag}
        for arr in (self.xface_tags, self.yface_tags):
            vals, n = np.unique(arr, return_counts=True)
            for v, c in zip(vals, n):
                counts[Tag(int(v))] += int(c)
        for tag, pts in self.contact_points.items():
            counts[tag] = len(pts)
        return counts

    # serialization ---------------------------------------------------------
    def to_text(self) -> str:
        return f"L = {self.L!r}\nh = {self.h!r}\nNx = {self.Nx}\nNy = {self.Ny}\n"

    @classmethod
    def from_text(cls, text: str) -> ReferenceGrid:
        values: dict[str, str] = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
        missing = {"L", "h", "Nx", "Ny"} - values.keys()
        if missing:
            raise GridError(f"grid description lacks {sorted(missing)}")
        return build_reference_domain(
            float(values["L"]), float(values["h"]), int(values["Nx"]), int(values["Ny"])
        )


def build_reference_domain(L: float, h: float, Nx: int, Ny: int) -> ReferenceGrid:
    """Build the tagged reference grid; h must sit on a face row."""
    if not (L > 0) or not math.isfinite(L):
        raise GridError(f"L must be positive, got {L}")
    if not (0.0 < h < 1.0):
        raise GridError(f"h must lie in (0, 1), got {h}")
    if Nx < 8 or Ny < 8:
        raise GridError(f"need Nx, Ny >= 8, got ({Nx}, {Ny})")
    rows = h * Ny
    k = int(round(rows))
    if abs(rows - k) > 1e-9 * max(1.0, rows) or k in (0, Ny):
        k = min(max(k, 1), Ny - 1)
        raise GridError(
            f"h={h} is not a multiple of dy={1.0 / Ny}; nearest admissible h is {k / Ny}"
        )
    return ReferenceGrid(float(L), k / Ny, int(Nx), int(Ny))


@dataclass(frozen=True)
class GridField:
    grid: ReferenceGrid
    values: np.ndarray
    location: Location = "cell"

    def __post_init__(self) -> None:
        if self.values.shape != self.grid.shape(self.location):
            raise GridError(
                f"{self.location} field must have shape {self.grid.shape(self.location)}, "
                f"got {self.values.shape}"
            )

    def to_csv(self) -> str:
        X, Y = self.grid.coords(self.location)
        lines = ["x,y,value"]
        for x, y, v in zip(X.ravel(), Y.ravel(), self.values.ravel()):
            lines.append(f"{x:.12e},{y:.12e},{v:.12e}")
        return "\n".join(lines) + "\n"


def _extrap(near: np.ndarray, far: np.ndarray) -> np.ndarray:
    # linear extrapolation from samples at half and 3/2 spacing, second order
    return 1.5 * near - 0.5 * far


def extract_trace(
    fld: GridField,
    segment: str,
    side: Literal["below", "above"] = "below",
    end: Literal["left", "right"] = "left",
) -> tuple[np.ndarray, np.ndarray]:
    """Trace of a grid field on a boundary or interface segment.

    Returns (arclength, values). Segments: 'Sigma', 'S', 'Axis', 'G_f', 'G_s'.
    Sigma traces are one-sided; `side` picks the fluid ('below') or solid
    ('above') limit. G segments use `end` to pick x=0 or x=L.
    """
    g, v, loc = fld.grid, fld.values, fld.location
    js, Ny = g.js, g.Ny

    if segment in ("Sigma", "S", "Axis"):
        row = {"Sigma": js, "S": Ny, "Axis": 0}[segment]
        s = g.xn if loc in ("xface", "node") else g.xc
        if loc in ("yface", "node"):
            return s, v[:, row].copy()
        # cell-centred in y: extrapolate from the side that owns the data
        if segment == "S" or (segment == "Sigma" and side == "below"):
            if segment == "Sigma":
                return s, _extrap(v[:, js - 1], v[:, js - 2])
            return s, _extrap(v[:, Ny - 1], v[:, Ny - 2])
        if segment == "Sigma":
            return s, _extrap(v[:, js], v[:, js + 1])
        return s, _extrap(v[:, 0], v[:, 1])

    if segment in ("G_f", "G_s"):
        rows = slice(0, js) if segment == "G_f" else slice(js, Ny)
        ys = g.yc if loc in ("cell", "xface") else g.yn
        if loc in ("yface", "node"):
            rows = slice(0, js + 1) if segment == "G_f" else slice(js, Ny + 1)
        y0 = 0.0 if segment == "G_f" else g.h
        s = ys[rows] - y0
        if loc in ("xface", "node"):
            col = v[0] if end == "left" else v[-1]
            return s, col[rows].copy()
        if end == "left":
            return s, _extrap(v[0], v[1])[rows]
        return s, _extrap(v[-1], v[-2])[rows]

    raise GridError(f"unknown or empty segment {segment!r}")


# partition of unity ---------------------------------------------------------

def smoothstep(s: np.ndarray, m: int) -> np.ndarray:
    """Polynomial of degree 2m+1 rising from 0 to 1 with m flat derivatives at both ends."""
    s = np.clip(s, 0.0, 1.0)
    out = np.zeros_like(s, dtype=float)
    for k in range(m + 1):
        out += math.comb(m + k, k) * math.comb(2 * m + 1, m - k) * (-1) ** k * s ** (m + k + 1)
    return out


@dataclass(frozen=True)
class Patch:
    center: tuple[float, float]
    radius: float
    weight: np.ndarray  # on nodes


@dataclass(frozen=True)
class PartitionOfUnity:
    grid: ReferenceGrid
    patches: list[Patch]

    def total(self) -> np.ndarray:
        return np.sum([p.weight for p in self.patches], axis=0)


def _bump(grid: ReferenceGrid, center: tuple[float, float], radius: float, m: int) -> np.ndarray:
    X, Y = grid.coords("node")
    d = np.hypot(X - center[0], Y - center[1])
    return smoothstep(1.0 - d / radius, m)


def partition_of_unity(grid: ReferenceGrid, radius: float, smoothness: int) -> PartitionOfUnity:
    """Normalized bump partition of unity on the grid nodes.

    Each contact point gets a patch of radius 2r whose weight is identically
    one within 0.2r of the point, so every normal derivative vanishes there.
    The rest of the domain is covered by a lattice of radius-r patches.
    """
    if smoothness < 1:
        raise ValueError("smoothness m must be >= 1")
    if radius <= 0:
        raise ValueError("radius must be positive")
    diameter = math.hypot(grid.L, 1.0)
    if radius >= diameter:
        ones = np.ones(grid.shape("node"))
        return PartitionOfUnity(grid, [Patch((grid.L / 2, 0.5), radius, ones)])
    if 0.2 * radius < max(grid.dx, grid.dy):
        raise ValueError(
            f"radius {radius} too small for the grid: need radius >= 5*max(dx, dy)"
        )

    contacts = [(0.0, grid.h), (grid.L, grid.h), (0.0, 1.0), (grid.L, 1.0)]
    centers: list[tuple[tuple[float, float], float]] = [(c, 2.0 * radius) for c in contacts]
    nx = max(1, math.ceil(grid.L / radius))
    ny = max(1, math.ceil(1.0 / radius))
    for a in np.linspace(0.0, grid.L, nx + 1):
        for b in np.linspace(0.0, 1.0, ny + 1):
            if min(math.hypot(a - cx, b - cy) for cx, cy in contacts) < 1.2 * radius:
                continue
            centers.append(((float(a), float(b)), radius))

    for k, (c, r) in enumerate(centers):
        # contact patches must also stay clear of each other's flat zone
        reach = r + 0.2 * radius if k < len(contacts) else r
        if abs(c[1] - grid.h) < reach and abs(c[1] - 1.0) < reach:
            raise ValueError(
                f"patch {k} at {c} with radius {r} meets both Sigma and S; reduce radius"
            )

    raw = [_bump(grid, c, r, smoothness) for c, r in centers]
    total = np.sum(raw, axis=0)
    if np.any(total <= 0):
        raise ValueError("patches fail to cover the domain")
    patches = [Patch(c, r, w / total) for (c, r), w in zip(centers, raw)]
    return PartitionOfUnity(grid, patches)
