"""Radial discretization of the exterior of the unit ball in R^N."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy.integrate import trapezoid

MIN_NODES = 16


class Nonlinearity(str, enum.Enum):
    SIGNED = "signed"      # |u|^(p-1) u
    UNSIGNED = "unsigned"  # |u|^p
    NONE = "none"


@dataclass(frozen=True)
class ModelParams:
    dim: int = 3
    v0: float = 3.0
    p: float = 2.0
    nonlinearity: Nonlinearity = Nonlinearity.SIGNED
    r0: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "nonlinearity", Nonlinearity(self.nonlinearity))
        if int(self.dim) != self.dim or self.dim < 3:
            raise ValueError(f"dim must be an integer >= 3, got {self.dim}")
        if not self.v0 > 0:
            raise ValueError(f"v0 must be positive, got {self.v0}")
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if not self.r0 >= 1:
            raise ValueError(f"r0 must be >= 1, got {self.r0}")

    def f(self, u: np.ndarray) -> np.ndarray:
        if self.nonlinearity is Nonlinearity.SIGNED:
            return np.abs(u) ** (self.p - 1) * u
        if self.nonlinearity is Nonlinearity.UNSIGNED:
            return np.abs(u) ** self.p
        return np.zeros_like(u)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    r_max: float
    n: int
    r_min: float = 1.0
    nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.r_max > self.r_min:
            raise ValueError(f"r_max must exceed r_min={self.r_min}, got {self.r_max}")
        if self.n < MIN_NODES:
            raise ValueError(f"need at least {MIN_NODES} nodes, got {self.n}")
        nodes = np.linspace(self.r_min, self.r_max, self.n)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def h(self) -> float:
        return (self.r_max - self.r_min) / (self.n - 1)

    @property
    def r(self) -> np.ndarray:
        return self.nodes

    def field(self, values, dirichlet: bool = False) -> "RadialField":
        if callable(values):
            values = values(self.nodes)
        return RadialField(self, values, dirichlet=dirichlet)

    def zeros(self, dirichlet: bool = True) -> "RadialField":
        return RadialField(self, np.zeros(self.n), dirichlet=dirichlet)

    def refine(self) -> "RadialGrid":
        """Grid with spacing halved on the same interval."""
        return RadialGrid(self.r_max, 2 * self.n - 1, self.r_min)


@dataclass(frozen=True, eq=False)
class RadialField:
    grid: RadialGrid
    values: np.ndarray
    dirichlet: bool = False

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        if self.dirichlet:
            v[0] = 0.0
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def with_values(self, values) -> "RadialField":
        return RadialField(self.grid, values, dirichlet=self.dirichlet)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["r", "value"])
        for r, v in zip(self.grid.nodes, self.values):
            writer.writerow([f"{r:.17g}", f"{v:.17g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, dirichlet: bool = False) -> "RadialField":
        rows = list(csv.DictReader(io.StringIO(text)))
        r = np.array([float(row["r"]) for row in rows])
        grid = RadialGrid(r[-1], len(r), r[0])
        if not np.allclose(grid.nodes, r, rtol=0, atol=1e-12 * r[-1]):
            raise ValueError("CSV nodes are not a uniform grid")
        return cls(grid, [float(row["value"]) for row in rows], dirichlet=dirichlet)


def build_grid(r_max: float, n: int) -> RadialGrid:
    """Uniform grid on [1, r_max] with ``n`` nodes."""
    return RadialGrid(float(r_max), int(n))


def grid_for_horizon(r0: float, t_end: float, h: float, margin_cells: int = 5) -> RadialGrid:
    """Smallest uniform grid of spacing ~h whose outer edge is causally
    invisible up to ``t_end`` for data supported in r <= r0."""
    r_max = r0 + t_end + (margin_cells + 1) * h
    n = int(math.ceil((r_max - 1.0) / h)) + 1
    return RadialGrid(1.0 + (n - 1) * h, max(n, MIN_NODES))


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, RadialField) else np.asarray(f, dtype=float)


def derivative_values(v: np.ndarray, h: float) -> np.ndarray:
    return np.gradient(v, h, edge_order=2)


def second_derivative_values(v: np.ndarray, h: float) -> np.ndarray:
    d2 = np.empty_like(v)
    d2[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h**2
    # one-sided, exact on cubics
    d2[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h**2
    d2[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / h**2
    return d2


def laplacian_values(v: np.ndarray, r: np.ndarray, h: float, dim: int) -> np.ndarray:
    return second_derivative_values(v, h) + (dim - 1) / r * derivative_values(v, h)


def radial_derivative(f: RadialField) -> RadialField:
    """d/dr by second-order differences (centered inside, one-sided at ends)."""
    return RadialField(f.grid, derivative_values(f.values, f.grid.h))


def radial_laplacian(f: RadialField, dim: int) -> RadialField:
    """f'' + (dim - 1)/r f' for a radial function."""
    return RadialField(f.grid, laplacian_values(f.values, f.grid.nodes, f.grid.h, dim))


def sphere_area(dim: int) -> float:
    """Surface area of the unit sphere in R^dim."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    return 2.0 * math.pi ** (dim / 2) / math.gamma(dim / 2)


Weight = Union[Callable[[np.ndarray], np.ndarray], np.ndarray, float, None]


def weighted_integral(f, weight: Weight, dim: int, grid: RadialGrid | None = None) -> float:
    """Integral over {1 <= |x| <= r_max} in R^dim of f(|x|) * weight(|x|).

    ``f`` is a RadialField (or an array on ``grid``); ``weight`` a callable
    of r, an array of node values, a scalar, or None for 1.
    """
    if grid is None:
        grid = f.grid
    r = grid.nodes
    vals = _values(f)
    if weight is None:
        w = 1.0
    elif callable(weight):
        w = np.asarray(weight(r), dtype=float)
    else:
        w = np.asarray(weight, dtype=float)
    if not np.all(np.isfinite(w)):
        raise ValueError("weight has non-finite samples on the grid")
    return sphere_area(dim) * float(trapezoid(vals * w * r ** (dim - 1), dx=grid.h))
