"""Weighted energy functionals and numerical checkers for the weighted
Hardy, Gagliardo-Nirenberg and Caffarelli-Kohn-Nirenberg type inequalities.

All integrals are over the radial grid, ``dx`` being the N-dimensional
volume element.  Inequality checkers return ``(lhs, rhs)`` and never
assert; callers decide on tolerances.
"""

from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass
from functools import lru_cache

import numpy as np

from .domain import (
    ModelParams,
    RadialField,
    RadialGrid,
    derivative_values,
    laplacian_values,
    weighted_integral,
)
from .specfun import phi_field_array


@dataclass(frozen=True)
class WaveState:
    w: RadialField
    wdot: RadialField
    t: float = 0.0

    def __post_init__(self):
        if self.w.grid is not self.wdot.grid:
            raise ValueError("w and wdot must share one grid")
        if self.t < 0:
            raise ValueError("time must be non-negative")
        if self.w.values[0] != 0.0:
            raise ValueError("w must vanish on the obstacle boundary")

    @property
    def grid(self) -> RadialGrid:
        return self.w.grid

    @classmethod
    def from_arrays(cls, grid: RadialGrid, w, wdot, t: float = 0.0) -> "WaveState":
        return cls(RadialField(grid, w, dirichlet=True),
                   RadialField(grid, wdot, dirichlet=True), t)


@dataclass(frozen=True)
class EnergySample:
    t: float
    e0: float
    e_psi_m: float
    e_psi_m1: float
    e_sharp: float
    e_star: float
    e_tilde: float


ENERGY_CSV_HEADER = ("t", "E0", "Epsi_m", "Epsi_m1", "Esharp", "Estar", "Etilde")


def energy_csv(samples) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ENERGY_CSV_HEADER)
    for s in samples:
        writer.writerow([f"{x:.17g}" for x in astuple(s)])
    return buf.getvalue()


def read_energy_csv(text: str) -> list[EnergySample]:
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader))
    if header != ENERGY_CSV_HEADER:
        raise ValueError(f"unexpected energy CSV header {header}")
    return [EnergySample(*map(float, row)) for row in reader if row]


def _grad(w: RadialField) -> np.ndarray:
    return derivative_values(w.values, w.grid.h)


def _kinetic_plus_gradient(s: WaveState) -> np.ndarray:
    return _grad(s.w) ** 2 + s.wdot.values ** 2


def energy_psi(s: WaveState, m: float, dim: int) -> float:
    """E_m^Psi: (|w_r|^2 + w_t^2) weighted by (1 + t + r)^m."""
    if m < 0:
        raise ValueError(f"weight exponent must be non-negative, got {m}")
    r = s.grid.nodes
    return weighted_integral(_kinetic_plus_gradient(s), (1.0 + s.t + r) ** m, dim, s.grid)


def energy_x(s: WaveState, exponent: float, dim: int) -> float:
    """(|w_r|^2 + w_t^2) weighted by r^exponent."""
    r = s.grid.nodes
    return weighted_integral(_kinetic_plus_gradient(s), r**exponent, dim, s.grid)


def energy_plain(s: WaveState, dim: int) -> float:
    return weighted_integral(_kinetic_plus_gradient(s), None, dim, s.grid)


def _w2_moment(w: RadialField, exponent: float, dim: int) -> float:
    return weighted_integral(w.values**2, w.r**exponent, dim, w.grid)


def energy_tilde(s: WaveState, mu: float, dim: int) -> float:
    if mu < 2 - dim:
        raise ValueError(f"mu must be at least 2 - N = {2 - dim}, got {mu}")
    coef = (mu + 1) * (dim - 2 + mu) / 2
    return energy_x(s, mu + 1, dim) - coef * _w2_moment(s.w, mu - 1, dim)


def energy_star(s: WaveState, mu: float, params: ModelParams) -> float:
    r = s.grid.nodes
    w, wd = s.w.values, s.wdot.values
    integrand = (2 * w * wd + params.v0 / r * w**2) * r**mu
    return weighted_integral(integrand, None, params.dim, s.grid)


def energy_sharp(s: WaveState, mu: float, params: ModelParams) -> float:
    return energy_tilde(s, mu, params.dim) + params.v0 / 2 * energy_star(s, mu, params)


def energy_sample(s: WaveState, params: ModelParams, m: float, mu: float | None = None) -> EnergySample:
    """All tracked functionals for one state; ``mu`` defaults to ``m``."""
    mu = m if mu is None else mu
    dim = params.dim
    return EnergySample(
        t=s.t,
        e0=energy_plain(s, dim),
        e_psi_m=energy_psi(s, m, dim),
        e_psi_m1=energy_psi(s, m + 1, dim),
        e_sharp=energy_sharp(s, mu, params),
        e_star=energy_star(s, mu, params),
        e_tilde=energy_tilde(s, mu, dim),
    )


def weighted_gradient(w: RadialField, mu: float, dim: int) -> RadialField:
    """Radial part of grad w + ((N - 2 + mu)/2) x/|x|^2 w."""
    vals = _grad(w) + (dim - 2 + mu) / 2 * w.values / w.r
    return RadialField(w.grid, vals)


# Time-derivative identities along solutions of the damped wave problem.

def estar_rate(s: WaveState, mu: float, params: ModelParams, forcing=None) -> float:
    """Exact d/dt E*_mu for a solution with source ``forcing``."""
    dim = params.dim
    r = s.grid.nodes
    wd = s.wdot.values
    gmu = weighted_gradient(s.w, mu, dim).values
    F = np.zeros_like(wd) if forcing is None else _arr(forcing)
    return (2 * weighted_integral(wd**2, r**mu, dim, s.grid)
            - 2 * weighted_integral(gmu**2, r**mu, dim, s.grid)
            - ((dim - 2) ** 2 - mu**2) / 2 * _w2_moment(s.w, mu - 2, dim)
            + 2 * weighted_integral(s.w.values * F, r**mu, dim, s.grid))


def etilde_rate_bound(s: WaveState, mu: float, params: ModelParams, forcing=None) -> float:
    """Upper bound for d/dt E~_{mu+1}."""
    dim = params.dim
    r = s.grid.nodes
    wd = s.wdot.values
    F = np.zeros_like(wd) if forcing is None else _arr(forcing)
    kin = weighted_integral(wd**2, r**mu, dim, s.grid)
    gmu = weighted_integral(weighted_gradient(s.w, mu, dim).values ** 2, r**mu, dim, s.grid)
    return (-2 * params.v0 * kin
            + 2 * weighted_integral(wd * F, r ** (mu + 1), dim, s.grid)
            + 2 * abs(mu + 1) * np.sqrt(kin * gmu))


def esharp_rate_bound(s: WaveState, mu: float, params: ModelParams, forcing=None) -> float:
    """Upper bound for d/dt E#_{mu+1}."""
    dim, v0 = params.dim, params.v0
    r = s.grid.nodes
    wd = s.wdot.values
    F = np.zeros_like(wd) if forcing is None else _arr(forcing)
    gmu = weighted_gradient(s.w, mu, dim).values
    return (-(v0 - abs(mu + 1)) * weighted_integral(wd**2 + gmu**2, r**mu, dim, s.grid)
            - ((dim - 2) ** 2 - mu**2) * v0 / 4 * _w2_moment(s.w, mu - 2, dim)
            + 2 * weighted_integral(wd * F, r ** (mu + 1), dim, s.grid)
            + v0 * weighted_integral(s.w.values * F, r**mu, dim, s.grid))


def _arr(f) -> np.ndarray:
    return f.values if isinstance(f, RadialField) else np.asarray(f, dtype=float)


# Functional inequalities.

def hardy_check(w: RadialField, beta: float, dim: int) -> tuple[float, float]:
    if not dim - 2 + beta > 0:
        raise ValueError(f"need N - 2 + beta > 0, got {dim - 2 + beta}")
    lhs = ((dim - 2 + beta) / 2) ** 2 * _w2_moment(w, beta - 2, dim)
    rhs = weighted_integral(_grad(w) ** 2, w.r**beta, dim, w.grid)
    return lhs, rhs


def gn_ratio(w: RadialField, dim: int) -> float:
    """||w||_{L^{2N/(N-2)}} / ||w'||_{L^2}."""
    q = 2 * dim / (dim - 2)
    den = weighted_integral(_grad(w) ** 2, None, dim, w.grid)
    if den == 0.0:
        raise ValueError("gn_ratio needs a nonzero field")
    num = weighted_integral(np.abs(w.values) ** q, None, dim, w.grid) ** (1 / q)
    return num / np.sqrt(den)


def ckn_exponent(mu: float, q: float, dim: int) -> float:
    return mu - 2 + (dim - 2 + mu) / 2 * (q - 2)


def ckn_check(w: RadialField, mu: float, q: float, dim: int) -> tuple[float, float, float]:
    """Returns (int |w|^q r^mu', (int |w'|^2 r^mu)^(q/2), mu')."""
    if not mu > 2 - dim:
        raise ValueError(f"mu must exceed 2 - N = {2 - dim}, got {mu}")
    if not 2 < q < 2 * dim / (dim - 2):
        raise ValueError(f"q must lie in (2, {2 * dim / (dim - 2)}), got {q}")
    mu_prime = ckn_exponent(mu, q, dim)
    lhs = weighted_integral(np.abs(w.values) ** q, w.r**mu_prime, dim, w.grid)
    rhs = weighted_integral(_grad(w) ** 2, w.r**mu, dim, w.grid) ** (q / 2)
    return lhs, rhs, mu_prime


def psi_hardy_constant(m: float, dim: int) -> float:
    return min((dim - 1) / 2, (dim - 2 + m) / 2) ** -2


def psi_hardy_check(z: RadialField, m: float, t: float, dim: int) -> tuple[float, float]:
    """Hardy inequality with the space-time weight Psi = 1 + t + r."""
    if not m > 2 - dim:
        raise ValueError(f"m must exceed 2 - N = {2 - dim}, got {m}")
    r = z.r
    psi = 1.0 + t + r
    lhs = weighted_integral(z.values**2, psi ** (m - 1) / r, dim, z.grid)
    rhs = psi_hardy_constant(m, dim) * weighted_integral(_grad(z) ** 2, psi**m, dim, z.grid)
    return lhs, rhs


@lru_cache(maxsize=64)
def _phi_on_grid(beta: float, dim: int, v0: float, t: float, r_max: float, n: int):
    r = np.linspace(1.0, r_max, n)
    phi = phi_field_array(beta, dim, v0, r, t)
    # Delta Phi_beta = (V0/r) d_t Phi_beta = -beta (V0/r) Phi_{beta+1}
    lap = -beta * v0 / r * phi_field_array(beta + 1, dim, v0, r, t)
    phi.setflags(write=False)
    lap.setflags(write=False)
    return phi, lap


def ibp_check(z: RadialField, beta: float, delta: float, t: float,
              params: ModelParams) -> tuple[float, float]:
    """Integration-by-parts inequality with weight Phi_beta^(2 delta - 1)."""
    if not 0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")
    dim = params.dim
    g = z.grid
    phi, lap_phi = _phi_on_grid(float(beta), dim, float(params.v0), float(t), g.r_max, g.n)
    if not np.all(phi > 0):
        raise ValueError("Phi_beta must be positive on the grid (take beta < N - 1)")
    zl = laplacian_values(z.values, g.nodes, g.h, dim)
    wgt = phi ** (2 * delta - 1)
    lhs = weighted_integral(z.values * zl * wgt, None, dim, g)
    rhs = (delta / (1 - delta) * weighted_integral(_grad(z) ** 2 * wgt, None, dim, g)
           + (1 - 2 * delta) / 2 * weighted_integral(z.values**2 * lap_phi * phi ** (2 * delta - 2),
                                                     None, dim, g))
    return lhs, rhs


def random_bumps(grid: RadialGrid, count: int, b_max: float, seed: int = 0,
                 a_range=(0.5, 5.0), b_min: float = 1.5) -> list[RadialField]:
    """Seeded family (r - 1) exp(-a (r - b)^2), Dirichlet at r = 1."""
    rng = np.random.default_rng(seed)
    r = grid.nodes
    out = []
    for _ in range(count):
        a = rng.uniform(*a_range)
        b = rng.uniform(b_min, b_max)
        out.append(RadialField(grid, (r - 1) * np.exp(-a * (r - b) ** 2), dirichlet=True))
    return out


def relative_violation(lhs: float, rhs: float) -> float:
    """Amount by which lhs <= rhs fails, relative to |rhs| (0 if it holds)."""
    scale = max(abs(rhs), abs(lhs), np.finfo(float).tiny)
    return max(0.0, (lhs - rhs) / scale)

