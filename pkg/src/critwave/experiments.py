"""Exponent formulas, blowup test-function functionals, decay fits and the
(p, amplitude) blowup scan."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad, trapezoid

from .domain import ModelParams, Nonlinearity, RadialField, RadialGrid, grid_for_horizon, weighted_integral
from .functionals import WaveState
from .solvers import Outcome, OutcomeKind, SolverConfig, Trajectory, solve_semilinear, solve_wave

# u0 = A (r - 1) exp(-2 (r - 3)^2) is below 1e-17 beyond this radius
BUMP_SUPPORT = 7.5
DECAY_WINDOW = (20.0, 200.0)


def strauss_exponent(d: float) -> float:
    """Positive root of 2 + (d + 1) p - (d - 1) p^2."""
    if not d > 1:
        raise ValueError(f"need d > 1, got {d}")
    return (d + 1 + math.sqrt(d * d + 10 * d - 7)) / (2 * (d - 1))


def gamma_quadratic(dim: float, p: float) -> float:
    return 2 + (dim + 1) * p - (dim - 1) * p * p


def weight_exponent(p: float, dim: int) -> float:
    """m(p) = 4/(p - 1) - N + 1; the energy weight is (1 + t + |x|)^(m + 1)."""
    return 4.0 / (p - 1) - dim + 1


def critical_exponent(dim: int) -> float:
    return 1.0 + 2.0 / (dim - 1)


@dataclass(frozen=True)
class ExponentWindow:
    dim: int
    v0: float
    p_lo: float
    p_hi: float
    critical: Optional[float]
    m: Optional[float] = None

    def contains(self, p: float) -> bool:
        return self.p_lo < p < self.p_hi

    def line(self) -> str:
        parts = [f"p_lo={self.p_lo:.12g}", f"p_hi={self.p_hi:.12g}"]
        if self.critical is not None:
            parts.append(f"critical={self.critical:.12g}")
        if self.m is not None:
            parts.append(f"m={self.m:.12g}")
        return ",".join(parts)


def exponent_window(params: ModelParams, with_m: bool = True) -> ExponentWindow:
    """Global-existence window 1 + 4/(N - 2 + min(N, V0)) < p < N/(N - 2)."""
    N, v0 = params.dim, params.v0
    if not v0 > N - 2:
        raise ValueError(f"empty exponent window: need V0 > N - 2 = {N - 2}, got {v0}")
    p_lo = 1 + 4 / (N - 2 + min(N, v0))
    p_hi = N / (N - 2)
    critical = critical_exponent(N) if v0 >= N else None
    m = weight_exponent(params.p, N) if with_m else None
    return ExponentWindow(N, v0, p_lo, p_hi, critical, m)


def harmonic_weight(r, dim: int):
    """psi(r) = 1 - r^(2 - N): harmonic, zero on the unit sphere."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 1):
        raise ValueError("harmonic_weight needs r >= 1")
    out = 1.0 - r_arr ** (2 - dim)
    return float(out) if out.ndim == 0 else out


def cutoff_eta(s):
    """Non-increasing C^2 cutoff: 1 on (-inf, 1/2], 0 on [1, inf), quintic bridge."""
    x = np.clip((np.asarray(s, dtype=float) - 0.5) / 0.5, 0.0, 1.0)
    out = 1.0 - x**3 * (10.0 - 15.0 * x + 6.0 * x * x)
    return float(out) if out.ndim == 0 else out


def eta_T(t, T: float):
    return cutoff_eta(np.asarray(t, dtype=float) / T)


def blowup_sign_functional(u0: RadialField, u1: RadialField, params: ModelParams) -> float:
    """Integral of (u1 + (V0/r) u0) psi over the domain."""
    if u0.grid is not u1.grid:
        raise ValueError("u0 and u1 must share one grid")
    r = u0.r
    integrand = (u1.values + params.v0 / r * u0.values) * harmonic_weight(r, params.dim)
    return weighted_integral(integrand, None, params.dim, u0.grid)


def _source_moment(state: WaveState, params: ModelParams) -> float:
    r = state.grid.nodes
    return weighted_integral(np.abs(state.w.values) ** params.p, harmonic_weight(r, params.dim),
                             params.dim, state.grid)


def _window_integral(times, G, tau, power):
    """Integral over [tau/2, tau] of G(t) eta(t/tau)^power, G linear between samples."""
    inside = times[(times > tau / 2) & (times < tau)]
    t = np.concatenate(([tau / 2], inside, [tau]))
    g = np.interp(t, times, G)
    return float(trapezoid(g * eta_T(t, tau) ** power, t))


def y_functional(traj: Trajectory, params: ModelParams, T: float) -> float:
    """Auxiliary functional Y(T) of the critical-case test-function argument."""
    times = traj.times
    if not 0 < T <= times[-1] * (1 + 1e-12):
        raise ValueError(f"T={T} outside the stored horizon (0, {times[-1]}]")
    spacing = float(np.max(np.diff(times))) if len(times) > 1 else math.inf
    if spacing > T / 8:
        raise ValueError(f"snapshot spacing {spacing} too coarse for T={T}; need <= T/8")
    p = params.p
    power = 2 * p / (p - 1)
    G = np.array([_source_moment(s, params) for s in traj.snapshots])
    first = traj.snapshots[0]
    y0 = blowup_sign_functional(first.w, first.wdot, params)
    # I(tau)/tau -> G(0) * int_{1/2}^1 eta^power as tau -> 0
    c0, _ = quad(lambda s: cutoff_eta(s) ** power, 0.5, 1.0)
    taus = np.concatenate(([0.0], times[(times > 0) & (times < T)], [T]))
    vals = np.empty_like(taus)
    vals[0] = G[0] * c0
    for i, tau in enumerate(taus[1:], start=1):
        vals[i] = _window_integral(times, G, tau, power) / tau
    return y0 + float(trapezoid(vals, taus))


def y_inner_rate(traj: Trajectory, params: ModelParams, T: float) -> float:
    """dY/dT = (1/T) * integral over [T/2, T] of the weighted source."""
    G = np.array([_source_moment(s, params) for s in traj.snapshots])
    return _window_integral(traj.times, G, T, 2 * params.p / (params.p - 1)) / T


def lifespan_branch(p: float, dim: int) -> str:
    threshold = dim / (dim - 1)
    if math.isclose(p, threshold, rel_tol=1e-12):
        return "log"
    return "subcritical" if p < threshold else "power"


def lifespan_bound_table(p: float, dim: int, T: float) -> float:
    """Growth envelope of the cutoff-region integral, by exponent branch."""
    if not T > 1:
        raise ValueError(f"T must exceed 1, got {T}")
    branch = lifespan_branch(p, dim)
    if branch == "subcritical":
        return T ** (-1 / (p - 1))
    expo = dim - 1 - 2 / (p - 1)
    if branch == "log":
        return T**expo * math.log(T)
    return T**expo


def decay_exponent_fit(t, E, window: tuple[float, float] = DECAY_WINDOW) -> float:
    """Least-squares slope of log E against log(1 + t) over ``window``."""
    t = np.asarray(t, dtype=float)
    E = np.asarray(E, dtype=float)
    sel = (t >= window[0]) & (t <= window[1])
    if sel.sum() < 10:
        raise ValueError(f"need >= 10 samples in window {window}, got {int(sel.sum())}")
    if np.any(E[sel] <= 0):
        raise ValueError("decay fit needs positive samples")
    slope, _ = np.polyfit(np.log1p(t[sel]), np.log(E[sel]), 1)
    return float(slope)


def blowup_bump(grid: RadialGrid, amplitude: float) -> WaveState:
    """u0 = u1 = A (r - 1) exp(-2 (r - 3)^2)."""
    r = grid.nodes
    u = amplitude * (r - 1) * np.exp(-2 * (r - 3) ** 2)
    return WaveState.from_arrays(grid, u, u.copy())


def exterior_mass_fraction(state: WaveState, r0: float, dim: int, cells: int = 3) -> float:
    """Share of int w^2 dx lying beyond r0 + t + cells*h."""
    g = state.grid
    w2 = state.w.values**2
    total = weighted_integral(w2, None, dim, g)
    if total == 0:
        return 0.0
    outside = g.nodes > r0 + state.t + cells * g.h
    return weighted_integral(np.where(outside, w2, 0.0), None, dim, g) / total


def weighted_energy_ratio(traj: Trajectory, forcing, params: ModelParams, m: float,
                 delta: float) -> np.ndarray:
    """[E_{m+1}^Psi(t) + delta int_0^t E_m^Psi] / [E_{m+1}^Psi(0) + int_0^t int F^2 Psi^{m+1} r]
    at every recorded sample (energies must be recorded with energy_m = m)."""
    t = np.array([e.t for e in traj.energies])
    e_m = np.array([e.e_psi_m for e in traj.energies])
    e_m1 = np.array([e.e_psi_m1 for e in traj.energies])
    src = np.zeros_like(t)
    if forcing is not None:
        for i, s in enumerate(traj.snapshots):
            r = s.grid.nodes
            F = forcing(r, s.t)
            src[i] = weighted_integral(F**2, (1 + s.t + r) ** (m + 1) * r, params.dim, s.grid)
    num = e_m1 + delta * cumulative_trapezoid(e_m, t, initial=0.0)
    den = e_m1[0] + cumulative_trapezoid(src, t, initial=0.0)
    # zero data and no accumulated source yet: both sides vanish
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


@dataclass(frozen=True)
class ScanOutcome:
    p: float
    amplitude: float
    outcome: Outcome
    decay_slope: Optional[float] = None

    @property
    def t_star(self) -> Optional[float]:
        return self.outcome.t_star


SCAN_CSV_HEADER = ("p", "amplitude", "outcome", "t_star", "decay_slope")


def scan_csv(rows: Sequence[ScanOutcome]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCAN_CSV_HEADER)
    for row in rows:
        t_star = "" if row.t_star is None else f"{row.t_star:.17g}"
        slope = "" if row.decay_slope is None else f"{row.decay_slope:.17g}"
        writer.writerow([repr(row.p), repr(row.amplitude), row.outcome.kind.value,
                         t_star, slope])
    return buf.getvalue()


def _scan_case(args) -> ScanOutcome:
    p, amplitude, params, config, grid, window = args
    try:
        case_params = replace(params, p=p)
        m = max(weight_exponent(p, params.dim), 0.0)
        case_config = replace(config, energy_m=m, energy_mu=None)
        traj = solve_semilinear(blowup_bump(grid, amplitude), case_params, case_config)
    except Exception as exc:  # one bad case never aborts the scan
        return ScanOutcome(p, amplitude, Outcome(OutcomeKind.FAILURE, None, str(exc)))
    slope = None
    if traj.outcome.kind is OutcomeKind.BOUNDED and amplitude != 0:
        t = [e.t for e in traj.energies]
        E = [e.e_psi_m1 for e in traj.energies]
        lo, hi = window
        try:
            slope = decay_exponent_fit(t, E, (lo, min(hi, config.t_end)))
        except ValueError:
            slope = None
    return ScanOutcome(p, amplitude, traj.outcome, slope)


def scan_thread_cap() -> int:
    """Worker cap from CRITWAVE_THREADS (unset or invalid means CPU count)."""
    raw = os.environ.get("CRITWAVE_THREADS", "")
    try:
        cap = int(raw)
    except ValueError:
        cap = os.cpu_count() or 1
    return max(cap, 1)


def blowup_scan(p_list: Sequence[float], amplitude_list: Sequence[float], params: ModelParams,
                config: SolverConfig, grid: Optional[RadialGrid] = None,
                window: tuple[float, float] = DECAY_WINDOW, workers: int = 1) -> list[ScanOutcome]:
    """Run the semilinear solver on the bump profile for every (p, amplitude)."""
    if not p_list or not amplitude_list:
        raise ValueError("blowup_scan needs non-empty p and amplitude lists")
    if params.nonlinearity is Nonlinearity.NONE:
        raise ValueError("blowup_scan needs a nonlinearity")
    if grid is None:
        grid = grid_for_horizon(max(params.r0, BUMP_SUPPORT), config.t_end, 0.05)
    cases = [(float(p), float(a), params, config, grid, window)
             for p in p_list for a in amplitude_list]
    workers = min(workers, scan_thread_cap())
    if workers > 1 and len(cases) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_scan_case, cases))
    return [_scan_case(c) for c in cases]


def linear_run(params: ModelParams, amplitude: float, config: SolverConfig,
               grid: Optional[RadialGrid] = None) -> Trajectory:
    """Linear damped wave run from the bump profile."""
    if grid is None:
        grid = grid_for_horizon(max(params.r0, BUMP_SUPPORT), config.t_end, 0.05)
    return solve_wave(blowup_bump(grid, amplitude), None, params, config)
