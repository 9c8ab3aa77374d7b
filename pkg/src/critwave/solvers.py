"""Time integrators and linear solvers on the radial grid.

The damped wave equation  w_tt - Delta w + (V0/r) w_t = F  is advanced by a
velocity-Verlet (leapfrog) scheme in which the damping term is treated by
Crank-Nicolson within each velocity half-kick, so V0/r never restricts the
step size; the CFL bound dt <= cfl * h comes from the wave part alone.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded

from .domain import ModelParams, Nonlinearity, RadialField, RadialGrid, weighted_integral
from .functionals import EnergySample, WaveState, energy_sample


class NumericalFailure(RuntimeError):
    """Raised when a discrete solve produces non-finite or inconsistent values."""


class OutcomeKind(str, enum.Enum):
    BOUNDED = "BoundedToHorizon"
    BLOWUP = "BlowupDetected"
    FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class Outcome:
    kind: OutcomeKind
    t: Optional[float] = None
    reason: str = ""

    @property
    def t_star(self) -> Optional[float]:
        return self.t if self.kind is OutcomeKind.BLOWUP else None

    def csv_row(self, case_id: str) -> str:
        t = "" if self.t is None or self.kind is OutcomeKind.BOUNDED else f"{self.t:.17g}"
        return f"{case_id},{self.kind.value},{t}"


OUTCOME_CSV_HEADER = "case_id,outcome,t_star"


@dataclass(frozen=True)
class SolverConfig:
    t_end: float
    dt: Optional[float] = None
    cfl: float = 0.9
    output_stride: int = 10
    blowup_threshold: float = 1e6
    energy_m: float = 1.0
    energy_mu: Optional[float] = None

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if not 0 < self.cfl < 1:
            raise ValueError(f"cfl must lie in (0, 1), got {self.cfl}")
        if self.output_stride < 1:
            raise ValueError("output_stride must be >= 1")
        if not self.blowup_threshold > 1:
            raise ValueError("blowup_threshold must exceed 1")

    def steps(self, grid: RadialGrid) -> tuple[int, float]:
        """Number of steps and the step size that lands exactly on t_end."""
        limit = self.cfl * grid.h
        if self.dt is not None:
            if self.dt > limit * (1 + 1e-12):
                raise ValueError(f"dt={self.dt} violates dt <= cfl*h = {limit}")
            n = int(round(self.t_end / self.dt))
            if abs(n * self.dt - self.t_end) > 1e-9 * self.t_end:
                n = int(math.ceil(self.t_end / self.dt))
            return n, self.t_end / n
        n = int(math.ceil(self.t_end / limit - 1e-9))
        return n, self.t_end / n


@dataclass
class Trajectory:
    snapshots: list[WaveState] = field(default_factory=list)
    energies: list[EnergySample] = field(default_factory=list)
    outcome: Outcome = Outcome(OutcomeKind.BOUNDED)
    dt: float = 0.0

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def final(self) -> WaveState:
        return self.snapshots[-1]


# forcing(r, t) -> values on the grid
Forcing = Optional[Callable[[np.ndarray, float], np.ndarray]]


def _interior_laplacian(w: np.ndarray, r: np.ndarray, h: float, dim: int) -> np.ndarray:
    out = np.zeros_like(w)
    out[1:-1] = ((w[2:] - 2.0 * w[1:-1] + w[:-2]) / h**2
                 + (dim - 1) / r[1:-1] * (w[2:] - w[:-2]) / (2.0 * h))
    return out


def _as_values(f, grid: RadialGrid, t: float) -> np.ndarray:
    if f is None:
        return np.zeros(grid.n)
    if isinstance(f, RadialField):
        return f.values
    if callable(f):
        return np.asarray(f(grid.nodes, t), dtype=float)
    return np.asarray(f, dtype=float)


class _WaveStepper:
    """Carries the acceleration between steps so each step costs one Laplacian."""

    def __init__(self, grid: RadialGrid, params: ModelParams, dt: float,
                 forcing: Forcing = None, state_forcing=None):
        self.grid, self.params, self.dt = grid, params, dt
        self.forcing, self.state_forcing = forcing, state_forcing
        kappa = params.v0 * dt / (4.0 * grid.nodes)
        self.damp = (1.0 - kappa) / (1.0 + kappa)
        self.kick = (dt / 2.0) / (1.0 + kappa)

    def accel(self, w: np.ndarray, t: float) -> np.ndarray:
        g = self.grid
        a = _interior_laplacian(w, g.nodes, g.h, self.params.dim)
        if self.forcing is not None:
            a += _as_values(self.forcing, g, t)
        if self.state_forcing is not None:
            a += self.state_forcing(w)
        a[0] = a[-1] = 0.0
        return a

    def step(self, w, v, a, t):
        v_half = self.damp * v + self.kick * a
        v_half[0] = v_half[-1] = 0.0
        w_new = w + self.dt * v_half
        w_new[0] = w_new[-1] = 0.0
        a_new = self.accel(w_new, t + self.dt)
        v_new = self.damp * v_half + self.kick * a_new
        v_new[0] = v_new[-1] = 0.0
        return w_new, v_new, a_new


def step_wave(s: WaveState, forcing, dt: float, params: ModelParams,
              cfl: float = 1.0) -> WaveState:
    """One step of the damped wave equation with Dirichlet ends.

    ``forcing`` is None, node values (held over the step), or ``f(r, t)``.
    """
    g = s.grid
    if dt > cfl * g.h * (1 + 1e-12):
        raise ValueError(f"dt={dt} violates dt <= cfl*h = {cfl * g.h}")
    stepper = _WaveStepper(g, params, dt, forcing)
    w, v = s.w.values.copy(), s.wdot.values.copy()
    w_new, v_new, _ = stepper.step(w, v, stepper.accel(w, s.t), s.t)
    if not (np.all(np.isfinite(w_new)) and np.all(np.isfinite(v_new))):
        raise NumericalFailure(f"non-finite values at t={s.t + dt}")
    return WaveState.from_arrays(g, w_new, v_new, s.t + dt)


def _integrate(init: WaveState, params: ModelParams, config: SolverConfig,
               forcing: Forcing = None, state_forcing=None,
               detect_blowup: bool = False, record_energies: bool = True) -> Trajectory:
    g = init.grid
    n_steps, dt = config.steps(g)
    stepper = _WaveStepper(g, params, dt, forcing, state_forcing)
    traj = Trajectory(dt=dt)
    m, mu = config.energy_m, config.energy_mu

    def record(state):
        traj.snapshots.append(state)
        if record_energies:
            traj.energies.append(energy_sample(state, params, m, mu))

    record(init)
    w, v = init.w.values.copy(), init.wdot.values.copy()
    t0 = init.t
    a = stepper.accel(w, t0)
    sup_prev = float(np.max(np.abs(w)))
    threshold = config.blowup_threshold
    for k in range(1, n_steps + 1):
        t_prev = t0 + (k - 1) * dt
        t = t0 + k * dt
        with np.errstate(over="ignore", invalid="ignore"):
            w, v, a = stepper.step(w, v, a, t_prev)
            sup = float(np.max(np.abs(w)))
        if detect_blowup and not math.isnan(sup) and sup >= threshold:
            # log-linear interpolation of sup|w| between the two steps
            if sup_prev > 0 and sup_prev < sup < math.inf:
                frac = (math.log(threshold) - math.log(sup_prev)) / (math.log(sup) - math.log(sup_prev))
                frac = min(max(frac, 0.0), 1.0)
            else:
                frac = 1.0
            traj.outcome = Outcome(OutcomeKind.BLOWUP, t_prev + frac * dt)
            return traj
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
            traj.outcome = Outcome(OutcomeKind.FAILURE, t, "non-finite values")
            return traj
        sup_prev = sup
        if k % config.output_stride == 0 or k == n_steps:
            record(WaveState.from_arrays(g, w, v, t))
    traj.outcome = Outcome(OutcomeKind.BOUNDED, t0 + n_steps * dt)
    return traj


def solve_wave(init: WaveState, forcing: Forcing, params: ModelParams,
               config: SolverConfig, record_energies: bool = True) -> Trajectory:
    """Linear damped wave equation from ``init`` to ``config.t_end``."""
    return _integrate(init, params, config, forcing=forcing, record_energies=record_energies)


def solve_semilinear(init: WaveState, params: ModelParams, config: SolverConfig,
                     record_energies: bool = True) -> Trajectory:
    """Damped wave equation with source f(w); stops once sup|w| hits the threshold."""
    if params.nonlinearity is Nonlinearity.NONE:
        raise ValueError("solve_semilinear needs a nonlinearity")
    return _integrate(init, params, config, state_forcing=params.f,
                      detect_blowup=True, record_energies=record_energies)


# Elliptic and parabolic problems.

def _operator_bands(grid: RadialGrid, dim: int):
    """Lower/diag/upper coefficients of the interior discrete Laplacian."""
    r = grid.nodes[1:-1]
    h = grid.h
    lower = 1.0 / h**2 - (dim - 1) / (2.0 * h * r)
    diag = np.full_like(r, -2.0 / h**2)
    upper = 1.0 / h**2 + (dim - 1) / (2.0 * h * r)
    return lower, diag, upper


def _solve_tridiag(lower, diag, upper, rhs):
    n = len(diag)
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return solve_banded((1, 1), ab, rhs)


def _tridiag_matvec(lower, diag, upper, x):
    y = diag * x
    y[1:] += lower[1:] * x[:-1]
    y[:-1] += upper[:-1] * x[1:]
    return y


def solve_elliptic(w1: RadialField, lam: float, dim: int) -> RadialField:
    """(lam / r^2) psi - Delta psi = w1 with psi = 0 at both ends."""
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam}")
    g = w1.grid
    r = g.nodes[1:-1]
    lower, diag, upper = _operator_bands(g, dim)
    lower, diag, upper = -lower, lam / r**2 - diag, -upper
    rhs = w1.values[1:-1].copy()
    psi = _solve_tridiag(lower, diag, upper, rhs)
    resid = _tridiag_matvec(lower, diag, upper, psi) - rhs
    scale = max(np.linalg.norm(rhs), np.finfo(float).tiny)
    if not np.all(np.isfinite(psi)) or np.linalg.norm(resid) > 1e-10 * scale:
        raise NumericalFailure("elliptic solve failed its residual check")
    out = np.zeros(g.n)
    out[1:-1] = psi
    return RadialField(g, out, dirichlet=True)


def lambda_mu(mu: float, dim: int) -> float:
    return (mu - 1) * (dim - 3 + mu) / 2 + 1


def lambda_cap(m: float, dim: int) -> float:
    """max of lambda_mu over mu in [-1, m].

    lambda_mu is an upward parabola in mu, so the maximum sits at an endpoint.
    """
    if m < -1:
        raise ValueError(f"m must be >= -1, got {m}")
    return max(lambda_mu(-1.0, dim), lambda_mu(m, dim))


def step_parabolic(v: RadialField, forcing, dt: float, params: ModelParams,
                   t: float = 0.0, bc: tuple[float, float] = (0.0, 0.0)) -> RadialField:
    """Implicit Euler step of (V0/r) v_t - Delta v = F.

    ``forcing`` is sampled at the new time ``t + dt``; ``bc`` holds the
    Dirichlet values at the new time.
    """
    g = v.grid
    r = g.nodes[1:-1]
    c = dt * r / params.v0
    lower, diag, upper = _operator_bands(g, params.dim)
    lower, diag, upper = -c * lower, 1.0 - c * diag, -c * upper
    F = _as_values(forcing, g, t + dt)
    rhs = v.values[1:-1] + c * F[1:-1]
    rhs[0] -= lower[0] * bc[0]
    rhs[-1] -= upper[-1] * bc[1]
    sol = _solve_tridiag(lower, diag, upper, rhs)
    if not np.all(np.isfinite(sol)):
        raise NumericalFailure("parabolic step produced non-finite values")
    out = np.empty(g.n)
    out[0], out[-1] = bc
    out[1:-1] = sol
    return RadialField(g, out, dirichlet=(bc[0] == 0.0))


def parabolic_rate(v: np.ndarray, F: np.ndarray, grid: RadialGrid, params: ModelParams) -> np.ndarray:
    """v_t read off the parabolic equation: (r/V0)(Delta v + F)."""
    out = grid.nodes / params.v0 * (_interior_laplacian(v, grid.nodes, grid.h, params.dim) + F)
    out[0] = out[-1] = 0.0
    return out


def _step_parabolic_extrapolated(v: RadialField, F_at, dt: float, params: ModelParams,
                                 t: float) -> RadialField:
    """Second-order step: Richardson extrapolation of two implicit Euler
    half steps against one full step (A-stable)."""
    full = step_parabolic(v, F_at(t + dt), dt, params, t=t)
    half = step_parabolic(v, F_at(t + dt / 2), dt / 2, params, t=t)
    half = step_parabolic(half, F_at(t + dt), dt / 2, params, t=t + dt / 2)
    return RadialField(v.grid, 2.0 * half.values - full.values, dirichlet=True)


# Decomposition w = v + d_t U.

@dataclass
class Decomposition:
    psi1: RadialField
    lam: float
    times: np.ndarray
    v: list[RadialField]
    U: list[WaveState]
    w: list[WaveState]
    errors: np.ndarray
    abs_errors: np.ndarray
    norms: np.ndarray

    @property
    def max_error(self) -> float:
        """Max over snapshots of ||w - (v + U_t)|| / ||w||."""
        return float(np.max(self.errors))

    @property
    def peak_scaled_error(self) -> float:
        """Max absolute error over the peak of ||w||; well posed for zero data."""
        peak = float(np.max(self.norms))
        return float(np.max(self.abs_errors)) / peak if peak > 0 else 0.0


def _l2(values: np.ndarray, grid: RadialGrid, dim: int) -> float:
    return math.sqrt(max(weighted_integral(values**2, None, dim, grid), 0.0))


def decompose_solution(w0: RadialField, w1: RadialField, forcing: Forcing,
                       params: ModelParams, config: SolverConfig, m: float) -> Decomposition:
    """Split the damped wave solution into a parabolic part and a time derivative.

    Solves the singular elliptic problem for psi1, the degenerate parabolic
    problem for v, and the wave problem for U driven by -v_t, then compares
    v + U_t against an independent direct solve for w at every output step.
    """
    g = w0.grid
    dim, v0c = params.dim, params.v0
    r = g.nodes
    lam = lambda_cap(m, dim)
    psi1 = solve_elliptic(w1, lam, dim)
    shift = lam / (v0c * r) * psi1.values

    n_steps, dt = config.steps(g)
    F_at = (lambda t: np.zeros(g.n)) if forcing is None else (lambda t: _as_values(forcing, g, t))

    v = RadialField(g, w0.values + shift, dirichlet=True)
    vt = parabolic_rate(v.values, F_at(0.0), g, params)
    U_state = (-psi1.values, -shift)

    # U is driven by -v_t, known only at step boundaries
    vt_levels = {0: vt}

    def u_forcing(_r, t):
        k = int(round(t / dt))
        return -vt_levels[k]

    stepper = _WaveStepper(g, params, dt, u_forcing)
    Uw, Uv = U_state[0].copy(), U_state[1].copy()
    Ua = stepper.accel(Uw, 0.0)

    direct = solve_wave(WaveState.from_arrays(g, w0.values, w1.values, 0.0), forcing, params,
                        config, record_energies=False)
    if direct.outcome.kind is OutcomeKind.FAILURE:
        raise NumericalFailure(direct.outcome.reason)
    direct_by_step = {int(round(s.t / dt)): s for s in direct.snapshots}

    times, vs, Us, ws, errs, abs_errs, norms = [], [], [], [], [], [], []

    def record(k, t):
        ws_k = direct_by_step[k]
        rec = v.values + Uv
        norm = _l2(ws_k.w.values, g, dim)
        err = _l2(ws_k.w.values - rec, g, dim)
        times.append(t)
        vs.append(v)
        Us.append(WaveState.from_arrays(g, Uw, Uv, t))
        ws.append(ws_k)
        errs.append(err / norm if norm > 0 else err)
        abs_errs.append(err)
        norms.append(norm)

    record(0, 0.0)
    for k in range(1, n_steps + 1):
        t = k * dt
        v = _step_parabolic_extrapolated(v, F_at, dt, params, t - dt)
        vt_levels[k] = parabolic_rate(v.values, F_at(t), g, params)
        Uw, Uv, Ua = stepper.step(Uw, Uv, Ua, t - dt)
        vt_levels.pop(k - 1, None)
        if k % config.output_stride == 0 or k == n_steps:
            record(k, t)
    return Decomposition(psi1, lam, np.array(times), vs, Us, ws, np.array(errs),
                         np.array(abs_errs), np.array(norms))
