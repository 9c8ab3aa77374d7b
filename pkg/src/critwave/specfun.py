"""Kummer's confluent hypergeometric function and the self-similar profiles
built from it.

``phi_field`` evaluates the family

    Phi_beta(x, t) = (1 + t)^(-beta) * phi_beta(V0 |x| / (1 + t)),
    phi_beta(z)    = exp(-z) * M(N - 1 - beta, N - 1; z),

which solves ``(V0/|x|) d_t Phi = Delta Phi`` exactly in N dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import rgamma

Z_SWITCH = 40.0
SERIES_MAX_TERMS = 5000
ASYMPTOTIC_MAX_TERMS = 200


@dataclass(frozen=True)
class KummerQuery:
    a: float
    c: float
    z: float

    def __post_init__(self):
        if _is_nonpositive_integer(self.c):
            raise ValueError(f"c must not be a non-positive integer, got {self.c}")
        if not self.z >= 0.0:
            raise ValueError(f"z must be non-negative, got {self.z}")


@dataclass(frozen=True)
class PhiQuery:
    beta: float
    dim: int
    v0: float
    r: float
    t: float

    def __post_init__(self):
        if self.dim < 3:
            raise ValueError(f"dim must be >= 3, got {self.dim}")
        if not self.v0 > 0:
            raise ValueError(f"v0 must be positive, got {self.v0}")
        if self.r < 0 or self.t < 0:
            raise ValueError("r and t must be non-negative")

    @property
    def z(self) -> float:
        return self.v0 * self.r / (1.0 + self.t)


def _is_nonpositive_integer(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


def pochhammer(d: float, n: int) -> float:
    """Rising factorial (d)_n; (d)_0 = 1."""
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    out = 1.0
    for k in range(n):
        out *= d + k
    return out


def kummer_series(a: float, c: float, z: float) -> float:
    """Ascending series for M(a, c; z), summed with ``math.fsum``.

    Terminates exactly when ``a`` is a non-positive integer.
    """
    terms = [1.0]
    term = 1.0
    n_min = int(math.ceil(-a)) if a < 0 else 0
    for n in range(SERIES_MAX_TERMS):
        term *= (a + n) / (c + n) * z / (n + 1)
        if term == 0.0:
            break
        terms.append(term)
        # past every sign change the tail is geometric-like and positive
        if n >= n_min and abs(term) < 1e-18 * abs(math.fsum(terms)):
            break
    else:
        raise RuntimeError(f"Kummer series did not converge for a={a}, c={c}, z={z}")
    return math.fsum(terms)


def _asymptotic_sum(p: float, q: float, x: float) -> tuple[float, float]:
    """Sum_s (p)_s (q)_s / (s! x^s) truncated at the smallest term.

    Returns the partial sum and the magnitude of the last retained term.
    """
    terms = [1.0]
    term = 1.0
    for s in range(ASYMPTOTIC_MAX_TERMS):
        nxt = term * (p + s) * (q + s) / ((s + 1) * x)
        if nxt == 0.0:
            return math.fsum(terms), 0.0
        if abs(nxt) >= abs(term) and s > 0:
            break
        terms.append(nxt)
        term = nxt
        if abs(term) < 1e-18:
            break
    return math.fsum(terms), abs(term)


def kummer_scaled_series(a: float, c: float, z: float) -> float:
    """exp(-z) * M(a, c; z) by the ascending series with log-scaled terms.

    Overflow-free for any z; costs O(z) terms.
    """
    logt = -z
    sign = 1.0
    terms = [math.exp(logt)]
    n_min = int(math.ceil(-a)) if a < 0 else 0
    for n in range(SERIES_MAX_TERMS + int(4 * z)):
        ratio = (a + n) / (c + n) * z / (n + 1)
        if ratio == 0.0:
            break
        if ratio < 0:
            sign = -sign
        logt += math.log(abs(ratio))
        term = sign * math.exp(logt)
        terms.append(term)
        if n >= n_min and n > z and abs(term) < 1e-18 * abs(math.fsum(terms)):
            break
    return math.fsum(terms)


def kummer_scaled_asymptotic(a: float, c: float, z: float,
                             strict: bool = False) -> float:
    """Large-z expansion of exp(-z) * M(a, c; z) for real z > 0.

    Dominant algebraic part plus the exponentially small companion, whose
    Stokes-line phase is taken as cos(pi a) (exact when a is an integer).
    When the optimally truncated expansion cannot reach ~1e-13 relative
    accuracy, the log-scaled series is used instead unless ``strict``.
    """
    if z <= 0:
        raise ValueError("asymptotic path needs z > 0")
    gc = math.gamma(c)
    lead = 0.0
    ra = float(rgamma(a))
    rest = 0.0
    if ra != 0.0:
        total, rest = _asymptotic_sum(c - a, 1.0 - a, z)
        lead = gc * ra * z ** (a - c) * total
    sub = 0.0
    rca = float(rgamma(c - a))
    if rca != 0.0:
        total, _ = _asymptotic_sum(a, a - c + 1.0, -z)
        sub = gc * rca * math.cos(math.pi * a) * math.exp(-z) * z ** (-a) * total
    value = lead + sub
    if not strict and abs(gc * ra * z ** (a - c)) * rest > 1e-13 * abs(value):
        return kummer_scaled_series(a, c, z)
    return value


def kummer_scaled(a: float, c: float, z: float) -> float:
    """exp(-z) * M(a, c; z), finite for every z >= 0."""
    KummerQuery(a, c, z)
    if a == c:
        return 1.0
    if _is_nonpositive_integer(a):
        # polynomial: exact at any z, damped by exp(-z)
        return math.exp(-z) * kummer_series(a, c, z)
    if z <= Z_SWITCH:
        return math.exp(-z) * kummer_series(a, c, z)
    return kummer_scaled_asymptotic(a, c, z)


def kummer_m(q: KummerQuery | float, c: float | None = None, z: float | None = None) -> float:
    """Confluent hypergeometric function M(a, c; z) for z >= 0.

    Accepts a :class:`KummerQuery` or the three numbers ``a, c, z``.
    Returns ``inf`` once M overflows double precision.
    """
    if not isinstance(q, KummerQuery):
        q = KummerQuery(float(q), float(c), float(z))
    a, c, z = q.a, q.c, q.z
    if a == c:
        try:
            return math.exp(z)
        except OverflowError:
            return math.inf
    if _is_nonpositive_integer(a) or z <= Z_SWITCH:
        return kummer_series(a, c, z)
    scaled = kummer_scaled_asymptotic(a, c, z)
    try:
        return math.exp(z) * scaled
    except OverflowError:
        return math.copysign(math.inf, scaled)


def phi_profile(beta: float, dim: int, z: float) -> float:
    if dim < 3:
        raise ValueError(f"dim must be >= 3, got {dim}")
    return kummer_scaled(dim - 1 - beta, dim - 1, z)


def phi_field(q: PhiQuery | float, dim: int | None = None, v0: float | None = None,
              r: float | None = None, t: float | None = None) -> float:
    """Self-similar solution Phi_beta at radius r and time t."""
    if not isinstance(q, PhiQuery):
        q = PhiQuery(float(q), int(dim), float(v0), float(r), float(t))
    return (1.0 + q.t) ** (-q.beta) * phi_profile(q.beta, q.dim, q.z)


def phi_field_array(beta, dim, v0, r, t):
    """Vectorized ``phi_field`` over an array of radii at a single time."""
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    for i, ri in np.ndenumerate(r):
        out[i] = phi_field(PhiQuery(beta, dim, v0, float(ri), t))
    return out


def phi_envelope(beta: float, v0: float, r: float, t: float) -> float:
    """Two-sided comparison envelope (1 + t + V0 r)^(-beta)."""
    return (1.0 + t + v0 * r) ** (-beta)
