"""Diophantine arithmetic, the cohomological equation, resonance zones."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import NoTwist, RationalInput, ResonantFrequency, SmallDivisorBreach
from .series import (
    FourierTaylorSeries,
    RadialSeries,
    StripParams,
    compose_shift,
    shift_factors,
    truncate_fourier,
    weighted_norm,
    zero_mean,
)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class DiophantineWitness:
    omega0: float
    tau: float
    N_checked: int
    K: float
    worst_k: int = 0


@dataclass(frozen=True)
class ResonanceZone:
    """Real interval ``center +- radius`` around the preimage of ``p/q``."""

    p: int
    q: int
    center: float
    radius: float

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if math.gcd(self.p, self.q) != 1:
            raise ValueError("p/q must be reduced")
        if not self.radius > 0:
            raise ValueError("zone radius must be positive")

    @property
    def interval(self):
        return (self.center - self.radius, self.center + self.radius)

    def contains(self, r):
        return abs(r - self.center) < self.radius

    def to_dict(self):
        return {"p": self.p, "q": self.q, "center": self.center, "radius": self.radius}


def parse_omega(text):
    """Accept a float or one of the names ``golden``, ``silver``."""
    names = {"golden": GOLDEN, "silver": math.sqrt(2.0) - 1.0}
    if isinstance(text, str) and text.strip().lower() in names:
        return names[text.strip().lower()]
    return float(text)


def continued_fraction(omega, count):
    """Partial quotients of the exact binary value of ``omega``."""
    x = Fraction(omega)
    out = []
    for _ in range(count):
        a = math.floor(x)
        out.append(int(a))
        frac = x - a
        if frac == 0:
            break
        x = 1 / frac
    return out


def continued_fraction_convergents(omega, count):
    """First ``count`` convergents ``(p, q)`` with ``q >= 2``.

    Raises
    ------
    RationalInput
        If ``omega`` is within 1e-15 of a rational with denominator <= 10**6.
    """
    omega = float(omega)
    near = Fraction(omega).limit_denominator(10**6)
    if abs(omega - float(near)) <= 1e-15:
        raise RationalInput("frequency is numerically rational", p=near.numerator, q=near.denominator)
    out = []
    x = Fraction(omega)
    pm2, qm2, pm1, qm1 = 0, 1, 1, 0
    while len(out) < count:
        a = math.floor(x)
        p = a * pm1 + pm2
        q = a * qm1 + qm2
        if q >= 2:
            out.append((int(p), int(q)))
        pm2, qm2, pm1, qm1 = pm1, qm1, p, q
        frac = x - a
        if frac == 0:
            break
        x = 1 / frac
    return out


def dist_to_int(x):
    x = np.asarray(x, dtype=float)
    return np.abs(x - np.round(x))


def diophantine_constant(omega, N, tau):
    """Worst ``|k|^{-tau} / ||k omega||`` over ``0 < k <= N``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    k = np.arange(1, N + 1)
    d = dist_to_int(k * float(omega))
    bad = d <= 4 * np.finfo(float).eps * k
    if np.any(bad):
        kk = int(k[bad][0])
        raise ResonantFrequency("k omega is an integer", k=kk)
    vals = k ** (-float(tau)) / d
    j = int(np.argmax(vals))
    return DiophantineWitness(float(omega), float(tau), int(N), float(vals[j]), int(k[j]))


def _series_reciprocal(d):
    """Reciprocal of each column of a Taylor array ``d`` (shape (N+1, m))."""
    N = d.shape[0] - 1
    e = np.zeros_like(d)
    e[0] = 1.0 / d[0]
    for n in range(1, N + 1):
        e[n] = -np.sum(d[1 : n + 1] * e[n - 1 :: -1][:n], axis=0) / d[0]
    return e


def divisor_series(omega_map, n_r_max, n_theta_max):
    """Taylor coefficients of ``1 - exp(-2 pi i k omega(r))`` for all modes."""
    d = -shift_factors(omega_map, n_r_max, n_theta_max, sign=-1.0)
    d[0] += 1.0
    return d


def solve_cohomological(omega_map, F, N, divisor_floor=1e-10, modes=None):
    """Zero-mean ``Y`` with ``Y - Y(theta - omega(r), r) = T_N F - mean(F)``.

    ``omega_map`` is the frequency map ``omega = Omega'``.  Each mode is
    divided by the r-expansion of ``1 - exp(-2 pi i k omega(r))``.  With
    ``modes`` (a vectorized predicate on k) only the selected modes are
    solved; the others are left out of both sides.

    Raises
    ------
    SmallDivisorBreach
        When some ``0 < |k| <= N`` has ``|1 - exp(-2 pi i k omega(0))| < divisor_floor``.
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    n_r, K = F.n_r_max, F.n_theta_max
    k = np.arange(-K, K + 1)
    active = (k != 0) & (np.abs(k) <= N)
    if modes is not None:
        active &= np.asarray(modes(k), dtype=bool)
    d = divisor_series(omega_map, n_r, K)
    mods = np.abs(d[0])
    offending = [(int(kk), float(mm)) for kk, mm in zip(k[active], mods[active]) if mm < divisor_floor]
    if offending:
        raise SmallDivisorBreach(
            "small divisor below floor %.3g" % divisor_floor, offending=offending, floor=divisor_floor
        )
    out = np.zeros_like(F.coeffs)
    if np.any(active):
        e = _series_reciprocal(d[:, active])
        c = F.coeffs[:, active]
        for j in range(n_r + 1):
            out[j:, active] += e[j][None, :] * c[: n_r + 1 - j]
    return FourierTaylorSeries(n_r, K, out)


def apply_bracket(omega_map, Y):
    """``[Omega] Y = Y - Y(theta - omega(r), r)``."""
    return Y - compose_shift(Y, RadialSeries(-omega_map.coeffs))


def cohomological_residual(omega_map, Y, F, N, strip=None):
    """Size of ``[Omega] Y - T_N F + mean(F)``.

    Largest coefficient by default, or the weighted norm on ``strip``.
    """
    T, _ = truncate_fourier(F, N)
    diff = apply_bracket(omega_map, Y) - zero_mean(T)
    if strip is None:
        return diff.max_abs()
    return weighted_norm(diff, strip)


def solution_gain(omega0, delta, h=0.5, kmax=None, kind="mode"):
    """Ratio ``|Y|_{h - delta} / |F|_h`` for a constant frequency ``omega0``.

    ``kind="mode"`` takes the worst single Fourier mode ``|k| <= kmax``;
    ``kind="cauchy"`` uses the F whose coefficients saturate the Cauchy
    estimate, ``|F_k| = exp(-2 pi |k| h)`` for all ``0 < |k| <= kmax``.
    """
    if kmax is None:
        kmax = int(math.ceil(20.0 / delta))
    w = RadialSeries([float(omega0)])
    inner = StripParams(h - delta, 1.0)
    outer = StripParams(h, 1.0)
    if kind == "mode":
        best = 0.0
        for k in range(1, kmax + 1):
            F = FourierTaylorSeries(0, k, {(0, k): 1.0})
            Y = solve_cohomological(w, F, k)
            best = max(best, weighted_norm(Y, inner) / weighted_norm(F, outer))
        return best
    if kind == "cauchy":
        coeffs = {(0, k): math.exp(-2 * math.pi * k * h) for k in range(1, kmax + 1)}
        F = FourierTaylorSeries(0, kmax, coeffs)
        Y = solve_cohomological(w, F, kmax)
        return weighted_norm(Y, inner) / weighted_norm(F, outer)
    raise ValueError("kind must be 'mode' or 'cauchy'")


def fit_delta_exponent(deltas, gains):
    """Exponent ``a`` in a least-squares fit ``gain ~ C delta^{-a}``."""
    slope = np.polyfit(np.log(np.asarray(deltas, float)), np.log(np.asarray(gains, float)), 1)[0]
    return float(-slope)


def _bisect(fun, a, b, tol=1e-13, maxit=200):
    fa = fun(a)
    for _ in range(maxit):
        m = 0.5 * (a + b)
        if b - a <= tol:
            return m
        fm = fun(m)
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def twist_bounds(omega_map, interval, samples=513):
    """Min and max of ``omega'`` on a sample grid of ``interval``."""
    r = np.linspace(interval[0], interval[1], samples)
    d2 = omega_map.derivative()(r)
    return float(np.min(d2)), float(np.max(d2))


def locate_resonances(omega_map, N, K, interval, tau=1.0):
    """Zones around ``omega^{-1}(p/q)`` for reduced ``p/q`` with ``q <= N``.

    Radius is ``2 q^{-(tau+1)} K^{-1} / min |omega'|``.

    Raises
    ------
    NoTwist
        If ``omega'`` vanishes or changes sign on ``interval``.
    """
    if N <= 0:
        return []
    a, b = float(interval[0]), float(interval[1])
    if not a < b:
        raise ValueError("interval must be increasing")
    lo, hi = twist_bounds(omega_map, (a, b))
    if lo <= 0 < hi or lo < 0 <= hi or (lo == 0 and hi == 0):
        raise NoTwist("frequency map is not strictly monotone", min_twist=lo, max_twist=hi)
    twist = min(abs(lo), abs(hi))
    wa, wb = float(omega_map(a)), float(omega_map(b))
    wlo, whi = min(wa, wb), max(wa, wb)
    zones = []
    for q in range(1, N + 1):
        radius = 2.0 * q ** (-(tau + 1.0)) / K / twist
        for p in range(math.ceil(wlo * q), math.floor(whi * q) + 1):
            if math.gcd(p, q) != 1:
                continue
            target = p / q
            if not (wlo < target < whi):
                continue
            c = _bisect(lambda r, t=target: float(omega_map(r)) - t, a, b)
            zones.append(ResonanceZone(p, q, c, radius))
    zones.sort(key=lambda z: (z.center, z.q))
    return zones


def merge_zones(zones):
    """Union of zone intervals as a sorted list of disjoint ``(lo, hi)``."""
    iv = sorted(z.interval for z in zones)
    out = []
    for lo, hi in iv:
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def accumulate_zones(old, new):
    """Add ``new`` zones to ``old``; a repeated ``p/q`` keeps the larger radius."""
    table = {(z.p, z.q): z for z in old}
    for z in new:
        prev = table.get((z.p, z.q))
        if prev is None or z.radius > prev.radius:
            table[(z.p, z.q)] = z if prev is None else ResonanceZone(z.p, z.q, prev.center, z.radius)
    return sorted(table.values(), key=lambda z: (z.center, z.q))


def zones_to_csv(zones):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p", "q", "center", "radius"])
    for z in zones:
        w.writerow([z.p, z.q, repr(z.center), repr(z.radius)])
    return buf.getvalue()
