"""Quantified KAM conjugation steps on a real domain with resonance bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import NumericalError, SmallnessViolation
from .maps import GeneratingMap, conjugate_generating
from .series import FourierTaylorSeries, RadialSeries, StripParams, theta_mean, weighted_norm
from .small_divisors import accumulate_zones, locate_resonances, solve_cohomological


@dataclass(frozen=True)
class ScheduleConfig:
    """Constants of the step schedule.

    ``N_k = ceil(N0 exp(kappa k))``, ``eps_bar_k = exp(-N_k / (ln N_k)^a)``,
    ``K_k = eps_bar_k^(-k_exponent)``, ``delta_k = (ln N_k)^(-mu)``.
    """

    N0: float = 8.0
    kappa: float = 0.5
    a: float = 2.0
    mu: float = 2.0
    k_exponent: float = 0.45

    def N(self, k):
        return int(math.ceil(self.N0 * math.exp(self.kappa * k)))

    def eps_bar(self, N):
        return math.exp(-N / math.log(N) ** self.a)

    def entry(self, k):
        N = self.N(k)
        eb = self.eps_bar(N)
        return (N, eb ** (-self.k_exponent), math.log(N) ** (-self.mu))


DEFAULT_SCHEDULE = ScheduleConfig()


def default_schedule(steps, config=DEFAULT_SCHEDULE):
    """List of ``(N, K, delta)`` for ``steps`` consecutive steps."""
    return [config.entry(k) for k in range(steps)]


def envelope(N, a=2.0):
    """Target size ``exp(-N / (ln N)^a)``."""
    return math.exp(-N / math.log(N) ** a)


@dataclass(frozen=True)
class KamState:
    """Map ``Omega_k + F_k`` with accumulated exclusions.

    ``norms[0]`` is the size of the initial perturbation; each step appends
    the size of the new remainder on the shrunken strip.
    """

    step: int
    omega: RadialSeries
    f: FourierTaylorSeries
    strip: StripParams
    excluded: tuple = ()
    norms: tuple = ()

    @classmethod
    def from_map(cls, m):
        return cls(0, m.omega, m.f, m.strip, (), (weighted_norm(m.f, m.strip),))

    def as_map(self):
        return GeneratingMap(self.omega, self.f, self.strip, check=False)

    def to_dict(self):
        return {
            "step": self.step,
            "norm": self.norms[-1] if self.norms else None,
            "omega": self.omega.tolist(),
            "h": self.strip.h,
            "rho": self.strip.rho,
            "zones": [z.to_dict() for z in self.excluded],
        }


class KamHistory(list):
    """States visited by :func:`kam_iterate`; ``error`` tags an early stop."""

    def __init__(self, states=(), error=None, envelope=()):
        super().__init__(states)
        self.error = error
        self.envelope = list(envelope)

    @property
    def norms(self):
        return list(self[-1].norms) if self else []


def smallness_quantity(F, strip, K, delta, tau=1.0):
    """``K^2 delta^{-2(tau+1)} |F|`` (must stay below the smallness constant)."""
    return K**2 * delta ** (-2.0 * (tau + 1.0)) * weighted_norm(F, strip)


def kam_step(state, N, K, delta, tau=1.0, smallness_const=10.0, order=12, interval=None):
    """One conjugation step.

    The frequency absorbs the mean of F, the non-resonant part up to mode N
    is removed by conjugating with the solution of the cohomological
    equation, and the zones where ``|omega - p/q|`` is small are recorded.

    Raises
    ------
    SmallnessViolation
        If ``K^2 delta^{-2(tau+1)} |F| > smallness_const``.
    """
    if state.f.is_zero():
        return replace(state, step=state.step + 1)
    if delta >= state.strip.h:
        raise SmallnessViolation("strip exhausted: delta >= h", delta=delta, h=state.strip.h)
    q = smallness_quantity(state.f, state.strip, K, delta, tau)
    if q > smallness_const:
        raise SmallnessViolation(
            "perturbation too large for the step", quantity=q, bound=smallness_const, K=K, delta=delta
        )
    freq = state.omega.derivative()
    rho = state.strip.rho
    interval = interval or (-rho, rho)
    zones = locate_resonances(freq, N, K, interval, tau)
    mean = theta_mean(state.f)
    Y = solve_cohomological(freq, -state.f, N)
    m = GeneratingMap(state.omega, state.f, state.strip, check=False)
    conj = conjugate_generating(m, Y, order=order)
    new_omega = state.omega + mean
    new_f = conj.f - mean.to_series(conj.f.n_theta_max, conj.f.n_r_max)
    new_strip = StripParams(state.strip.h - delta, rho)
    return KamState(
        state.step + 1,
        new_omega,
        new_f,
        new_strip,
        tuple(accumulate_zones(state.excluded, zones)),
        tuple(state.norms) + (weighted_norm(new_f, new_strip),),
    )


def kam_iterate(initial, schedule, envelope_a=2.0, **kw):
    """Run :func:`kam_step` along ``schedule``; stop early on numerical errors.

    Returns
    -------
    KamHistory
        ``history[0]`` is ``initial``; ``history.error`` holds the error dict
        if a step failed; ``history.envelope`` lists ``exp(-N/(ln N)^a)``.
    """
    if not schedule:
        raise ValueError("schedule must be nonempty")
    hist = KamHistory([initial], envelope=[envelope(N, envelope_a) for N, _, _ in schedule])
    state = initial
    for N, K, delta in schedule:
        try:
            state = kam_step(state, N, K, delta, **kw)
        except NumericalError as exc:
            hist.error = exc.to_dict()
            break
        hist.append(state)
    return hist
