"""Birkhoff normal forms of twist maps around the circle ``r = 0``.

Two independent routes compute ``Xi(r) = omega0 r + Xi_2 r^2 + ...``:

* :func:`bnf_direct` solves for the family of formal invariant circles
  ``theta = psi + u(psi, A)``, ``r = A + v(psi, A)`` carried by the rotation
  ``psi -> psi + omega(A)``, normalized so that ``A`` is the action
  ``oint r dtheta``.  Exact symplectic changes of coordinates preserve the
  action, hence ``Xi'(A) = omega(A)``.
* :func:`bnf_quantified` conjugates the map repeatedly by solutions of the
  cohomological equation with the constant frequency ``omega0``; each step
  raises the r-valuation of the remainder by at least one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ResonantFrequency, SmallnessViolation
from .maps import GeneratingMap, conjugate_generating
from .series import (
    FourierTaylorSeries,
    RadialSeries,
    StripParams,
    compose_shift,
    differentiate,
    mul,
    substitute,
    theta_mean,
    weighted_norm,
    zero_mean,
)
from .small_divisors import solve_cohomological

DIVISOR_FLOOR = 1e-10
VALUATION_REL = 1e-11


@dataclass
class BnfResult:
    """Normal form ``xi`` (``xi[0] = 0``) with per-step diagnostics."""

    xi: RadialSeries
    step_norms: list = field(default_factory=list)
    conjugator_log: list = field(default_factory=list)
    valuations: list = field(default_factory=list)

    def to_dict(self):
        return {"xi": self.xi.tolist(), "step_norms": [float(x) for x in self.step_norms]}


def _check_map(m, M):
    if M < 1:
        raise ValueError("order M must be >= 1")
    f0 = m.f.coeffs[:2]
    if np.any(np.abs(f0) > 0):
        raise ValueError("perturbation must be O(r^2) so that r = 0 is an invariant circle")


def _omega0(m):
    return float(m.omega[1])


def _divisors(omega0, K):
    k = np.arange(-K, K + 1)
    d = np.exp(2j * np.pi * k * omega0) - 1.0
    small = (k != 0) & (np.abs(d) < DIVISOR_FLOOR)
    if np.any(small):
        raise ResonantFrequency("rotation is resonant at the needed modes", k=int(k[small][0]))
    return k, d


def _solve_shift_equation(rhs_row, k, d, sign):
    """Zero-mean ``w`` with ``sign * (w(psi + omega0) - w(psi)) = rhs`` mode by mode."""
    out = np.zeros_like(rhs_row)
    nz = k != 0
    out[nz] = rhs_row[nz] / (sign * d[nz])
    return out


def bnf_direct(m, M, n_theta_max=None):
    """Normal form through degree ``M`` from formal invariant circles.

    Parameters
    ----------
    m : GeneratingMap
        ``Omega'(0) = omega0`` must be non-resonant for the modes involved
        and ``F = O(r^2)``.
    M : int
        Highest degree of ``xi``.
    n_theta_max : int, optional
        Fourier box for the circle parametrization (defaults to that of F).

    Returns
    -------
    BnfResult
        ``xi`` with ``xi[1] = omega0``.
    """
    _check_map(m, M)
    K = n_theta_max or m.f.n_theta_max
    N = M
    w0 = _omega0(m)
    k, d = _divisors(w0, K)
    total = m.total().resize(N, K)
    total = total - float(total.coeff(0, 0).real)
    S_r = compose_shift(differentiate(total, "r"), RadialSeries([w0]))
    S_p = compose_shift(differentiate(total, "theta"), RadialSeries([w0]))
    # T(psi) = Omega''(0) + F_rr(psi + omega0, 0): coefficient of v in S_r
    T_row = differentiate(S_r, "r").coeffs[0]
    T0 = FourierTaylorSeries(0, K, T_row.reshape(1, -1))

    u = FourierTaylorSeries(N, K)
    v = FourierTaylorSeries(N, K)
    omega = np.zeros(N + 1)
    omega[0] = w0
    for n in range(1, N):
        om = RadialSeries(omega)
        u_plus = compose_shift(u, om)
        shift = u_plus + (om - w0).to_series(K, N)
        sr = substitute(S_r, shift, v)
        sp = substitute(S_p, shift, v)
        v_plus = compose_shift(v, om)
        e1 = (u_plus - u - sr + om.to_series(K, N)).coeffs[n]
        e2 = (v - v_plus - sp).coeffs[n]
        # v_n - v_n(psi + omega0) = -e2
        vn = _solve_shift_equation(-e2, k, d, -1.0)
        # action normalization: mean(v) = -mean(v u_psi) at order n
        vu = mul(v, differentiate(u, "theta")).coeffs[n, K]
        vn[K] = -vu
        # omega_n + u_n(psi+omega0) - u_n - T v_n = -e1
        Tv = mul(T0, FourierTaylorSeries(0, K, vn.reshape(1, -1))).coeffs[0]
        rhs = Tv - e1
        omega[n] = float(rhs[K].real)
        rhs = rhs.copy()
        rhs[K] = 0.0
        un = _solve_shift_equation(rhs, k, d, 1.0)
        uc = u.coeffs.copy()
        vc = v.coeffs.copy()
        uc[n] = un
        vc[n] = vn
        u = FourierTaylorSeries(N, K, uc)
        v = FourierTaylorSeries(N, K, vc)
    xi = np.zeros(M + 1)
    xi[1:] = omega[:M] / np.arange(1, M + 1)
    return BnfResult(RadialSeries(xi), conjugator_log=[u, v])


def shrinking_strips(strip, steps, c=None, eps=0.1):
    """Strips ``h_{l+1} = h_l - delta_l``, ``rho_{l+1} = exp(-delta_l) rho_l``.

    ``delta_l = c l^{-(1 + eps)}``; by default ``c`` spends half the width.
    """
    if c is None:
        c = 0.5 * strip.h / sum(l ** (-(1 + eps)) for l in range(1, steps + 2))
    out = [strip]
    for l in range(1, steps + 1):
        dl = c * l ** (-(1 + eps))
        s = out[-1]
        out.append(StripParams(s.h - dl, s.rho * math.exp(-dl)))
    return out


def _drop_constant(G):
    c = G.coeffs.copy()
    c[0, G.n_theta_max] = 0.0
    return G.with_coeffs(c, symmetrize=False)


def _valuation(rows, peak, rel=VALUATION_REL):
    """Lowest degree whose row is not roundoff relative to its running peak."""
    live = np.nonzero(rows > rel * peak)[0]
    return int(live[0]) if live.size else rows.size


def bnf_quantified(m, M, n_theta_max=None, p=5, blowup=1e6, keep_conjugators=False):
    """Normal form by repeated conjugation with constant-frequency solutions.

    The map is written ``omega0 r + P`` with ``P = Xi_k + G_k``, where
    ``Xi_k`` collects the theta-means absorbed so far.  Each step solves
    ``-[omega0] Y = G_k - mean(G_k)``, adds ``mean(G_k)`` to ``Xi`` and
    conjugates ``P``.  ``M - 1`` steps fix ``xi`` through degree ``M``.

    Parameters
    ----------
    p : int
        Number of pre-normalization steps assumed before the first recorded
        step; only used to label the expected valuation ``k + p + 1``.
    blowup : float
        Raise :class:`SmallnessViolation` if a step norm exceeds ``blowup``
        times the first one.
    """
    _check_map(m, M)
    K = n_theta_max or m.f.n_theta_max
    N = M
    w0 = _omega0(m)
    _divisors(w0, K)
    lin = RadialSeries([0.0, w0])
    P = _drop_constant(m.total().resize(N, K) - lin.to_series(K, N))
    xi_tail = RadialSeries(np.zeros(N + 1))
    steps = max(M - 1, 0)
    strips = shrinking_strips(m.strip, max(steps, 1))
    norms, log, vals = [], [], []
    peak = np.zeros(N + 1)
    for step in range(steps):
        G = P - xi_tail.to_series(K, N)
        norms.append(weighted_norm(G, strips[step]))
        rows = np.abs(G.coeffs).max(axis=1)
        peak = np.maximum(peak, rows)
        vals.append(_valuation(rows, peak))
        if norms[0] > 0 and norms[-1] > blowup * norms[0]:
            raise SmallnessViolation("normal-form steps blow up", step=step, norm=norms[-1])
        xi_tail = xi_tail + theta_mean(G)
        Y = solve_cohomological(RadialSeries([w0]), -G, K, DIVISOR_FLOOR)
        if keep_conjugators:
            log.append(Y)
        if not Y.is_zero():
            cur = GeneratingMap(lin, P, strips[step], check=False)
            P = _drop_constant(conjugate_generating(cur, Y, order=N + 2).f)
    coeffs = xi_tail.resize(M).coeffs.copy()
    coeffs[0] = 0.0
    coeffs[1] += w0
    return BnfResult(RadialSeries(coeffs), step_norms=norms, conjugator_log=log, valuations=vals)


def bnf_truncation_compare(full, other, rho=None):
    """Largest discrepancy of ``xi`` over the shared leading block.

    With ``rho`` the block is further limited to the first ``floor(rho^-3)``
    coefficients.
    """
    a = np.asarray(full.xi.coeffs)
    b = np.asarray(other.xi.coeffs)
    n = min(a.size, b.size)
    if rho is not None:
        n = min(n, int(math.floor(rho ** (-3))))
    if n == 0:
        return 0.0
    return float(np.max(np.abs(a[:n] - b[:n])))


def compare_frequency_maps(omega1, omega2, annulus, samples=201):
    """``sup |Omega1' - Omega2'|`` on a uniform grid of ``annulus = (lo, hi)``."""
    r = np.linspace(annulus[0], annulus[1], samples)
    d1 = omega1.derivative()(r)
    d2 = omega2.derivative()(r)
    return float(np.max(np.abs(d1 - d2)))
