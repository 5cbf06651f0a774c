"""Exact-symplectic maps given by generating functions.

Convention: a generating function ``S(phi, r)`` defines the map
``(theta, r) -> (phi, R)`` implicitly through

    theta = phi - dS/dr(phi, r),     R = r - dS/dphi(phi, r).

For a radial ``Omega`` alone this is the twist ``(theta + Omega'(r), r)``.
A :class:`GeneratingMap` carries ``S = Omega + F`` with ``F`` small.

Composition rule used throughout: with ``f_S`` applied first and ``f_T``
second, the composite is generated by

    H(phi, r) = S(phi + u, r) + T(phi, r + v) + u v,
    u = -T_r(phi, r + v),   v = -S_phi(phi + u, r).

In particular ``f_T o f_S = f_{S + T}`` when ``S`` does not depend on theta or
``T`` does not depend on r.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import bernoulli

from .errors import DivergedIteration, NoContraction, OutOfDomain, StepFailure
from .series import (
    FourierTaylorSeries,
    RadialSeries,
    StripParams,
    add,
    compose_shift,
    differentiate,
    mul,
    poisson_bracket,
    radial_taylor_difference,
    substitute,
    weighted_norm,
)

FP_TOL = 1e-14
FP_MAXIT = 100


@dataclass(frozen=True)
class PhasePoint:
    """A point of the annulus; ``theta`` is kept as a real lift."""

    theta: float
    r: float

    def __post_init__(self):
        if not (np.isfinite(self.theta) and np.isfinite(self.r)):
            raise ValueError("phase point must be finite")

    def as_array(self):
        return np.array([self.theta, self.r], dtype=float)


class GeneratingMap:
    """The map ``f_{Omega + F}`` with strip parameters.

    Parameters
    ----------
    omega : RadialSeries
    f : FourierTaylorSeries
    strip : StripParams
    check : bool
        Verify the contraction conditions ``|F_r| < h`` and ``|F_{r theta}| < 1``
        (coefficient norm on the strip) that make the implicit solve well posed.
    r_bound : float, optional
        Orbits leaving ``|r| <= r_bound`` raise :class:`OutOfDomain`.
    meta : dict, optional
        Free-form annotations (kept through JSON round trips).
    """

    def __init__(self, omega, f=None, strip=None, check=True, r_bound=None, meta=None):
        if not isinstance(omega, RadialSeries):
            omega = RadialSeries(omega)
        self.omega = omega
        if f is None:
            f = FourierTaylorSeries(max(omega.n_r_max, 2), 1)
        self.f = f
        self.strip = strip if strip is not None else StripParams(1.0, 0.5)
        self.r_bound = r_bound
        self.meta = dict(meta or {})
        self._d = None
        if check:
            self.check_contraction()

    # -- derived data -----------------------------------------------------
    def check_contraction(self):
        fr = weighted_norm(differentiate(self.f, "r"), self.strip)
        frt = weighted_norm(differentiate(differentiate(self.f, "r"), "theta"), self.strip)
        if not (fr < self.strip.h and frt < 1.0):
            raise NoContraction(
                "generating function too large for the implicit solve",
                norm_f_r=fr,
                norm_f_rtheta=frt,
                h=self.strip.h,
            )
        return fr, frt

    @property
    def derivs(self):
        """Cached derivative series of F and Omega."""
        if self._d is None:
            f = self.f
            fp = differentiate(f, "theta")
            fr = differentiate(f, "r")
            d = {
                "f_phi": fp,
                "f_r": fr,
                "f_pp": differentiate(fp, "theta"),
                "f_pr": differentiate(fp, "r"),
                "f_rr": differentiate(fr, "r"),
                "w": self.omega.derivative(),
                "w2": self.omega.derivative(2),
            }
            d["r_free"] = fr.is_zero()
            self._d = d
        return self._d

    def frequency(self, r):
        """``Omega'(r)``."""
        return self.omega.derivative()(r)

    def total(self):
        """``Omega + F`` as a single series."""
        return add(self.f, self.omega.to_series(self.f.n_theta_max, self.f.n_r_max))

    def with_f(self, f, **kw):
        return GeneratingMap(self.omega, f, kw.pop("strip", self.strip), r_bound=self.r_bound, meta=self.meta, **kw)

    # -- evaluation -------------------------------------------------------
    def apply(self, theta, r):
        """Vectorized map evaluation on arrays; returns ``(phi, R)``."""
        theta = np.asarray(theta, dtype=float)
        r = np.asarray(r, dtype=float)
        self._check_domain(theta, r)
        d = self.derivs
        phi0 = theta + d["w"](r)
        if d["r_free"]:
            phi = phi0
        else:
            phi = phi0 + d["f_r"](phi0, r)
            for _ in range(FP_MAXIT):
                new = phi0 + d["f_r"](phi, r)
                err = np.max(np.abs(new - phi) / np.maximum(1.0, np.abs(new)), initial=0.0)
                phi = new
                if not np.isfinite(err):
                    raise OutOfDomain("implicit solve produced non-finite iterates")
                if err <= FP_TOL:
                    break
            else:
                raise NoContraction("angle fixed point did not converge in %d iterations" % FP_MAXIT)
        R = r - d["f_phi"](phi, r)
        self._check_domain(phi, R)
        return phi, R

    def apply_inverse(self, phi, R):
        """Vectorized inverse; returns ``(theta, r)``."""
        phi = np.asarray(phi, dtype=float)
        R = np.asarray(R, dtype=float)
        self._check_domain(phi, R)
        d = self.derivs
        r = R + d["f_phi"](phi, R)
        for _ in range(FP_MAXIT):
            new = R + d["f_phi"](phi, r)
            err = np.max(np.abs(new - r) / np.maximum(1.0, np.abs(new)), initial=0.0)
            r = new
            if not np.isfinite(err):
                raise OutOfDomain("implicit solve produced non-finite iterates")
            if err <= FP_TOL:
                break
        else:
            raise NoContraction("action fixed point did not converge in %d iterations" % FP_MAXIT)
        theta = phi - d["w"](r) - d["f_r"](phi, r)
        self._check_domain(theta, r)
        return theta, r

    def jacobian_arrays(self, theta, r):
        """Jacobians at many points, shape ``(..., 2, 2)``."""
        theta = np.asarray(theta, dtype=float)
        r = np.asarray(r, dtype=float)
        phi, R = self.apply(theta, r)
        d = self.derivs
        frp = d["f_pr"](phi, r)
        frr = d["f_rr"](phi, r)
        fpp = d["f_pp"](phi, r)
        w2 = d["w2"](r)
        den = 1.0 - frp
        p_t = 1.0 / den
        p_r = (w2 + frr) / den
        R_t = -fpp * p_t
        R_r = 1.0 - frp - fpp * p_r
        J = np.empty(np.shape(phi) + (2, 2))
        J[..., 0, 0] = p_t
        J[..., 0, 1] = p_r
        J[..., 1, 0] = R_t
        J[..., 1, 1] = R_r
        return J

    def _check_domain(self, theta, r):
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(r))):
            raise OutOfDomain("non-finite coordinates")
        if self.r_bound is not None and np.any(np.abs(r) > self.r_bound):
            raise OutOfDomain("orbit left |r| <= %g" % self.r_bound, r_max=float(np.max(np.abs(r))))

    # -- serialization ----------------------------------------------------
    def to_dict(self):
        d = {
            "omega": self.omega.tolist(),
            "f": self.f.to_dict(),
            "h": self.strip.h,
            "rho": self.strip.rho,
        }
        if self.r_bound is not None:
            d["r_bound"] = self.r_bound
        if self.meta:
            d["meta"] = self.meta
        return d

    @classmethod
    def from_dict(cls, d, check=True):
        return cls(
            RadialSeries(d["omega"]),
            FourierTaylorSeries.from_dict(d["f"]),
            StripParams(float(d["h"]), float(d["rho"])),
            check=check,
            r_bound=d.get("r_bound"),
            meta=d.get("meta"),
        )

    def __repr__(self):
        return "GeneratingMap(omega=%r, f=%r, strip=%r)" % (self.omega, self.f, self.strip)


def load_map(path, check=True):
    with open(path) as fh:
        return GeneratingMap.from_dict(json.load(fh), check=check)


def save_map(m, path):
    with open(path, "w") as fh:
        json.dump(m.to_dict(), fh, indent=1)


def standard_map(K, n_r_max=4, n_theta_max=4, omega0=0.0, strip=None):
    """Standard map in generating-function form: ``R = r + (K/2pi) sin(2 pi phi)``.

    ``Omega = omega0 r + r^2/2`` and ``F = (K / 4 pi^2) cos(2 pi phi)``.
    """
    omega = RadialSeries([0.0, omega0, 0.5] + [0.0] * max(0, n_r_max - 2))
    f = FourierTaylorSeries.cos_mode(0, 1, K / (4 * np.pi**2), n_r_max, n_theta_max)
    return GeneratingMap(omega, f, strip or StripParams(0.1, 1.0), check=False)


def twist_map(omega, n_theta_max=4, strip=None):
    omega = omega if isinstance(omega, RadialSeries) else RadialSeries(omega)
    return GeneratingMap(omega, FourierTaylorSeries(omega.n_r_max, n_theta_max), strip)


def _as_point(x):
    if isinstance(x, PhasePoint):
        return x
    th, r = x
    return PhasePoint(float(th), float(r))


def eval_map(m, x):
    """Image of a point under ``f_{Omega+F}``."""
    x = _as_point(x)
    phi, R = m.apply(np.array([x.theta]), np.array([x.r]))
    return PhasePoint(float(phi[0]), float(R[0]))


def jacobian(m, x):
    """2x2 derivative of the map at ``x``."""
    x = _as_point(x)
    return m.jacobian_arrays(np.array(x.theta), np.array(x.r))


def invert_map(m, y):
    """Preimage of ``y``."""
    y = _as_point(y)
    th, r = m.apply_inverse(np.array([y.theta]), np.array([y.r]))
    return PhasePoint(float(th[0]), float(r[0]))


def iterate_map(m, theta, r, n):
    """Apply the map ``n`` times to arrays of points."""
    theta = np.asarray(theta, dtype=float)
    r = np.asarray(r, dtype=float)
    for _ in range(n):
        theta, r = m.apply(theta, r)
    return theta, r


# ---------------------------------------------------------------------------
# Hamiltonian flows
# ---------------------------------------------------------------------------


def _hamiltonian_parts(H):
    if isinstance(H, RadialSeries):
        return H, None
    if isinstance(H, FourierTaylorSeries):
        return None, H
    if isinstance(H, (tuple, list)):
        rad = [h for h in H if isinstance(h, RadialSeries)]
        ser = [h for h in H if isinstance(h, FourierTaylorSeries)]
        R = None
        for h in rad:
            R = h if R is None else R + h
        S = None
        for h in ser:
            S = h if S is None else add(S, h)
        return R, S
    raise TypeError("Hamiltonian must be a series, a radial series, or a tuple of them")


class _VectorField:
    def __init__(self, H):
        rad, ser = _hamiltonian_parts(H)
        self.rad_d = rad.derivative() if rad is not None else None
        self.rad = rad
        self.ser = ser
        if ser is not None:
            self.s_t = differentiate(ser, "theta")
            self.s_r = differentiate(ser, "r")

    def __call__(self, theta, r):
        dth = np.zeros_like(theta)
        dr = np.zeros_like(r)
        if self.rad_d is not None:
            dth = dth + self.rad_d(r)
        if self.ser is not None:
            dth = dth + self.s_r(theta, r)
            dr = dr - self.s_t(theta, r)
        return dth, dr

    def energy(self, theta, r):
        e = np.zeros_like(np.asarray(theta, dtype=float))
        if self.rad is not None:
            e = e + self.rad(r)
        if self.ser is not None:
            e = e + self.ser(theta, r)
        return e


FLOW_RTOL = 1e-13
FLOW_ATOL = 1e-13


def flow_arrays(H, theta, r, t, rtol=FLOW_RTOL, atol=FLOW_ATOL):
    """Time-``t`` map of ``theta' = H_r, r' = -H_theta`` on arrays of points."""
    theta = np.asarray(theta, dtype=float)
    r = np.asarray(r, dtype=float)
    shape = np.broadcast(theta, r).shape
    th0 = np.broadcast_to(theta, shape).ravel()
    r0 = np.broadcast_to(r, shape).ravel()
    n = th0.size
    if t == 0 or n == 0:
        return th0.reshape(shape).copy(), r0.reshape(shape).copy()
    field_ = _VectorField(H)

    def rhs(_, y):
        a, b = field_(y[:n], y[n:])
        return np.concatenate([a, b])

    sol = solve_ivp(rhs, (0.0, float(t)), np.concatenate([th0, r0]), method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise StepFailure("flow integration failed: %s" % sol.message)
    y = sol.y[:, -1]
    if not np.all(np.isfinite(y)):
        raise StepFailure("flow integration produced non-finite values")
    return y[:n].reshape(shape), y[n:].reshape(shape)


def flow(H, x, t, rtol=FLOW_RTOL, atol=FLOW_ATOL):
    """Time-``t`` flow of the Hamiltonian ``H`` from the point ``x``."""
    x = _as_point(x)
    th, r = flow_arrays(H, np.array([x.theta]), np.array([x.r]), t, rtol, atol)
    return PhasePoint(float(th[0]), float(r[0]))


def hamiltonian_value(H, theta, r):
    return _VectorField(H).energy(np.asarray(theta, dtype=float), np.asarray(r, dtype=float))


# ---------------------------------------------------------------------------
# series-level composition, inversion, conjugation
# ---------------------------------------------------------------------------


def _iterate_pair(update, u, v, maxit, tol, rho=0.1):
    """Fixed point of ``(u, v) -> update(u, v)`` in series arithmetic.

    Progress is measured in the coefficient norm at radius ``rho``: the
    iteration contracts there even when high Taylor coefficients are large.
    Stops when the update is below ``tol`` relative to the iterate, or when it
    stagnates at roundoff level.
    """
    p = StripParams(1e-12, rho)
    best = np.inf
    stale = 0
    change = np.inf
    for _ in range(maxit):
        nu, nv = update(u, v)
        change = max(weighted_norm(nu - u, p), weighted_norm(nv - v, p))
        scale = max(weighted_norm(nu, p), weighted_norm(nv, p), 1e-300)
        u, v = nu, nv
        if change <= tol * scale or change < 1e-300:
            return u, v
        if change < best * 0.5:
            best = change
            stale = 0
        else:
            stale += 1
            if stale >= 3 and change <= 1e-11 * scale:
                return u, v
    raise NoContraction("series fixed point did not settle in %d iterations" % maxit, change=change)


def compose_maps(first, second, order=12, tol=1e-15, rho=0.1):
    """Small part of the generating function of ``f_second o f_first``.

    Parameters
    ----------
    first, second : tuple (RadialSeries or None, FourierTaylorSeries)
        ``(Omega_i, F_i)`` pairs; ``first`` is applied first.
    order : int
        Iteration cap for the fixed point and Taylor degree cap.

    rho : float
        Radius of the coefficient norm used to judge convergence.

    Returns
    -------
    FourierTaylorSeries
        ``H - Omega_1 - Omega_2`` where ``H`` generates the composite.
    """
    om1, F1 = first
    om2, F2 = second
    N = max(F1.n_r_max, F2.n_r_max)
    K = max(F1.n_theta_max, F2.n_theta_max)
    F1 = F1.resize(N, K)
    F2 = F2.resize(N, K)
    if om1 is not None:
        om1 = om1.resize(N)
    if om2 is not None and np.any(om2.coeffs[1:]):
        w2 = om2.resize(N).derivative()
        w2p = w2.derivative()
        F1s = compose_shift(F1, RadialSeries(-w2.coeffs))
        has_twist = True
    else:
        F1s = F1
        w2p = None
        has_twist = False
    F1s_p = differentiate(F1s, "theta")
    F2_r = differentiate(F2, "r")
    zero = FourierTaylorSeries(N, K)

    def update(ut, v):
        # ut is u + Omega_2'(r): the small angular correction
        nv = -substitute(F1s_p, u=ut, order=order)
        nu = -substitute(F2_r, v=nv, order=order)
        if has_twist:
            nu = nu - radial_taylor_difference(w2, nv, K)
        return nu, nv

    if F1.is_zero() and F2.is_zero():
        return zero
    ut, v = _iterate_pair(update, zero, zero, maxit=max(order, 4) * 8, tol=tol, rho=rho)
    H = add(substitute(F1s, u=ut, order=order), substitute(F2, v=v, order=order))
    H = add(H, mul(ut, v))
    if has_twist:
        H = add(H, radial_taylor_difference(om2.resize(N), v, K, start=2))
    return H


def compose_generating(F, G, order=12):
    """``H`` with ``f_H = f_G o f_F`` (``F`` applied first), no twist terms."""
    return compose_maps((None, F), (None, G), order=order)


def inverse_generating(Y, order=12, tol=1e-15, rho=0.1):
    """``Z`` with ``f_Z = f_Y^{-1}``.

    Solves ``a = Y_r(theta + a, R + b)``, ``b = Y_phi(theta + a, R + b)`` and
    returns ``Z = a b - Y(theta + a, R + b)``.
    """
    Yr = differentiate(Y, "r")
    Yp = differentiate(Y, "theta")
    zero = FourierTaylorSeries(Y.n_r_max, Y.n_theta_max)
    if Y.is_zero():
        return zero

    def update(a, b):
        return substitute(Yr, a, b, order=order), substitute(Yp, a, b, order=order)

    a, b = _iterate_pair(update, zero, zero, maxit=max(order, 4) * 8, tol=tol, rho=rho)
    return add(mul(a, b), -substitute(Y, a, b, order=order))


def conjugate_generating(m, Y, order=12, rho=None):
    """Map ``m'`` with ``f_{m'} = f_Y o f_m o f_Y^{-1}``.

    The twist part is unchanged; to first order in ``Y`` the new perturbation
    is ``F + Y - Y o f_Omega^{-1} + {F, Y}``-type terms.
    """
    N = max(m.f.n_r_max, Y.n_r_max)
    K = max(m.f.n_theta_max, Y.n_theta_max)
    F = m.f.resize(N, K)
    Y = Y.resize(N, K)
    if Y.is_zero():
        return m
    rho = m.strip.rho if rho is None else rho
    Z = inverse_generating(Y, order=order, rho=rho)
    A = compose_maps((None, Z), (m.omega, F), order=order, rho=rho)
    H = compose_maps((m.omega, A), (None, Y), order=order, rho=rho)
    return GeneratingMap(m.omega, H, m.strip, check=False, r_bound=m.r_bound, meta=m.meta)


# ---------------------------------------------------------------------------
# interpolation of a map by a Hamiltonian flow
# ---------------------------------------------------------------------------


def time_one_generating(Pi, max_terms=60, tol=1e-19):
    """Generating function of the time-1 flow of ``Pi`` via a Lie series.

    ``Phi(theta, r) = (theta + A, r + B)`` with ``A = sum L^{n-1}(Pi_r)/n!`` and
    ``B = -sum L^{n-1}(Pi_theta)/n!`` where ``L g = {g, Pi}``.  The result ``S``
    satisfies ``S_r(phi, r) = A(phi - a, r)`` and ``S_phi = -B(phi - a, r)``.
    """
    N, K = Pi.n_r_max, Pi.n_theta_max
    termA = differentiate(Pi, "r")
    termB = -differentiate(Pi, "theta")
    A = termA
    B = termB
    scale = max(A.l1(), B.l1(), 1e-300)
    fact = 1.0
    for n in range(2, max_terms + 1):
        termA = poisson_bracket(termA, Pi)
        termB = poisson_bracket(termB, Pi)
        fact *= n
        if max(termA.l1(), termB.l1()) / fact <= tol * scale:
            break
        A = add(A, termA / fact)
        B = add(B, termB / fact)
    else:
        raise DivergedIteration("Lie series of the flow did not converge")
    # a = A(phi - a, r)
    a = A
    for _ in range(FP_MAXIT):
        new = substitute(A, u=-a)
        change = new.distance(a)
        a = new
        if change <= 1e-17 * max(a.max_abs(), 1e-300):
            break
    else:
        raise NoContraction("angle inversion for the flow map did not settle")
    b = substitute(B, u=-a)
    k = np.arange(-K, K + 1)
    c = np.zeros((N + 1, 2 * K + 1), dtype=complex)
    nz = k != 0
    c[:, nz] = -b.coeffs[:, nz] / (2j * np.pi * k[nz])[None, :]
    a0 = a.coeffs[:, K].real
    c[1:, K] = a0[:-1] / np.arange(1, N + 1)
    return FourierTaylorSeries(N, K, c)


def _grid(strip, n_theta=16, n_r=8, frac=0.5):
    th = (np.arange(n_theta) + 0.5) / n_theta
    rr = np.linspace(-frac * strip.rho, frac * strip.rho, n_r)
    return np.meshgrid(th, rr, indexing="ij")


def flow_map_residual(m, Pi, n_theta=16, n_r=8):
    """Grid sup of ``|f_{Omega+F}(x) - Phi_Pi(x)|``."""
    T, R = _grid(m.strip, n_theta, n_r)
    p1, r1 = m.apply(T, R)
    p2, r2 = flow_arrays(Pi, T, R, 1.0)
    return float(max(np.abs(p1 - p2).max(), np.abs(r1 - r2).max()))


_BERNOULLI_TERMS = 40


def _bernoulli_multiplier():
    # Taylor coefficients of x / (1 - exp(-x))
    b = bernoulli(_BERNOULLI_TERMS).astype(float)
    b[1] = 0.5
    return b / np.array([math.factorial(n) for n in range(_BERNOULLI_TERMS + 1)], dtype=float)


def _precondition(residual, omega):
    """Approximate inverse of the linearized map ``P -> S(Phi_{Omega+P}) - Omega``.

    Mode ``k`` of that linearization is multiplied by ``(1 - e^{-x}) / x`` with
    ``x = 2 pi i k Omega'(r)``, so the correction divides it back out.
    """
    N, K = residual.n_r_max, residual.n_theta_max
    w = omega.resize(N).derivative().coeffs
    g = _bernoulli_multiplier()
    c = np.array(residual.coeffs)
    for j, k in enumerate(range(-K, K + 1)):
        if k == 0 or not np.any(c[:, j]):
            continue
        x = 2j * np.pi * k * w
        acc = np.zeros(N + 1, dtype=complex)
        for gn in g[::-1]:
            acc = np.convolve(acc, x)[: N + 1]
            acc[0] += gn
        c[:, j] = np.convolve(acc, c[:, j])[: N + 1]
    return FourierTaylorSeries(N, K, c)


def interpolate_flow(m, steps=5, residual_grid=(16, 8)):
    """Hamiltonian ``Pi`` whose time-1 flow reproduces ``m``.

    Starting from ``Pi = Omega + F`` the mismatch ``S_target - S(Phi_Pi)`` of
    generating functions is fed back through an approximate inverse of its
    linearization (a quasi-Newton step).  Only meaningful for maps close to
    the identity, i.e. ``|k Omega'| < 1`` on the modes present.

    Returns
    -------
    (Pi, residual)
        ``residual`` is the grid sup distance after the last step.
    """
    Pi, history = _interpolate(m, steps, residual_grid, strict=True)
    return Pi, history[-1]


def _interpolate(m, steps, residual_grid, strict):
    target = m.total()
    Pi = target
    history = [flow_map_residual(m, Pi, *residual_grid)]
    grow = 0
    for _ in range(steps):
        corr = _precondition(add(target, -time_one_generating(Pi)), m.omega)
        Pi = add(Pi, corr)
        res = flow_map_residual(m, Pi, *residual_grid)
        grow = grow + 1 if (res > history[-1] and res > 1e-13) else 0
        history.append(res)
        if strict and grow >= 3:
            raise DivergedIteration("flow interpolation residual grew three times", history=history)
        if corr.max_abs() < 1e-300:
            break
    return Pi, history


def interpolation_history(m, steps=5, residual_grid=(16, 8)):
    """Residuals after each refinement step (for diagnostics)."""
    return _interpolate(m, steps, residual_grid, strict=False)[1]


__all__ = [
    "PhasePoint",
    "GeneratingMap",
    "standard_map",
    "twist_map",
    "eval_map",
    "jacobian",
    "invert_map",
    "iterate_map",
    "flow",
    "flow_arrays",
    "hamiltonian_value",
    "compose_maps",
    "compose_generating",
    "inverse_generating",
    "conjugate_generating",
    "time_one_generating",
    "interpolate_flow",
    "interpolation_history",
    "load_map",
    "save_map",
]
