"""Resonant normal form near ``p/q``, pendulum reduction and the residue test.

Near a resonance the map is ``R_{p/q}`` composed with the time-1 flow of a
Hamiltonian ``Pi`` that is ``1/q``-periodic in theta.  Unfolding
``(theta, r) -> (q theta, q r)`` and dividing by the curvature gives

    Pi_q(t, r) = (1 + f2(t)) r^2 + f1(t) r + f0(t) + r^3 f(t, r)
               = (1 + f2) (r - e0)^2 - e1 + r^3 f.

The level sets ``Pi_q(t, g(t, z)) = z^2`` define ``g``; its theta-average
``Gamma`` and the inverse ``h`` linearize the flow.  Dropping the cubic part
gives the model functions ``g~``, ``Gamma~``, ``h~`` whose Laurent expansion
carries the obstruction ``int (1 + f2)^(-1/2) e1^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BranchViolation, NewtonDiverged, NoContraction, NoTwist
from .maps import GeneratingMap, conjugate_generating, interpolate_flow
from .series import FourierTaylorSeries, RadialSeries, StripParams, mode_filter, weighted_norm
from .small_divisors import solve_cohomological

N_GRID = 256
DEFAULT_L = 10.0
G_TOL = 1e-13
G_MAXIT = 200
NEWTON_MAXIT = 60


# ---------------------------------------------------------------------------
# periodic data on a uniform grid
# ---------------------------------------------------------------------------


def theta_grid(n=N_GRID):
    return np.arange(n) / n


def _as_samples(x, n):
    """Samples of a periodic function: callable, scalar or array of length n."""
    if callable(x):
        return np.asarray(x(theta_grid(n)), dtype=float) * np.ones(n)
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        return np.full(n, float(a))
    if a.shape != (n,):
        raise ValueError("samples must have length %d" % n)
    return a.copy()


def trig_interpolate(values, theta):
    """Evaluate the trigonometric interpolant of grid ``values`` at ``theta``."""
    values = np.asarray(values)
    n = values.size
    c = np.fft.fft(values) / n
    k = np.fft.fftfreq(n, 1.0 / n)
    if n % 2 == 0:
        # split the Nyquist mode symmetrically so real data stays real
        c = np.append(c, c[n // 2] / 2)
        c[n // 2] /= 2
        k = np.append(k, n // 2)
        k[n // 2] = -n // 2
    th = np.asarray(theta, dtype=float)
    out = np.exp(2j * np.pi * np.multiply.outer(th, k)) @ c
    return out.real if np.isrealobj(values) else out


# ---------------------------------------------------------------------------
# resonant / non-resonant splitting
# ---------------------------------------------------------------------------


def resonant_split(F, q):
    """``(res, nonres)``: modes with ``q | k`` and the rest; ``res + nonres = F``."""
    if q < 1:
        raise ValueError("q must be >= 1")
    res = mode_filter(F, lambda k: k % q == 0)
    nonres = mode_filter(F, lambda k: k % q != 0)
    return res, nonres


def recenter_series(F, center):
    """Coefficients of ``(theta, r) -> F(theta, center + r)`` (same truncation)."""
    N = F.n_r_max
    c = F.coeffs
    out = np.zeros_like(c)
    for j in range(N + 1):
        w = np.array([math.comb(n, j) * center ** (n - j) for n in range(j, N + 1)])
        out[j] = w @ c[j:]
    return FourierTaylorSeries(N, F.n_theta_max, out)


def recenter_map(m, center, rho):
    """Map in the local radial variable ``r - center`` (constant part dropped)."""
    om = m.omega.shift_center(center)
    om = om - om[0]
    f = recenter_series(m.f, center)
    return GeneratingMap(om, f, StripParams(m.strip.h, rho), check=False, meta=m.meta)


def eliminate_nonresonant(m, zone, N_hat, steps, rho=None, order=12):
    """Remove the modes with ``q`` not dividing ``k`` by repeated conjugation.

    Works in the local variable ``r - zone.center`` on the disk of radius
    ``rho`` (default ``zone.radius``).  Near ``p/q`` the divisors of these
    modes stay away from zero.

    Returns
    -------
    (F_per, F_nper, log)
        The ``1/q``-periodic part, the remaining non-resonant part and a list
        of ``(Y, norm of F_nper)`` per step.
    """
    rho = zone.radius if rho is None else rho
    cur = recenter_map(m, zone.center, rho)
    freq = cur.omega.derivative()
    q = zone.q
    res, nonres = resonant_split(cur.f, q)
    log = []
    for _ in range(steps):
        if nonres.is_zero():
            break
        Y = solve_cohomological(freq, -nonres, N_hat, modes=lambda k: k % q != 0)
        if Y.is_zero():
            break
        cur = conjugate_generating(cur, Y, order=order)
        res, nonres = resonant_split(cur.f, q)
        log.append((Y, weighted_norm(nonres, cur.strip)))
    return res, nonres, log


# ---------------------------------------------------------------------------
# pendulum reduction
# ---------------------------------------------------------------------------


@dataclass
class PendulumReduction:
    """Unfolded local Hamiltonian ``Pi_q`` sampled on a theta grid.

    ``f0, f1, f2, e0, e1`` are grid samples on ``theta_grid(n)``; ``cubic``
    holds the rows ``r^3, r^4, ...`` of ``r^3 f``.
    """

    p: int
    q: int
    center: float
    f0: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    cubic: np.ndarray
    e0: np.ndarray
    e1: np.ndarray
    curvature: float
    rho_q: float
    L: float = DEFAULT_L
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.f0.size

    @property
    def weight(self):
        """``(1 + f2)^(-1/2)``."""
        return (1.0 + self.f2) ** -0.5

    @property
    def gamma(self):
        return float(np.mean(self.weight))

    @property
    def eps0(self):
        return float(np.max(np.abs(self.e0)))

    @property
    def eps1(self):
        return float(np.max(np.abs(self.e1)))

    @property
    def eps_bar(self):
        parts = [np.max(np.abs(self.f0)), np.max(np.abs(self.f1))]
        if self.cubic.size:
            parts.append(np.max(np.abs(self.cubic)))
        return float(max(parts))

    @property
    def lam(self):
        """Inner cutoff ``L eps1^(1/2)``."""
        return self.L * math.sqrt(self.eps1)

    def normalization(self):
        """``int (1 + f2)^(-1/2) e1`` (zero after :func:`normalize`)."""
        return float(np.mean(self.weight * self.e1))

    def cubic_term(self, g):
        """``g^3 f(theta, g)`` for ``g`` of shape (..., n)."""
        out = np.zeros_like(g)
        for row in self.cubic[::-1]:
            out = (out + row) * g
        return out * g * g

    def cubic_derivative(self, g):
        """``d/dg [g^3 f(theta, g)]``."""
        out = np.zeros_like(g)
        deg = np.arange(3, 3 + len(self.cubic))
        for d, row in zip(deg[::-1], self.cubic[::-1]):
            out = out * g + d * row
        return out * g * g

    def hamiltonian(self, r):
        """``Pi_q(theta_j, r)`` on the grid; ``r`` broadcasts against (n,)."""
        r = np.asarray(r)
        return (1.0 + self.f2) * r * r + self.f1 * r + self.f0 + self.cubic_term(r * np.ones(self.n))

    def to_dict(self):
        return {
            "p": self.p,
            "q": self.q,
            "center": self.center,
            "curvature": self.curvature,
            "rho_q": self.rho_q,
            "L": self.L,
            "lambda": self.lam,
            "eps0": self.eps0,
            "eps1": self.eps1,
        }


def _e_functions(f0, f1, f2):
    e0 = -0.5 * f1 / (1.0 + f2)
    e1 = -f0 + 0.25 * f1 * f1 / (1.0 + f2)
    return e0, e1


def from_coefficients(f0=0.0, f1=0.0, f2=0.0, cubic=(), p=0, q=1, center=0.0, curvature=1.0,
                      rho_q=1.0, L=DEFAULT_L, n=N_GRID, normalize=True):
    """Reduction from explicit data (callables on [0, 1), scalars or samples).

    With ``normalize`` the additive constant of ``f0`` is fixed so that
    ``int (1 + f2)^(-1/2) e1 = 0``.
    """
    f0 = _as_samples(f0, n)
    f1 = _as_samples(f1, n)
    f2 = _as_samples(f2, n)
    if np.any(1.0 + f2 <= 0):
        raise NoTwist("1 + f2 must stay positive", min=float(np.min(1.0 + f2)))
    rows = np.array([_as_samples(c, n) for c in cubic]).reshape(-1, n)
    e0, e1 = _e_functions(f0, f1, f2)
    if normalize:
        w = (1.0 + f2) ** -0.5
        shift = float(np.mean(w * e1) / np.mean(w))
        f0 = f0 + shift
        e0, e1 = _e_functions(f0, f1, f2)
    return PendulumReduction(p, q, center, f0, f1, f2, rows, e0, e1, float(curvature), float(rho_q), L)


def unfold(Pi, q):
    """``q^2 Pi(t/q, r/q)`` for a ``1/q``-periodic ``Pi`` (other modes dropped)."""
    K = Pi.n_theta_max // q
    c = Pi.coeffs
    mid = Pi.n_theta_max
    idx = mid + q * np.arange(-K, K + 1)
    out = c[:, idx].copy()
    n = np.arange(Pi.n_r_max + 1)
    out *= (q ** (2.0 - n))[:, None]
    return FourierTaylorSeries(Pi.n_r_max, K, out)


def _row_samples(S, n):
    t = theta_grid(n)
    k = np.arange(-S.n_theta_max, S.n_theta_max + 1)
    E = np.exp(2j * np.pi * np.outer(k, t))
    return (S.coeffs @ E).real


def pendulum_reduce(m, zone, L=DEFAULT_L, rho=None, N_hat=None, steps=0, interp_steps=5, n=N_GRID):
    """Pendulum model of ``m`` at the resonance of ``zone``.

    The map is recentered at ``zone.center``, optionally freed of
    non-resonant modes (``steps`` conjugations up to mode ``N_hat``; with
    ``steps = 0`` they are simply dropped), stripped of the rotation ``p/q``,
    interpolated by a flow, unfolded by ``q`` and divided by the curvature
    ``c = Omega''(center) / 2``.

    Raises
    ------
    NoTwist
        If the curvature vanishes.
    """
    rho = zone.radius if rho is None else rho
    p, q = zone.p, zone.q
    c = 0.5 * float(m.omega.derivative(2)(zone.center))
    if abs(c) < 1e-14:
        raise NoTwist("no twist at the resonance center", curvature=c)
    if steps > 0:
        F_per, _, _ = eliminate_nonresonant(m, zone, N_hat or m.f.n_theta_max, steps, rho=rho)
        local = recenter_map(m, zone.center, rho)
    else:
        local = recenter_map(m, zone.center, rho)
        F_per, _ = resonant_split(local.f, q)
    om = local.omega - RadialSeries([0.0, p / q])
    Pi, residual = interpolate_flow(GeneratingMap(om, F_per, local.strip, check=False), steps=interp_steps)
    Pq = unfold(Pi, q)
    rows = _row_samples(Pq, n) / c
    rows = np.vstack([rows, np.zeros((max(0, 3 - rows.shape[0]), n))])
    red = from_coefficients(rows[0], rows[1], rows[2] - 1.0, rows[3:], p=p, q=q, center=zone.center,
                            curvature=c, rho_q=q * rho, L=L, n=n)
    red.meta["interpolation_residual"] = float(residual)
    return red


# ---------------------------------------------------------------------------
# g, Gamma, h
# ---------------------------------------------------------------------------


def sqrt_branch(z, a):
    """``m_a(z) = (z^2 + a)^(1/2)`` with ``m_a(z) ~ z`` at infinity.

    Defined for ``|z| > |a|^(1/2)``; vectorized.

    Raises
    ------
    BranchViolation
        If some ``|z| <= |a|^(1/2)``.
    """
    z = np.asarray(z, dtype=complex)
    a = np.asarray(a, dtype=complex)
    if np.any(np.abs(z) ** 2 <= np.abs(a)):
        raise BranchViolation("inside the branch disk |z| <= |a|^(1/2)")
    out = z * np.sqrt(1.0 + a / (z * z))
    return out if out.ndim else complex(out)


def _check_annulus(red, z):
    lo = red.lam / 8.0
    if lo > 0 and np.any(np.abs(z) < lo):
        raise BranchViolation("z inside the inner cutoff lambda/8", lam=red.lam)


def solve_g(red, z, truncated=False):
    """Samples ``g(theta_j, z)`` solving ``Pi_q(theta, g) = z^2``.

    ``z`` may be an array; the result has shape ``z.shape + (n,)``.  With
    ``truncated`` the cubic part is dropped (closed form, no iteration).

    Raises
    ------
    NoContraction
        If the fixed-point iteration does not settle below 1e-13.
    BranchViolation
        Outside the admissible annulus.
    """
    z = np.asarray(z, dtype=complex)
    _check_annulus(red, z)
    zz = z[..., None] * np.ones(red.n)
    w = red.weight
    if truncated or red.cubic.size == 0:
        return red.e0 + w * sqrt_branch(zz, red.e1 * np.ones_like(zz))
    g = red.e0 + w * sqrt_branch(zz, red.e1 * np.ones_like(zz))
    for _ in range(G_MAXIT):
        g_new = red.e0 + w * sqrt_branch(zz, red.e1 - red.cubic_term(g))
        change = np.max(np.abs(g_new - g) / np.maximum(np.abs(zz), 1e-300))
        g = g_new
        if change <= G_TOL:
            return g
    raise NoContraction("g iteration did not converge", change=float(change))


def g_derivative(red, g, z, truncated=False):
    """``dg/dz = 2 z / d_r Pi_q(theta, g)`` from the defining identity."""
    z = np.asarray(z, dtype=complex)[..., None]
    dpi = 2.0 * (1.0 + red.f2) * (g - red.e0)
    if not truncated and red.cubic.size:
        dpi = dpi + red.cubic_derivative(g)
    return 2.0 * z / dpi


class GammaMap:
    """``Gamma(u) = int g(theta, u) dtheta`` and its inverse ``h``."""

    def __init__(self, red, truncated=False):
        self.red = red
        self.truncated = truncated

    def __call__(self, u):
        g = solve_g(self.red, u, self.truncated)
        return np.mean(g, axis=-1)

    def derivative(self, u):
        g = solve_g(self.red, u, self.truncated)
        return np.mean(g_derivative(self.red, g, u, self.truncated), axis=-1)

    def inverse(self, z, tol=1e-15, maxit=NEWTON_MAXIT):
        """``h(z)`` by Newton's method started at ``z / gamma``.

        Raises
        ------
        NewtonDiverged
            If the iteration leaves the admissible annulus or does not settle.
        """
        z = np.asarray(z, dtype=complex)
        u = z / self.red.gamma
        last = np.inf
        for it in range(maxit):
            try:
                g = solve_g(self.red, u, self.truncated)
            except (BranchViolation, NoContraction) as exc:
                raise NewtonDiverged("inverse left the admissible annulus", step=it) from exc
            F = np.mean(g, axis=-1) - z
            dF = np.mean(g_derivative(self.red, g, u, self.truncated), axis=-1)
            du = F / dF
            u = u - du
            size = float(np.max(np.abs(du) / np.maximum(np.abs(u), 1e-300)))
            if size <= tol or (size >= last and size < 1e-12):
                return u if u.ndim else complex(u)
            last = size
        raise NewtonDiverged("inverse did not converge", change=last)


def gamma_and_h(red, grid=None, truncated=False):
    """``(Gamma, h)`` as vectorized callables.

    With ``grid`` (complex samples) the round trip ``Gamma(h(z)) = z`` is
    verified there and :class:`NewtonDiverged` raised above 1e-12.
    """
    G = GammaMap(red, truncated)
    h = G.inverse
    if grid is not None:
        z = np.asarray(grid, dtype=complex)
        err = np.max(np.abs(G(h(z)) - z))
        if not err <= 1e-12:
            raise NewtonDiverged("round trip Gamma(h(z)) = z failed", error=float(err))
    return G, h


def circle(t, n_nodes=N_GRID):
    return t * np.exp(2j * np.pi * np.arange(n_nodes) / n_nodes)


def contour_integral(func, t, n_nodes=N_GRID):
    """``(1 / 2 pi i) oint_{|z|=t} func(z) dz`` by the trapezoid rule."""
    z = circle(t, n_nodes)
    return complex(np.mean(func(z) * z))


def residue_formula(red):
    """``(1/8) gamma^2 int (1 + f2)^(-1/2) e1^2``."""
    w = red.weight
    return 0.125 * float(np.mean(w)) ** 2 * float(np.mean(w * red.e1**2))


def residue_check(red, t, n_nodes=N_GRID, kind="z2h"):
    """Contour integral of the model inverse ``h~`` against the closed form.

    ``kind="z2h"`` integrates ``z^2 h~(z)``, whose residue equals the
    formula; ``kind="z2h2"`` integrates ``z^2 h~(z)^2`` (zero residue when
    ``e0 = 0``).

    Returns
    -------
    (contour, formula)
    """
    if n_nodes < 64:
        raise ValueError("n_nodes must be >= 64")
    if t < red.lam:
        raise ValueError("t must be >= lambda")
    _, h = gamma_and_h(red, truncated=True)
    if kind == "z2h":
        integrand = lambda z: z * z * h(z)
    elif kind == "z2h2":
        integrand = lambda z: z * z * h(z) ** 2
    else:
        raise ValueError("kind must be 'z2h' or 'z2h2'")
    return contour_integral(integrand, t, n_nodes), residue_formula(red)


def laurent_coefficients(func, t, degrees, n_nodes=N_GRID):
    """Coefficients ``a_d`` of ``func(z) = sum a_d z^d`` from samples on ``|z| = t``."""
    z = circle(t, n_nodes)
    vals = func(z)
    return {d: complex(np.mean(vals * z ** (-d))) for d in degrees}


def flatness_bound(nu, red=None, h=0.5, L=None, eps_bar=None, L_power=4):
    """``nu^(1/6) / L + exp(-h / (2 L^p eps_bar)) / h`` with ``p = L_power``.

    ``L`` and ``eps_bar`` default to those of ``red``.
    """
    if red is not None:
        L = red.L if L is None else L
        eps_bar = red.eps_bar if eps_bar is None else eps_bar
    if L is None or eps_bar is None:
        raise ValueError("L and eps_bar are required without a reduction")
    if nu < 0 or h <= 0 or L <= 0 or eps_bar < 0:
        raise ValueError("inputs must be positive")
    tail = 0.0 if eps_bar == 0 else math.exp(-h / (2.0 * L**L_power * eps_bar)) / h
    return nu ** (1.0 / 6.0) / L + tail
