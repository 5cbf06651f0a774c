"""Orbit classification, measure of the non-regular set, periodic orbits.

Membership of an orbit in an invariant circle is judged by a heuristic with
an explicit ``undecided`` verdict:

* the rotation number is a weighted Birkhoff average of the angle increments
  with the smooth bump ``exp(-1 / (t (1 - t)))``; on quasi-periodic orbits it
  converges faster than any power of the length, and the difference between
  the averages over ``M`` and ``M/2`` iterates serves as the error estimate;
* orbits with a rotation number at a rational ``p/q`` (``q <= q_max``) lie in
  islands or on periodic chains, not on invariant graphs;
* orbits confined to an r-band narrower than ``band`` with a converged
  average are regular.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NewtonDiverged, NumericalError
from .kam import DEFAULT_SCHEDULE
from .maps import GeneratingMap, PhasePoint, flow_arrays
from .rng import run_tasks
from .series import FourierTaylorSeries, RadialSeries, StripParams
from .small_divisors import continued_fraction_convergents

REGULAR = "regular"
NON_REGULAR = "non_regular"
UNDECIDED = "undecided"

DEFAULT_ITERS = 100_000
DEFAULT_TOL = 1e-8
CHAOS_TOL = 1e-5
Q_MAX = 20
BAND = 0.25
NEWTON_TOL = 1e-12
NEWTON_MAXIT = 50
HALVINGS = 20
BATCH = 2048


@dataclass
class OrbitDiagnostics:
    initial: PhasePoint
    iterations: int
    rotation_number: float
    convergence_error: float
    r_band: tuple
    classification: str
    flags: list = field(default_factory=list)

    def to_dict(self):
        return {
            "theta": self.initial.theta,
            "r": self.initial.r,
            "iterations": self.iterations,
            "rotation_number": self.rotation_number,
            "convergence_error": self.convergence_error,
            "r_band": list(self.r_band),
            "classification": self.classification,
            "flags": list(self.flags),
        }


@dataclass
class MeasureReport:
    t_values: list
    m_estimates: list
    grid: tuple
    undecided_fraction: list
    iterations: int = 0

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "m_estimate", "undecided_fraction"])
        for t, m, u in zip(self.t_values, self.m_estimates, self.undecided_fraction):
            w.writerow([repr(float(t)), repr(float(m)), repr(float(u))])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# weighted Birkhoff averages
# ---------------------------------------------------------------------------


def bump_weights(M):
    """Normalized weights ``g(n/M)``, ``n = 0..M-1``, ``g(t) = exp(-1/(t(1-t)))``."""
    t = np.arange(M) / M
    w = np.zeros(M)
    inner = (t > 0) & (t < 1)
    w[inner] = np.exp(-1.0 / (t[inner] * (1.0 - t[inner])))
    s = w.sum()
    return w / s if s > 0 else np.full(M, 1.0 / M)


def weighted_average(values):
    """Weighted Birkhoff average of a sequence (along axis 0)."""
    values = np.asarray(values, dtype=float)
    w = bump_weights(values.shape[0])
    return np.tensordot(w, values, axes=(0, 0))


def rational_distance(x, q_max=Q_MAX):
    """Distance from ``x`` to the nearest ``p/q`` with ``q <= q_max`` and that ``q``."""
    x = np.asarray(x, dtype=float)
    best = np.full(x.shape, np.inf)
    best_q = np.zeros(x.shape, dtype=int)
    for q in range(1, q_max + 1):
        d = np.abs(q * x - np.round(q * x)) / q
        better = d < best - 1e-300
        best = np.where(better, d, best)
        best_q = np.where(better, q, best_q)
    return best, best_q


def _plain(m):
    """Copy of ``m`` without the domain bound (checked per orbit instead)."""
    return GeneratingMap(m.omega, m.f, m.strip, check=False, meta=m.meta)


def orbit_statistics(m, theta, r, M, r_bound=None):
    """Rotation numbers, error estimates and r-bands of a batch of orbits.

    Returns a dict of arrays: ``rotation``, ``error``, ``r_min``, ``r_max``,
    ``escaped`` (left the domain or became non-finite).
    """
    if M < 4:
        raise ValueError("M must be >= 4")
    mp = _plain(m)
    r_bound = m.r_bound if r_bound is None else r_bound
    th = np.array(theta, dtype=float).ravel() % 1.0
    rr = np.array(r, dtype=float).ravel()
    n = th.size
    half = M // 2
    w_full = bump_weights(M)
    w_half = bump_weights(half)
    s_full = np.zeros(n)
    s_half = np.zeros(n)
    r_min = rr.copy()
    r_max = rr.copy()
    escaped = np.zeros(n, dtype=bool)
    alive = np.arange(n)
    for k in range(M):
        if alive.size == 0:
            break
        try:
            phi, R = mp.apply(th[alive], rr[alive])
        except NumericalError:
            phi, R = _apply_each(mp, th[alive], rr[alive])
        bad = ~(np.isfinite(phi) & np.isfinite(R))
        if r_bound is not None:
            bad |= np.abs(np.where(np.isfinite(R), R, np.inf)) > r_bound
        if np.any(bad):
            escaped[alive[bad]] = True
            keep = ~bad
            alive, phi, R = alive[keep], phi[keep], R[keep]
        inc = phi - th[alive]
        s_full[alive] += w_full[k] * inc
        if k < half:
            s_half[alive] += w_half[k] * inc
        th[alive] = phi % 1.0
        rr[alive] = R
        r_min[alive] = np.minimum(r_min[alive], R)
        r_max[alive] = np.maximum(r_max[alive], R)
    err = np.abs(s_full - s_half)
    err[escaped] = np.inf
    return {"rotation": s_full, "error": err, "r_min": r_min, "r_max": r_max, "escaped": escaped}


def _apply_each(m, th, rr):
    """Point-by-point fallback that marks failures with NaN."""
    phi = np.full(th.shape, np.nan)
    R = np.full(th.shape, np.nan)
    for i in range(th.size):
        try:
            a, b = m.apply(th[i : i + 1], rr[i : i + 1])
            phi[i], R[i] = a[0], b[0]
        except NumericalError:
            pass
    return phi, R


def classify_stats(stats, tol=DEFAULT_TOL, q_max=Q_MAX, band=BAND, chaos_tol=CHAOS_TOL):
    """Verdicts for :func:`orbit_statistics` output (array of strings)."""
    rot = stats["rotation"]
    err = stats["error"]
    width = stats["r_max"] - stats["r_min"]
    dist, _ = rational_distance(np.where(np.isfinite(rot), rot, 0.0), q_max)
    out = np.full(rot.shape, UNDECIDED, dtype=object)
    converged = err < tol
    confined = width < band
    rational = dist < np.maximum(tol, err)
    out[converged & confined & ~rational] = REGULAR
    out[rational | (err > chaos_tol) | stats["escaped"]] = NON_REGULAR
    # a horizontal circle traversed exactly is invariant whatever its rotation;
    # a point that does not move at all is a fixed point, not a circle
    moving = np.abs(rot - np.round(rot)) > tol
    out[(width == 0) & ~stats["escaped"] & moving] = REGULAR
    return out


def classify_orbit(m, x, M=DEFAULT_ITERS, tol=DEFAULT_TOL, q_max=Q_MAX, band=BAND, chaos_tol=CHAOS_TOL):
    """Classify the orbit of ``x`` as regular, non_regular or undecided."""
    x = x if isinstance(x, PhasePoint) else PhasePoint(*map(float, x))
    st = orbit_statistics(m, [x.theta], [x.r], M)
    verdict = classify_stats(st, tol, q_max, band, chaos_tol)[0]
    flags = ["out_of_domain"] if st["escaped"][0] else []
    return OrbitDiagnostics(
        x,
        M,
        float(st["rotation"][0]),
        float(st["error"][0]),
        (float(st["r_min"][0]), float(st["r_max"][0])),
        str(verdict),
        flags,
    )


def classify_points(m, theta, r, M=DEFAULT_ITERS, tol=DEFAULT_TOL, threads=1, **kw):
    """Verdicts for many points, processed in independent batches."""
    theta = np.asarray(theta, dtype=float).ravel()
    r = np.asarray(r, dtype=float).ravel()
    starts = list(range(0, theta.size, BATCH))

    def run(s):
        st = orbit_statistics(m, theta[s : s + BATCH], r[s : s + BATCH], M)
        return classify_stats(st, tol, **kw)

    parts = run_tasks(run, starts, threads)
    return np.concatenate(parts) if parts else np.array([], dtype=object)


def band_grid(t, grid):
    """Cell-centered grid on ``[0, 1) x (-t, t)``."""
    n_theta, n_r = grid
    th = (np.arange(n_theta) + 0.5) / n_theta
    rr = -t + (np.arange(n_r) + 0.5) * (2.0 * t / n_r)
    T, R = np.meshgrid(th, rr, indexing="ij")
    return T.ravel(), R.ravel()


def measure_scan(m, t_list, grid=(400, 400), M=DEFAULT_ITERS, tol=DEFAULT_TOL, threads=1, **kw):
    """Estimate ``m(t)``, the area of non-regular cells in ``T x (-t, t)``."""
    t_values, m_est, und = [], [], []
    for t in t_list:
        if not t > 0:
            raise ValueError("t must be positive")
        T, R = band_grid(t, grid)
        v = classify_points(m, T, R, M, tol, threads, **kw)
        n = v.size
        t_values.append(float(t))
        m_est.append(float(np.sum(v == NON_REGULAR)) / n * 2.0 * t)
        und.append(float(np.sum(v == UNDECIDED)) / n)
    return MeasureReport(t_values, m_est, tuple(grid), und, M)


def scaling_exponent(amplitudes, values):
    """Slope of ``log value`` against ``log amplitude`` (least squares)."""
    return float(np.polyfit(np.log(amplitudes), np.log(values), 1)[0])


# ---------------------------------------------------------------------------
# periodic orbits
# ---------------------------------------------------------------------------


@dataclass
class HyperbolicOrbit:
    period: int
    rotation: int
    points: list
    eigenvalues: tuple
    eigendirections: tuple
    monodromy: np.ndarray
    kind: str
    box_area: float = 0.0

    @property
    def trace(self):
        return float(np.trace(self.monodromy))

    @property
    def determinant(self):
        return float(np.linalg.det(self.monodromy))

    def to_dict(self):
        ev = [complex(e) for e in self.eigenvalues]
        return {
            "period": self.period,
            "rotation": self.rotation,
            "points": [[p.theta, p.r] for p in self.points],
            "eigenvalues": [[e.real, e.imag] for e in ev],
            "trace": self.trace,
            "determinant": self.determinant,
            "kind": self.kind,
            "box_area": self.box_area,
        }


def _orbit_and_monodromy(m, x, q):
    th, r = np.array([x[0]]), np.array([x[1]])
    J = np.eye(2)
    pts = [PhasePoint(float(th[0]), float(r[0]))]
    for _ in range(q):
        J = m.jacobian_arrays(th, r)[0] @ J
        th, r = m.apply(th, r)
        pts.append(PhasePoint(float(th[0]), float(r[0])))
    return np.array([th[0], r[0]]), J, pts


def find_periodic_orbit(m, p, q, seed, tol=NEWTON_TOL, maxit=NEWTON_MAXIT):
    """Solve ``f^q(x) - x - (p, 0) = 0`` by damped Newton with chained Jacobians.

    Returns
    -------
    HyperbolicOrbit
        ``kind`` is ``hyperbolic`` (``|tr| > 2``), ``elliptic`` or ``parabolic``.

    Raises
    ------
    NewtonDiverged
        On a singular Newton matrix (e.g. a curve of periodic points) or
        without convergence after ``maxit`` steps.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    mp = _plain(m)
    seed = seed if isinstance(seed, PhasePoint) else PhasePoint(*map(float, seed))
    x = seed.as_array()
    shift = np.array([float(p), 0.0])

    def residual(y):
        try:
            end, J, pts = _orbit_and_monodromy(mp, y, q)
        except NumericalError:
            return None
        return end - y - shift, J, pts

    out = residual(x)
    if out is None:
        raise NewtonDiverged("map undefined at the seed")
    F, J, pts = out
    for it in range(maxit):
        nF = float(np.max(np.abs(F)))
        if nF < tol:
            return _make_orbit(p, q, pts[:-1], J)
        A = J - np.eye(2)
        scale = max(1.0, float(np.max(np.abs(J))))
        if abs(np.linalg.det(A)) < 1e-13 * scale**2:
            raise NewtonDiverged("singular Newton matrix (degenerate family of periodic points)", step=it)
        dx = -np.linalg.solve(A, F)
        lam = 1.0
        for _ in range(HALVINGS + 1):
            cand = residual(x + lam * dx)
            if cand is not None and float(np.max(np.abs(cand[0]))) < nF:
                break
            lam *= 0.5
        else:
            raise NewtonDiverged("damping failed to reduce the residual", step=it, residual=nF)
        x = x + lam * dx
        F, J, pts = cand
    if float(np.max(np.abs(F))) < tol:
        return _make_orbit(p, q, pts[:-1], J)
    raise NewtonDiverged("Newton did not converge", residual=float(np.max(np.abs(F))))


def _make_orbit(p, q, pts, J):
    tr = float(np.trace(J))
    vals, vecs = np.linalg.eig(J)
    order = np.argsort(-np.abs(vals))
    vals, vecs = vals[order], vecs[:, order]
    if abs(tr) > 2 + 1e-12:
        kind = "hyperbolic"
        vals, vecs = vals.real, vecs.real
    elif abs(tr) < 2 - 1e-12:
        kind = "elliptic"
    else:
        kind = "parabolic"
    return HyperbolicOrbit(
        q, p, list(pts), (vals[0], vals[1]), (vecs[:, 0], vecs[:, 1]), J, kind
    )


def _slope(v):
    return float(v[1] / v[0]) if abs(v[0]) > 0 else math.inf


def separatrix_box(orb, cone_factor=2.0, half_width=None):
    """Double wedge around the first orbit point, between the separatrix cones.

    The unstable and stable directions have slopes ``m+`` and ``m-``; with
    ``s = min(|m+|, |m-|) / cone_factor`` the set
    ``{|r - r_p| < s |theta - theta_p| / 2, |theta - theta_p| < Delta}`` avoids
    both separatrix graphs.  Its area is ``s Delta^2``; by default
    ``Delta = 1 / (4 q)``.

    Returns
    -------
    (area, box)
        ``box`` is a dict with the center, ``Delta`` and the slope ``s``.
    """
    if orb.kind != "hyperbolic":
        raise ValueError("separatrix box needs a hyperbolic orbit")
    mp, mm = _slope(orb.eigendirections[0]), _slope(orb.eigendirections[1])
    s = min(abs(mp), abs(mm)) / cone_factor
    delta = 1.0 / (4 * orb.period) if half_width is None else half_width
    area = s * delta**2
    orb.box_area = area
    c = orb.points[0]
    return area, {"theta": c.theta, "r": c.r, "delta": delta, "slope": s, "m_plus": mp, "m_minus": mm}


def sample_box(box, n, rng=None):
    """Deterministic interior samples of a separatrix box (fractions 0.2-0.8)."""
    u = np.linspace(0.2, 0.8, n)
    side = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    dth = side * u * box["delta"]
    frac = np.linspace(-0.8, 0.8, n)[::-1]
    dr = frac * 0.5 * box["slope"] * np.abs(dth)
    return box["theta"] + dth, box["r"] + dr


# ---------------------------------------------------------------------------
# counterexample construction and the pendulum model
# ---------------------------------------------------------------------------


def schedule_level(q, config=DEFAULT_SCHEDULE):
    """Smallest ``n`` with ``N_n >= q`` and the corresponding ``N_n``."""
    n = 0
    while config.N(n) < q:
        n += 1
    return n, config.N(n)


def build_counterexample(omega0, base, k_list, h, config=DEFAULT_SCHEDULE):
    """Add ``G_q = eps_bar e^{-2 pi q h / 10} r^2 cos(2 pi q theta)`` to ``base``.

    ``q`` runs over the convergent denominators of ``omega0`` indexed by
    ``k_list`` (convergents counted from the first with ``q >= 2``), and
    ``eps_bar = exp(-N / (ln N)^a)`` with ``N`` the first schedule value
    ``>= q``.  ``meta["terms"]`` records ``p, q, eps_bar, amplitude`` and the
    predicted resonance center ``p/q - omega0`` of the frequency map
    ``omega0 + r``.
    """
    k_list = list(k_list)
    if not k_list:
        return base
    conv = continued_fraction_convergents(omega0, max(k_list) + 1)
    qmax = max(conv[k][1] for k in k_list)
    K = max(base.f.n_theta_max, qmax)
    N = max(base.f.n_r_max, 2)
    f = base.f.resize(N, K)
    terms = []
    for k in k_list:
        p, q = conv[k]
        _, Nn = schedule_level(q, config)
        eps_bar = config.eps_bar(Nn)
        amp = eps_bar * math.exp(-2 * math.pi * q * h / 10.0)
        f = f + FourierTaylorSeries.cos_mode(2, q, amp, N, K)
        terms.append({"p": p, "q": q, "eps_bar": eps_bar, "amplitude": amp, "predicted_center": p / q - omega0})
    meta = dict(base.meta)
    meta["terms"] = terms
    meta["omega0"] = float(omega0)
    return GeneratingMap(base.omega, f, StripParams(h / 10.0, 0.5), check=False, r_bound=base.r_bound, meta=meta)


def counterexample_base(omega0, n_r_max=4):
    """Twist ``Omega = omega0 r + r^2 / 2``."""
    return GeneratingMap(RadialSeries([0.0, omega0, 0.5] + [0.0] * max(0, n_r_max - 2)),
                         FourierTaylorSeries(n_r_max, 1), StripParams(0.5, 0.5), check=False)


def find_resonant_orbit(m, p, q, center, kinds=("hyperbolic",)):
    """Try seeds ``(j / (2q), center)`` for ``j = 0, 1`` and return the first orbit of a wanted kind."""
    last = None
    for j in range(2):
        try:
            orb = find_periodic_orbit(m, p, q, (j / (2.0 * q), center))
        except NewtonDiverged as exc:
            last = exc
            continue
        if orb.kind in kinds:
            return orb
    raise last or NewtonDiverged("no orbit of the requested kind", p=p, q=q)


def pendulum_hamiltonian(nu, n_r_max=2, n_theta_max=1):
    """``r^2 / 2 + nu cos(2 pi theta)``; hyperbolic rest point at ``(0, 0)``."""
    return (RadialSeries([0.0, 0.0, 0.5]), FourierTaylorSeries.cos_mode(0, 1, nu, n_r_max, n_theta_max))


def pendulum_monodromy(nu, t=1.0, step=1e-6):
    """Central-difference monodromy of the time-``t`` flow at the saddle.

    The exact value of ``ln lambda`` is ``2 pi sqrt(nu) t``.
    """
    H = pendulum_hamiltonian(nu)
    th = np.array([step, -step, 0.0, 0.0])
    r = np.array([0.0, 0.0, step, -step])
    a, b = flow_arrays(H, th, r, t)
    J = np.array([[a[0] - a[1], a[2] - a[3]], [b[0] - b[1], b[2] - b[3]]]) / (2 * step)
    vals = np.linalg.eigvals(J)
    lam = float(np.max(np.abs(vals)))
    return lam, J


def eigen_scaling(nus, t=1.0):
    """Slope of ``ln lambda`` against ``sqrt(nu)`` through the origin."""
    x = np.sqrt(np.asarray(nus, dtype=float))
    y = np.array([math.log(pendulum_monodromy(nu, t)[0]) for nu in nus])
    return float(np.dot(x, y) / np.dot(x, x))
