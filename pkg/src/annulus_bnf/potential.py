"""Two-constant bounds for holomorphic functions on disks with holes.

For ``f`` holomorphic on ``U = D(0, rho)`` minus disks ``D(z_j, eps_j)`` with
``|f| <= 1`` on ``U`` and ``|f| <= m`` on ``|z| = sigma``,

    ln|f(z)| <= (ln(|z|/rho) / ln(sigma/rho) - sum_j ln(d_j/R) / ln(eps_j/R)) ln m.

The hole terms use a reference radius ``R = hole_scale * rho``.  The
comparison ``v_j(z) <= ln|z - z_j| / ln eps_j`` for the harmonic measure of a
hole needs ``|z - z_j| <= R`` on the outer circle, which ``R = 2 rho``
guarantees; with ``R = rho`` the inequality fails for some entire functions
(see :func:`verify_bound_on_function`).

The harmonic measure that underlies the bound is estimated by walk-on-spheres.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryViolation
from .rng import run_tasks, task_rng

ABSORB_REL = 1e-4
BLOCK = 4096
MAX_WOS_STEPS = 10_000
CORPUS_VERSION = 1


@dataclass(frozen=True)
class HoleDomain:
    """``D(0, outer_radius)`` minus the closed disks ``holes = [(z_j, eps_j)]``."""

    outer_radius: float
    holes: tuple = ()
    eval_clearances: tuple = ()

    def __post_init__(self):
        rho = float(self.outer_radius)
        if not rho > 0:
            raise GeometryViolation("outer radius must be positive", rho=rho)
        holes = tuple((complex(c), float(e)) for c, e in self.holes)
        object.__setattr__(self, "holes", holes)
        for c, e in holes:
            if not e > 0:
                raise GeometryViolation("hole radius must be positive", eps=e)
            if abs(c) + e >= rho:
                raise GeometryViolation("hole must lie inside the outer disk", center=c, eps=e)
        cl = tuple(float(d) for d in self.eval_clearances)
        if cl and len(cl) != len(holes):
            raise GeometryViolation("one clearance per hole is required")
        for d, (_, e) in zip(cl, holes):
            if d < e:
                raise GeometryViolation("clearance d_j must be >= eps_j", d=d, eps=e)
        object.__setattr__(self, "eval_clearances", cl)

    @classmethod
    def from_dict(cls, d):
        holes = [(complex(h["re"], h["im"]), h["eps"]) for h in d.get("holes", [])]
        return cls(d["rho"], tuple(holes), tuple(d.get("clearances", ())))

    def to_dict(self):
        out = {
            "rho": self.outer_radius,
            "holes": [{"re": c.real, "im": c.imag, "eps": e} for c, e in self.holes],
        }
        if self.eval_clearances:
            out["clearances"] = list(self.eval_clearances)
        return out

    def in_domain(self, z):
        """Vectorized membership in the open holed disk."""
        z = np.asarray(z, dtype=complex)
        ok = np.abs(z) < self.outer_radius
        for c, e in self.holes:
            ok &= np.abs(z - c) > e
        return ok


def load_domain(path):
    with open(path) as fh:
        return HoleDomain.from_dict(json.load(fh))


def _clearances(dom, z, clearances):
    if clearances is not None:
        return [float(d) for d in clearances]
    if dom.eval_clearances:
        return list(dom.eval_clearances)
    return [abs(z - c) for c, _ in dom.holes]


HOLE_SCALE = 2.0


def jensen_bound(dom, sigma, m, z, clearances=None, hole_scale=HOLE_SCALE):
    """Upper bound for ``ln|f(z)|`` from the two-constant inequality.

    Parameters
    ----------
    dom : HoleDomain
    sigma : float
        Radius of the inner circle where ``|f| <= m``.
    m : float
        ``0 < m <= 1``.
    z : complex
        Evaluation point, ``sigma <= |z| < rho`` and outside every hole.
    clearances : sequence of float, optional
        ``d_j``; default the stored clearances, else ``|z - z_j|``.
    hole_scale : float
        Reference radius of the hole terms in units of ``rho``; 1 gives the
        uncorrected form, valid only without holes.

    Raises
    ------
    GeometryViolation
        When a precondition on the geometry or on ``m`` fails.
    """
    rho = dom.outer_radius
    z = complex(z)
    az = abs(z)
    if not 0 < m <= 1:
        raise GeometryViolation("m must lie in (0, 1]", m=m)
    if not 0 < sigma < rho:
        raise GeometryViolation("need 0 < sigma < rho", sigma=sigma, rho=rho)
    if not sigma <= az < rho:
        raise GeometryViolation("need sigma <= |z| < rho", z=z)
    for c, e in dom.holes:
        if abs(c) - e <= sigma:
            raise GeometryViolation("inner disk meets a hole", center=c, eps=e)
    ds = _clearances(dom, z, clearances)
    if len(ds) != len(dom.holes):
        raise GeometryViolation("one clearance per hole is required")
    total = math.log(az / rho) / math.log(sigma / rho)
    for d, (c, e) in zip(ds, dom.holes):
        if d < e or abs(z - c) < d * (1 - 1e-15):
            raise GeometryViolation("z is closer to a hole than its clearance", center=c, d=d)
        ref = hole_scale * rho
        total -= math.log(d / ref) / math.log(e / ref)
    return total * math.log(m)


# ---------------------------------------------------------------------------
# harmonic measure by walk-on-spheres
# ---------------------------------------------------------------------------


def _targets(dom, sigma):
    """Boundary components: ('outer',), ('inner',) and ('hole', j)."""
    names = ["outer"]
    if sigma:
        names.append("inner")
    names += ["hole%d" % j for j in range(len(dom.holes))]
    return names


def _distances(dom, sigma, x):
    cols = [dom.outer_radius - np.abs(x)]
    if sigma:
        cols.append(np.abs(x) - sigma)
    for c, e in dom.holes:
        cols.append(np.abs(x - c) - e)
    return np.stack(cols, axis=-1)


def _wos_block(dom, sigma, z, n, rng, tol):
    """Absorbing component index for ``n`` walks from ``z``."""
    x = np.full(n, complex(z))
    hit = np.full(n, -1)
    alive = np.arange(n)
    for _ in range(MAX_WOS_STEPS):
        d = _distances(dom, sigma, x[alive])
        dmin = d.min(axis=1)
        done = dmin < tol
        if np.any(done):
            hit[alive[done]] = d[done].argmin(axis=1)
            alive = alive[~done]
            dmin = dmin[~done]
        if alive.size == 0:
            break
        ang = rng.uniform(0.0, 2 * np.pi, alive.size)
        x[alive] = x[alive] + dmin * np.exp(1j * ang)
    return hit


def harmonic_measure_mc(dom, z, target="inner", walks=100_000, step=None, sigma=None, seed=0, threads=1):
    """Probability that Brownian motion from ``z`` first exits through ``target``.

    The domain is ``dom`` with the inner disk ``|z| <= sigma`` removed when
    ``sigma`` is given.  ``target`` is ``"inner"``, ``"outer"`` or ``"hole<j>"``.
    ``step`` is the absorption distance (default ``1e-4 rho``).  Walks run in
    blocks of 4096 with independent streams keyed by ``(seed, block)``.

    Returns
    -------
    (estimate, stderr)
    """
    names = _targets(dom, sigma)
    if target not in names:
        raise ValueError("unknown target %r; choose from %s" % (target, names))
    tol = ABSORB_REL * dom.outer_radius if step is None else float(step)
    idx = names.index(target)
    d0 = _distances(dom, sigma, np.array([complex(z)]))[0]
    if d0[idx] < tol:
        return 1.0, 0.0
    if d0.min() < tol:
        return 0.0, 0.0
    sizes = [min(BLOCK, walks - b * BLOCK) for b in range((walks + BLOCK - 1) // BLOCK)]

    def run(b):
        return int(np.sum(_wos_block(dom, sigma, z, sizes[b], task_rng(seed, b), tol) == idx))

    hits = sum(run_tasks(run, range(len(sizes)), threads))
    p = hits / walks
    return p, math.sqrt(max(p * (1 - p), 0.0) / walks)


def annulus_harmonic_measure(z, sigma, rho=1.0):
    """Exact inner-circle harmonic measure of the annulus ``sigma < |z| < rho``."""
    return math.log(abs(z) / rho) / math.log(sigma / rho)


# ---------------------------------------------------------------------------
# empirical verification on a fixed corpus
# ---------------------------------------------------------------------------


def _pole(dom, j=0):
    """Pole location for corpus functions: a hole center, else outside the disk."""
    if dom.holes:
        return dom.holes[j % len(dom.holes)][0]
    return 1.5 * dom.outer_radius


def function_corpus(dom):
    """Ten named test functions holomorphic on ``dom`` (version ``CORPUS_VERSION``)."""
    a = _pole(dom, 0)
    b = _pole(dom, 1)
    rho = dom.outer_radius
    return {
        "z": lambda z: z,
        "z^3": lambda z: z**3,
        "z^2(z+rho)": lambda z: z**2 * (z + rho),
        "const": lambda z: np.ones_like(z),
        "exp(z)-1": lambda z: np.expm1(z),
        "z sin(z)": lambda z: z * np.sin(z),
        "1/(z-a)": lambda z: 1.0 / (z - a),
        "z/(z-a)": lambda z: z / (z - a),
        "z^2/((z-a)(z-b))": lambda z: z**2 / ((z - a) * (z - b)),
        "z/(z-a)^2": lambda z: z / (z - a) ** 2,
    }


@dataclass
class BoundReport:
    name: str
    m: float
    points: int
    violations: int
    worst_slack: float
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "name": self.name,
            "m": self.m,
            "points": self.points,
            "violations": self.violations,
            "worst_slack": self.worst_slack,
        }


def _boundary_sup(dom, f, n=4096):
    t = np.exp(2j * np.pi * np.arange(n) / n)
    vals = [np.abs(f(dom.outer_radius * t))]
    for c, e in dom.holes:
        vals.append(np.abs(f(c + e * t)))
    return float(max(np.max(v) for v in vals))


def verify_bound_on_function(dom, sigma, f, grid=32, name=None, tol=1e-12, hole_scale=HOLE_SCALE):
    """Check ``ln|f(z)| <= jensen_bound`` on a polar ``grid x grid`` mesh.

    ``f`` is a callable or a corpus name; it is rescaled so that its supremum
    over the boundary of ``dom`` (hence over ``dom``) is 1.  Grid points inside
    ``sigma <= |z| < rho`` and outside the holes are checked.
    """
    if isinstance(f, str):
        name = f
        f = function_corpus(dom)[f]
    scale = _boundary_sup(dom, f)
    g = lambda z: np.asarray(f(z), dtype=complex) / scale
    t = np.exp(2j * np.pi * np.arange(4096) / 4096)
    m = float(np.max(np.abs(g(sigma * t))))
    m = min(m, 1.0)
    rho = dom.outer_radius
    radii = sigma + (rho - sigma) * (np.arange(grid) + 0.5) / grid
    angles = 2 * np.pi * (np.arange(grid) + 0.5) / grid
    zs = (radii[:, None] * np.exp(1j * angles)[None, :]).ravel()
    zs = zs[dom.in_domain(zs)]
    vals = np.log(np.abs(g(zs)))
    slack = []
    for z, v in zip(zs, vals):
        try:
            b = jensen_bound(dom, sigma, m, z, hole_scale=hole_scale)
        except GeometryViolation:
            continue
        slack.append(b - v)
    slack = np.array(slack)
    bad = int(np.sum(slack < -tol * max(1.0, abs(math.log(m)))))
    return BoundReport(name or getattr(f, "__name__", "f"), m, int(slack.size), bad,
                       float(slack.min()) if slack.size else float("nan"))


def verify_corpus(dom, sigma, grid=32, hole_scale=HOLE_SCALE):
    return [verify_bound_on_function(dom, sigma, name, grid, hole_scale=hole_scale) for name in function_corpus(dom)]
