"""Truncated Fourier-Taylor series on the annulus and radial power series.

A :class:`FourierTaylorSeries` stores coefficients ``c[n, k]`` of

    F(theta, r) = sum_{n, k} c[n, k] exp(2 pi i k theta) r**n

for ``0 <= n <= n_r_max`` and ``|k| <= n_theta_max`` with the reality
symmetry ``c[n, -k] = conj(c[n, k])``.  Truncation in ``r`` is a ring
homomorphism, so every algebraic identity between formal power series holds
exactly at truncation order; truncation in ``k`` is not, and is only accurate
when the neglected modes are small.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .errors import RealityViolation

FLUSH = 1e-300
A_TERMS_MAX = 200
TWO_PI = 2.0 * np.pi

DEFAULT_N_R = 16
DEFAULT_N_THETA = 32


@dataclass(frozen=True)
class StripParams:
    """Complex strip half-width ``h`` in theta and disk radius ``rho`` in r."""

    h: float
    rho: float

    def __post_init__(self):
        if not (np.isfinite(self.h) and np.isfinite(self.rho)):
            raise ValueError("strip parameters must be finite")
        if self.h <= 0 or self.rho <= 0:
            raise ValueError("strip parameters must be positive (h=%r, rho=%r)" % (self.h, self.rho))

    def shrink(self, delta, rho_factor=1.0):
        """Strip with ``h - delta`` and radius scaled by ``rho_factor``."""
        return StripParams(self.h - delta, self.rho * rho_factor)


# ---------------------------------------------------------------------------
# radial series
# ---------------------------------------------------------------------------


class RadialSeries:
    """Real polynomial ``sum_n a_n r**n`` truncated at ``n_r_max``.

    Parameters
    ----------
    coeffs : sequence of float
        ``a_0 .. a_{n_r_max}``.
    """

    __slots__ = ("_c",)

    def __init__(self, coeffs):
        c = np.array(coeffs, dtype=complex if np.iscomplexobj(coeffs) else float).ravel()
        if np.iscomplexobj(c):
            if np.any(np.abs(c.imag) > 1e-14 * max(1.0, float(np.abs(c).max(initial=0.0)))):
                raise RealityViolation("radial series must have real coefficients")
            c = c.real.copy()
        if c.size == 0:
            c = np.zeros(1)
        if not np.all(np.isfinite(c)):
            raise ValueError("radial series coefficients must be finite")
        c[np.abs(c) < FLUSH] = 0.0
        c.flags.writeable = False
        self._c = c

    @classmethod
    def zeros(cls, n_r_max=DEFAULT_N_R):
        return cls(np.zeros(n_r_max + 1))

    @classmethod
    def monomial(cls, n, value=1.0, n_r_max=None):
        size = max(n, 0 if n_r_max is None else n_r_max) + 1
        c = np.zeros(size)
        c[n] = value
        return cls(c)

    @property
    def coeffs(self):
        return self._c

    @property
    def n_r_max(self):
        return self._c.size - 1

    def __len__(self):
        return self._c.size

    def __getitem__(self, n):
        return float(self._c[n]) if 0 <= n < self._c.size else 0.0

    def __call__(self, r):
        r = np.asarray(r)
        out = np.zeros_like(r, dtype=np.result_type(r, float))
        for a in self._c[::-1]:
            out = out * r + a
        return out if out.ndim else out[()]

    def resize(self, n_r_max):
        c = np.zeros(n_r_max + 1)
        m = min(n_r_max, self.n_r_max) + 1
        c[:m] = self._c[:m]
        return RadialSeries(c)

    def derivative(self, order=1):
        c = self._c.astype(float)
        for _ in range(order):
            if c.size <= 1:
                return RadialSeries(np.zeros(self._c.size))
            c = c[1:] * np.arange(1, c.size)
        out = np.zeros(self._c.size)
        out[: c.size] = c
        return RadialSeries(out)

    def integral(self):
        """Antiderivative vanishing at 0, truncated to the same order."""
        c = np.zeros(self._c.size)
        c[1:] = self._c[:-1] / np.arange(1, self._c.size)
        return RadialSeries(c)

    def shift_center(self, center):
        """Coefficients of ``r -> self(center + r)``."""
        n = self._c.size
        out = np.zeros(n)
        for j in range(n):
            s = 0.0
            for m in range(j, n):
                s += self._c[m] * math.comb(m, j) * center ** (m - j)
            out[j] = s
        return RadialSeries(out)

    def to_series(self, n_theta_max=DEFAULT_N_THETA, n_r_max=None):
        return FourierTaylorSeries.from_radial(self, n_theta_max=n_theta_max, n_r_max=n_r_max)

    def _binary(self, other, op):
        if isinstance(other, RadialSeries):
            n = max(self.n_r_max, other.n_r_max)
            a, b = self.resize(n)._c, other.resize(n)._c
            return RadialSeries(op(a, b))
        return NotImplemented

    def __add__(self, other):
        if np.isscalar(other):
            c = self._c.copy()
            c[0] += other
            return RadialSeries(c)
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        if np.isscalar(other):
            return self + (-other)
        return self._binary(other, np.subtract)

    def __neg__(self):
        return RadialSeries(-self._c)

    def __mul__(self, other):
        if isinstance(other, RadialSeries):
            n = max(self.n_r_max, other.n_r_max)
            c = np.convolve(self.resize(n)._c, other.resize(n)._c)[: n + 1]
            return RadialSeries(c)
        if np.isscalar(other):
            return RadialSeries(self._c * other)
        return NotImplemented

    __rmul__ = __mul__

    def allclose(self, other, atol=1e-12):
        n = max(self.n_r_max, other.n_r_max)
        return bool(np.all(np.abs(self.resize(n)._c - other.resize(n)._c) <= atol))

    def tolist(self):
        return [float(x) for x in self._c]

    def __repr__(self):
        return "RadialSeries(%s)" % np.array2string(self._c, precision=6, threshold=8)


# ---------------------------------------------------------------------------
# Fourier-Taylor series
# ---------------------------------------------------------------------------


def _symmetrize(c):
    """Project onto the reality-symmetric subspace ``c[:, -k] = conj(c[:, k])``."""
    return 0.5 * (c + np.conj(c[:, ::-1]))


class FourierTaylorSeries:
    """Real-symmetric truncated series ``sum c[n,k] e^{2 pi i k theta} r^n``.

    Parameters
    ----------
    n_r_max, n_theta_max : int
        Truncation box.
    coeffs : array_like or dict, optional
        Either an array of shape ``(n_r_max + 1, 2 n_theta_max + 1)`` with
        column ``n_theta_max + k`` holding mode ``k``, or a mapping
        ``(n, k) -> complex``.  A dict entry for ``k`` also sets ``-k`` by
        conjugation; arrays are projected onto the symmetric subspace.
    """

    __slots__ = ("n_r_max", "n_theta_max", "_c", "_eval_cache")

    def __init__(self, n_r_max=DEFAULT_N_R, n_theta_max=DEFAULT_N_THETA, coeffs=None, *, _trusted=False):
        self.n_r_max = int(n_r_max)
        self.n_theta_max = int(n_theta_max)
        if self.n_r_max < 0 or self.n_theta_max < 0:
            raise ValueError("truncation orders must be nonnegative")
        shape = (self.n_r_max + 1, 2 * self.n_theta_max + 1)
        if coeffs is None:
            c = np.zeros(shape, dtype=complex)
        elif isinstance(coeffs, dict):
            c = np.zeros(shape, dtype=complex)
            K = self.n_theta_max
            for (n, k), val in coeffs.items():
                if not (0 <= n <= self.n_r_max and abs(k) <= K):
                    raise ValueError("coefficient (%d, %d) outside the truncation box" % (n, k))
                if k == 0:
                    c[n, K] = complex(val).real
                elif k > 0:
                    c[n, K + k] = val
                    c[n, K - k] = np.conj(val)
                else:
                    c[n, K - k] = np.conj(val)
                    c[n, K + k] = val
        else:
            c = np.asarray(coeffs, dtype=complex)
            if c.shape != shape:
                raise ValueError("coefficient array has shape %s, expected %s" % (c.shape, shape))
            c = c if _trusted else _symmetrize(c)
            c = np.array(c, dtype=complex)
        if not np.all(np.isfinite(c)):
            raise ValueError("series coefficients must be finite")
        c[np.abs(c) < FLUSH] = 0.0
        c.flags.writeable = False
        self._c = c
        self._eval_cache = None

    # -- constructors -----------------------------------------------------
    @classmethod
    def zeros(cls, n_r_max=DEFAULT_N_R, n_theta_max=DEFAULT_N_THETA):
        return cls(n_r_max, n_theta_max)

    @classmethod
    def monomial(cls, n, k, value=1.0, n_r_max=DEFAULT_N_R, n_theta_max=DEFAULT_N_THETA):
        """``value e^{2 pi i k theta} r^n`` plus its conjugate mode (k != 0)."""
        return cls(n_r_max, n_theta_max, {(n, k): value})

    @classmethod
    def cos_mode(cls, n, k, amplitude=1.0, n_r_max=DEFAULT_N_R, n_theta_max=DEFAULT_N_THETA):
        """``amplitude * r^n cos(2 pi k theta)``."""
        if k == 0:
            return cls(n_r_max, n_theta_max, {(n, 0): amplitude})
        return cls(n_r_max, n_theta_max, {(n, k): amplitude / 2.0})

    @classmethod
    def sin_mode(cls, n, k, amplitude=1.0, n_r_max=DEFAULT_N_R, n_theta_max=DEFAULT_N_THETA):
        """``amplitude * r^n sin(2 pi k theta)``."""
        if k == 0:
            return cls(n_r_max, n_theta_max)
        return cls(n_r_max, n_theta_max, {(n, k): -0.5j * amplitude})

    @classmethod
    def from_radial(cls, omega, n_theta_max=DEFAULT_N_THETA, n_r_max=None):
        if n_r_max is None:
            n_r_max = omega.n_r_max
        c = np.zeros((n_r_max + 1, 2 * n_theta_max + 1), dtype=complex)
        m = min(n_r_max, omega.n_r_max) + 1
        c[:m, n_theta_max] = omega.coeffs[:m]
        return cls(n_r_max, n_theta_max, c, _trusted=True)

    @classmethod
    def from_function(cls, func, n_r_max=DEFAULT_N_R, n_theta_max=DEFAULT_N_THETA, n_theta_nodes=None):
        """Fourier-sample ``func(theta)`` returning the r-coefficient matrix.

        ``func`` maps an array of theta nodes to an array of shape
        ``(n_r_max + 1, len(theta))`` of real values.
        """
        m = n_theta_nodes or 4 * n_theta_max + 4
        theta = np.arange(m) / m
        vals = np.asarray(func(theta), dtype=float)
        spec = np.fft.fft(vals, axis=1) / m
        K = n_theta_max
        c = np.zeros((n_r_max + 1, 2 * K + 1), dtype=complex)
        ks = np.arange(-K, K + 1)
        c[:, :] = spec[:, ks % m]
        return cls(n_r_max, n_theta_max, c)

    # -- basic access -----------------------------------------------------
    @property
    def coeffs(self):
        """Read-only coefficient array, column ``n_theta_max + k`` is mode k."""
        return self._c

    @property
    def shape(self):
        return self._c.shape

    def coeff(self, n, k):
        if 0 <= n <= self.n_r_max and abs(k) <= self.n_theta_max:
            return complex(self._c[n, self.n_theta_max + k])
        return 0j

    def items(self):
        """Iterate over nonzero ``((n, k), c)`` with ``k >= 0``."""
        K = self.n_theta_max
        nz = np.argwhere(self._c[:, K:] != 0)
        for n, kk in nz:
            yield (int(n), int(kk)), complex(self._c[n, K + kk])

    def is_zero(self):
        return not np.any(self._c)

    def support(self):
        """``(lowest n, highest n, highest |k|)`` of nonzero coefficients, or None."""
        nz = np.nonzero(self._c)
        if nz[0].size == 0:
            return None
        return int(nz[0].min()), int(nz[0].max()), int(np.abs(nz[1] - self.n_theta_max).max())

    def low_degree(self):
        """Smallest r-degree with a nonzero coefficient (``n_r_max + 1`` if zero)."""
        s = self.support()
        return self.n_r_max + 1 if s is None else s[0]

    def resize(self, n_r_max=None, n_theta_max=None):
        n_r_max = self.n_r_max if n_r_max is None else n_r_max
        n_theta_max = self.n_theta_max if n_theta_max is None else n_theta_max
        if n_r_max == self.n_r_max and n_theta_max == self.n_theta_max:
            return self
        c = np.zeros((n_r_max + 1, 2 * n_theta_max + 1), dtype=complex)
        nn = min(n_r_max, self.n_r_max) + 1
        kk = min(n_theta_max, self.n_theta_max)
        c[:nn, n_theta_max - kk : n_theta_max + kk + 1] = self._c[
            :nn, self.n_theta_max - kk : self.n_theta_max + kk + 1
        ]
        return FourierTaylorSeries(n_r_max, n_theta_max, c, _trusted=True)

    def with_coeffs(self, c, symmetrize=True):
        return FourierTaylorSeries(self.n_r_max, self.n_theta_max, c, _trusted=not symmetrize)

    def real_check(self, tol=1e-12):
        """Largest violation of the reality symmetry (should be ~0)."""
        return float(np.abs(self._c - np.conj(self._c[:, ::-1])).max(initial=0.0)) <= tol

    def l1(self):
        """Plain coefficient sum ``sum |c|`` (the majorant norm at h=0, rho=1)."""
        return float(np.abs(self._c).sum())

    def max_abs(self):
        return float(np.abs(self._c).max(initial=0.0))

    # -- arithmetic -------------------------------------------------------
    def _promote(self, other):
        n = max(self.n_r_max, other.n_r_max)
        k = max(self.n_theta_max, other.n_theta_max)
        return self.resize(n, k), other.resize(n, k)

    def __add__(self, other):
        if isinstance(other, FourierTaylorSeries):
            return add(self, other)
        if isinstance(other, RadialSeries):
            return add(self, other.to_series(self.n_theta_max, self.n_r_max))
        if np.isscalar(other):
            c = self._c.copy()
            c[0, self.n_theta_max] += float(np.real(other))
            return self.with_coeffs(c, symmetrize=False)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return self.with_coeffs(-self._c, symmetrize=False)

    def __sub__(self, other):
        if isinstance(other, (FourierTaylorSeries, RadialSeries)) or np.isscalar(other):
            return self + (-other)
        return NotImplemented

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, FourierTaylorSeries):
            return mul(self, other)
        if isinstance(other, RadialSeries):
            return mul(self, other.to_series(self.n_theta_max, self.n_r_max))
        if np.isscalar(other):
            if np.iscomplexobj(other) and abs(np.imag(other)) > 0:
                raise RealityViolation("scaling by a non-real number breaks reality symmetry")
            return self.with_coeffs(self._c * float(np.real(other)), symmetrize=False)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if np.isscalar(other):
            return self * (1.0 / other)
        return NotImplemented

    def allclose(self, other, atol=1e-12):
        a, b = self._promote(other)
        return bool(np.abs(a._c - b._c).max(initial=0.0) <= atol)

    def distance(self, other):
        """Largest coefficient difference."""
        a, b = self._promote(other)
        return float(np.abs(a._c - b._c).max(initial=0.0))

    # -- evaluation -------------------------------------------------------
    def _active(self):
        if self._eval_cache is None:
            K = self.n_theta_max
            half = self._c[:, K:]
            rows = np.nonzero(np.any(half != 0, axis=1))[0]
            cols = np.nonzero(np.any(half != 0, axis=0))[0]
            sub = half[np.ix_(rows, cols)]
            w = np.where(cols == 0, 1.0, 2.0)
            self._eval_cache = (rows, cols, sub * w[None, :])
        return self._eval_cache

    def evaluate(self, theta, r):
        """Evaluate at points; real inputs give real output, complex inputs complex."""
        theta = np.asarray(theta)
        r = np.asarray(r)
        theta, r = np.broadcast_arrays(theta, r)
        rows, cols, sub = self._active()
        shape = theta.shape
        th = theta.ravel()
        rr = r.ravel()
        if rows.size == 0:
            out = np.zeros(th.shape, dtype=np.result_type(th, rr, float))
            return out.reshape(shape) if shape else out[()]
        complex_in = np.iscomplexobj(th) or np.iscomplexobj(rr)
        rp = rr[:, None] ** rows[None, :]
        if not complex_in:
            ang = TWO_PI * th[:, None] * cols[None, :]
            cs, sn = np.cos(ang), np.sin(ang)
            # per-point value: sum_n r^n sum_k (Re c cos - Im c sin)
            a = cs @ sub.real.T - sn @ sub.imag.T
            out = np.einsum("pn,pn->p", a, rp)
        else:
            # full complex sum over +k and -k
            e_pos = np.exp(2j * np.pi * th[:, None] * cols[None, :])
            e_neg = np.exp(-2j * np.pi * th[:, None] * cols[None, :])
            half = self._c[:, self.n_theta_max:][np.ix_(rows, cols)]
            neg = np.conj(half)
            neg[:, cols == 0] = 0.0
            a = e_pos @ half.T + e_neg @ neg.T
            out = np.einsum("pn,pn->p", a, rp)
        return out.reshape(shape) if shape else out[()]

    __call__ = evaluate

    def grid_values(self, n_theta, r_values):
        """Values on the tensor grid ``theta_j = j/n_theta`` times ``r_values``."""
        th = np.arange(n_theta) / n_theta
        T, R = np.meshgrid(th, np.asarray(r_values), indexing="ij")
        return self.evaluate(T, R)

    # -- serialization ----------------------------------------------------
    def to_dict(self):
        coeffs = []
        for (n, k), c in self.items():
            coeffs.append({"n": n, "k": k, "re": float(c.real), "im": float(c.imag)})
        return {"n_r_max": self.n_r_max, "n_theta_max": self.n_theta_max, "coeffs": coeffs}

    @classmethod
    def from_dict(cls, d):
        n_r = int(d["n_r_max"])
        n_t = int(d["n_theta_max"])
        entries = {}
        for e in d.get("coeffs", []):
            k = int(e["k"])
            if k < 0:
                raise ValueError("series files store only k >= 0")
            entries[(int(e["n"]), k)] = complex(float(e["re"]), float(e["im"]))
        return cls(n_r, n_t, entries)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        s = self.support()
        return "FourierTaylorSeries(n_r_max=%d, n_theta_max=%d, support=%s)" % (
            self.n_r_max,
            self.n_theta_max,
            s,
        )


def load_series(path):
    with open(path) as fh:
        return FourierTaylorSeries.from_dict(json.load(fh))


def save_series(series, path):
    with open(path, "w") as fh:
        json.dump(series.to_dict(), fh, indent=1)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def _as_series(x, like=None):
    if isinstance(x, FourierTaylorSeries):
        return x
    if isinstance(x, RadialSeries):
        if like is None:
            return x.to_series()
        return x.to_series(like.n_theta_max, like.n_r_max)
    raise TypeError("expected a series, got %r" % type(x))


def add(F, G):
    """Coefficientwise sum, promoting to the larger truncation box."""
    F = _as_series(F, G if isinstance(G, FourierTaylorSeries) else None)
    G = _as_series(G, F)
    a, b = F._promote(G)
    return FourierTaylorSeries(a.n_r_max, a.n_theta_max, a._c + b._c, _trusted=True)


def mul(F, G):
    """Product truncated back to the (promoted) box.

    The double convolution is done directly on the nonzero support of both
    factors, so sparse or high-order-only series are cheap.
    """
    F = _as_series(F, G if isinstance(G, FourierTaylorSeries) else None)
    G = _as_series(G, F)
    N = max(F.n_r_max, G.n_r_max)
    K = max(F.n_theta_max, G.n_theta_max)
    sf, sg = F.support(), G.support()
    out = np.zeros((N + 1, 2 * K + 1), dtype=complex)
    if sf is None or sg is None:
        return FourierTaylorSeries(N, K, out, _trusted=True)
    lf, hf, kf = sf
    lg, hg, kg = sg
    if lf + lg > N:
        return FourierTaylorSeries(N, K, out, _trusted=True)
    hf = min(hf, N - lg)
    hg = min(hg, N - lf)
    a = F._c[lf : hf + 1, F.n_theta_max - kf : F.n_theta_max + kf + 1]
    b = G._c[lg : hg + 1, G.n_theta_max - kg : G.n_theta_max + kg + 1]
    if a.shape[0] * a.shape[1] < b.shape[0] * b.shape[1]:
        a, b = b, a
    full = convolve2d(a, b)
    kc = kf + kg  # column of mode 0 in ``full``
    kk = min(K, kc)
    rows = min(full.shape[0], N + 1 - (lf + lg))
    out[lf + lg : lf + lg + rows, K - kk : K + kk + 1] = full[:rows, kc - kk : kc + kk + 1]
    return FourierTaylorSeries(N, K, _symmetrize(out), _trusted=True)


def power(F, m):
    """``F**m`` by repeated squaring (m >= 0)."""
    result = FourierTaylorSeries(F.n_r_max, F.n_theta_max, {(0, 0): 1.0})
    base = F
    while m > 0:
        if m & 1:
            result = mul(result, base)
        m >>= 1
        if m:
            base = mul(base, base)
    return result


def differentiate(F, axis, order=1):
    """Derivative in ``axis`` ('theta' or 'r') of the given order (>= 1)."""
    if order < 1:
        raise ValueError("order must be >= 1")
    F = _as_series(F)
    c = F._c
    if axis in ("theta", "t", 0):
        k = np.arange(-F.n_theta_max, F.n_theta_max + 1)
        fac = (2j * np.pi * k) ** order
        return FourierTaylorSeries(F.n_r_max, F.n_theta_max, c * fac[None, :], _trusted=True)
    if axis in ("r", 1):
        out = np.zeros_like(c)
        N = F.n_r_max
        if order <= N:
            n = np.arange(N + 1 - order)
            fac = np.ones(N + 1 - order)
            for j in range(1, order + 1):
                fac = fac * (n + j)
            out[: N + 1 - order] = c[order:] * fac[:, None]
        return FourierTaylorSeries(F.n_r_max, F.n_theta_max, out, _trusted=True)
    raise ValueError("axis must be 'theta' or 'r'")


def truncate_fourier(F, N):
    """Split ``F = T_N F + R_N F`` into modes ``|k| <= N`` and the rest."""
    if N < 0:
        raise ValueError("N must be >= 0")
    K = F.n_theta_max
    k = np.abs(np.arange(-K, K + 1))
    keep = (k <= N)[None, :]
    T = FourierTaylorSeries(F.n_r_max, K, np.where(keep, F._c, 0), _trusted=True)
    R = FourierTaylorSeries(F.n_r_max, K, np.where(keep, 0, F._c), _trusted=True)
    return T, R


def mode_filter(F, predicate):
    """Keep the modes ``k`` with ``predicate(k)`` true (vectorized on arrays)."""
    K = F.n_theta_max
    k = np.arange(-K, K + 1)
    keep = np.asarray(predicate(k), dtype=bool)[None, :]
    return FourierTaylorSeries(F.n_r_max, K, np.where(keep, F._c, 0), _trusted=True)


def poisson_bracket(F, G):
    """``{F, G} = F_theta G_r - F_r G_theta``."""
    F = _as_series(F, G if isinstance(G, FourierTaylorSeries) else None)
    G = _as_series(G, F)
    return mul(differentiate(F, "theta"), differentiate(G, "r")) - mul(
        differentiate(F, "r"), differentiate(G, "theta")
    )


def weighted_norm(F, p):
    """Majorant norm ``sum |c[n,k]| exp(2 pi |k| h) rho**n`` (bounds the sup)."""
    F = _as_series(F)
    k = np.abs(np.arange(-F.n_theta_max, F.n_theta_max + 1))
    n = np.arange(F.n_r_max + 1)
    a = np.abs(F._c)
    nz = a > 0
    if not np.any(nz):
        return 0.0
    # log domain: the strip weight overflows for high modes even when c is tiny
    logw = (TWO_PI * p.h * k)[None, :] + (n * math.log(p.rho))[:, None]
    with np.errstate(over="ignore"):
        return float(np.sum(np.exp(np.log(a[nz]) + np.broadcast_to(logw, a.shape)[nz])))


def theta_mean(F, tol=1e-14):
    """The k=0 column as a real :class:`RadialSeries`."""
    F = _as_series(F)
    col = F._c[:, F.n_theta_max]
    if np.any(np.abs(col.imag) > tol):
        raise RealityViolation("theta-mean has imaginary part %.3e" % np.abs(col.imag).max())
    return RadialSeries(col.real.copy())


def radial_part(F):
    """Alias of :func:`theta_mean` that never raises (imaginary part dropped)."""
    return RadialSeries(F._c[:, F.n_theta_max].real.copy())


def zero_mean(F):
    """``F - theta_mean(F)``."""
    c = F._c.copy()
    c[:, F.n_theta_max] = 0.0
    return F.with_coeffs(c, symmetrize=False)


def _exp_series_columns(a, N):
    """Taylor coefficients of ``exp(a(r))`` per column, ``a`` of shape (N+1, m)."""
    m = a.shape[1]
    E = np.zeros((N + 1, m), dtype=complex)
    E[0] = np.exp(a[0])
    j = np.arange(N + 1)
    for n in range(1, N + 1):
        # n E_n = sum_{j=1}^n j a_j E_{n-j}
        E[n] = np.sum(j[1 : n + 1, None] * a[1 : n + 1] * E[n - 1 :: -1][:n], axis=0) / n
    return E


def shift_factors(omega, n_r_max, n_theta_max, sign=1.0):
    """Taylor coefficients in r of ``exp(2 pi i k sign omega(r))`` for all k.

    Returns an array of shape ``(n_r_max + 1, 2 n_theta_max + 1)``.
    """
    om = omega.resize(n_r_max).coeffs
    k = np.arange(-n_theta_max, n_theta_max + 1)
    a = (2j * np.pi * sign) * om[:, None] * k[None, :]
    return _exp_series_columns(a, n_r_max)


def compose_shift(F, omega):
    """Series of ``F(theta + omega(r), r)`` by exact Taylor recursion in r."""
    F = _as_series(F)
    N, K = F.n_r_max, F.n_theta_max
    E = shift_factors(omega, N, K)
    c = F._c
    out = np.zeros_like(c)
    for j in range(N + 1):
        if not np.any(E[j]):
            continue
        out[j:] += E[j][None, :] * c[: N + 1 - j]
    return FourierTaylorSeries(N, K, out)


def substitute(A, u=None, v=None, order=None, rel_tol=1e-19):
    """Series of ``A(theta + u(theta, r), r + v(theta, r))`` by Taylor expansion.

    Parameters
    ----------
    A : FourierTaylorSeries
    u, v : FourierTaylorSeries or None
        Small shifts of the angle and the action.
    order : int, optional
        Cap on the total Taylor degree; by default terms are kept until they
        vanish at truncation order or drop below ``rel_tol`` relative to A.
    rel_tol : float
        Terms whose majorant bound is below ``rel_tol * |A|_1`` are skipped.

    Notes
    -----
    When ``u`` and ``v`` have positive r-valuation the expansion is exact at
    truncation order, since higher terms are pushed beyond ``n_r_max``.
    """
    boxes = [A] + [s for s in (u, v) if s is not None]
    N = max(s.n_r_max for s in boxes)
    K = max(s.n_theta_max for s in boxes)
    A = A.resize(N, K)
    u = None if (u is None or u.is_zero()) else u.resize(N, K)
    v = None if (v is None or v.is_zero()) else v.resize(N, K)
    if u is None and v is None:
        return A
    scale = A.l1()
    if scale == 0.0:
        return A
    cap = 10 ** 6 if order is None else int(order)
    lu = u.low_degree() if u is not None else N + 1
    lv = v.low_degree() if v is not None else N + 1
    nu = u.l1() if u is not None else 0.0
    nv = v.l1() if v is not None else 0.0
    a_max = 0 if u is None else cap
    b_max = 0 if v is None else min(cap, A.support()[1] if A.support() else 0)

    one = FourierTaylorSeries(N, K, {(0, 0): 1.0})
    upow = [one]
    vpow = [one]

    def get_pow(store, base, m):
        while len(store) <= m:
            store.append(mul(store[-1], base))
        return store[m]

    result = np.zeros((N + 1, 2 * K + 1), dtype=complex)
    Da = A
    quiet = 0
    a = 0
    fact_a = 1.0
    while a <= a_max:
        if a > 0:
            Da = differentiate(Da, "theta")
            fact_a *= a
            if a * lu > N:
                break
        la = Da.l1()
        if la == 0.0:
            break
        with np.errstate(over="ignore"):
            ua = np.float64(nu) ** a if a else 1.0
        inner = np.zeros_like(result)
        Dab = Da
        fact_b = 1.0
        for b in range(0, b_max + 1):
            if a + b > cap:
                break
            if b > 0:
                Dab = differentiate(Dab, "r")
                fact_b *= b
            if a * lu + b * lv > N:
                break
            lab = Dab.l1()
            if lab == 0.0:
                break
            # l1 is submultiplicative under truncation, so this bounds the term
            with np.errstate(over="ignore"):
                bound = lab * ua * (nv ** b if b else 1.0) / (fact_a * fact_b)
            if (a + b) > 0 and bound < rel_tol * scale:
                continue
            if b == 0:
                inner += Dab._c
            else:
                inner += mul(Dab, get_pow(vpow, v, b))._c / fact_b
        inner_s = FourierTaylorSeries(N, K, inner, _trusted=True)
        if a == 0:
            term = inner_s._c
        else:
            term = mul(inner_s, get_pow(upow, u, a))._c / fact_a
        result += term
        if a > 0:
            quiet = quiet + 1 if np.abs(term).sum() < rel_tol * scale else 0
            if quiet >= 2 or a >= A_TERMS_MAX:
                break
        a += 1
    return FourierTaylorSeries(N, K, result)


def radial_taylor_difference(omega, v, n_theta_max=None, start=1):
    """Series of ``sum_{q >= start} omega^{(q)}(r) v**q / q!``.

    With ``start=1`` this is ``omega(r + v) - omega(r)``; ``start=2`` drops
    the linear term, which is useful when it cancels analytically.
    """
    N = v.n_r_max
    K = v.n_theta_max if n_theta_max is None else n_theta_max
    v = v.resize(N, K)
    out = np.zeros((N + 1, 2 * K + 1), dtype=complex)
    if v.is_zero():
        return FourierTaylorSeries(N, K, out, _trusted=True)
    d = omega.resize(N)
    vq = FourierTaylorSeries(N, K, {(0, 0): 1.0})
    fact = 1.0
    lv = v.low_degree()
    for q in range(1, omega.n_r_max + 1):
        d = d.derivative()
        if not np.any(d.coeffs):
            break
        if q * lv > N:
            break
        vq = mul(vq, v)
        fact *= q
        if q >= start:
            out += mul(d.to_series(K, N), vq)._c / fact
    return FourierTaylorSeries(N, K, out, _trusted=True)


def random_trig_polynomial(rng, rows, kmax, amplitude, n_r_max, n_theta_max):
    """Random real series with coefficients uniform in ``[-amplitude, amplitude]``.

    Parameters
    ----------
    rng : numpy.random.Generator
    rows : iterable of int
        Powers of ``r`` that receive coefficients.
    kmax : int
        Highest Fourier mode (cosine and sine parts are drawn independently).
    """
    coeffs = {}
    for n in rows:
        for k in range(kmax + 1):
            re, im = rng.uniform(-amplitude, amplitude, 2)
            coeffs[(n, k)] = re if k == 0 else complex(re, im) / 2.0
    return FourierTaylorSeries(n_r_max, n_theta_max, coeffs)
