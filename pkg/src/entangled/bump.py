"""Smooth compactly supported profiles with smooth square roots.

The construction starts from the flat function ``phi(x) = exp(-1/x)`` on
``x > 0``.  A density ``g`` supported in ``[0, eps]`` is built so that its
antiderivative ``G`` equals ``c (3 - y) phi'(y)`` near ``y = 0``; then

* ``f(x) = G(x - 1) + G(3 - x) - 1`` is a bump on ``[1, 3]``, equal to one on
  ``[1 + eps, 3 - eps]``, whose square root is smooth at the edges, and
* ``h(x) = int_{|x|}^3 f(t)/t dt`` is even, supported in ``[-3, 3]`` and equal
  to ``c phi(3 - |x|)`` near the edges, so ``sqrt(h)`` is smooth as well.

With ``eps = 0.001`` the normalising constant is ``c ~ exp(1027)``, far beyond
double range, so everything is evaluated through logarithms.  The mass of
``g`` sits in a layer of width about ``1e-5`` just below ``eps``; integrals
across it use a fixed table of Gauss-Legendre panels, and the closed forms
take over wherever the table would only see underflow.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize
from scipy.special import log_expit, logsumexp

__all__ = [
    "EPS",
    "mollifier_phi",
    "edge_phi1",
    "transition_phi2",
    "BumpFamily",
    "HProfile",
    "build_f",
    "build_h",
    "smoothness_probe",
    "SmoothnessReport",
    "dump_csv",
]

EPS = 0.001

_PANELS = 2**14
_GL_ORDER = 8
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)


def mollifier_phi(x):
    """``exp(-1/x)`` for ``x > 0`` and zero otherwise."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out if out.ndim else float(out)


def _log_phi1(x):
    # log of ((3 - x) phi'(x))' = exp(-1/x) (x^2 - 7x + 3) / x^4, valid on
    # 0 < x < (7 - sqrt(37))/2 where the polynomial is positive
    return -1.0 / x + np.log(x * x - 7.0 * x + 3.0) - 4.0 * np.log(x)


def edge_phi1(x):
    """Closed form of ``((3 - x) phi'(x))'``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    xp = x[pos]
    out[pos] = np.exp(-1.0 / xp) * (xp * xp - 7.0 * xp + 3.0) / xp**4
    return out if out.ndim else float(out)


def _log_phi2(u):
    """``log transition_phi2(u)``; ``-inf`` for ``u <= 0``."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    out[u <= 0] = -np.inf
    mid = (u > 0) & (u < 1)
    um = u[mid]
    out[mid] = log_expit(1.0 / (1.0 - um) - 1.0 / um)
    return out


def transition_phi2(x):
    """``phi(x) / (phi(x) + phi(1 - x))``: zero left of 0, one right of 1."""
    return np.exp(_log_phi2(x)) if np.ndim(x) else float(np.exp(_log_phi2(x)))


def _log_g_unnormalised(y, eps):
    y = np.asarray(y, dtype=float)
    out = np.full_like(y, -np.inf)
    inside = (y > 0) & (y < eps)
    yi = y[inside]
    out[inside] = _log_phi1(yi) + _log_phi2(2.0 - 2.0 * yi / eps)
    return out


def _gl_nodes(a, b):
    """Gauss-Legendre nodes/weights on each ``[a_i, b_i]`` (broadcast over rows)."""
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * _GL_X, half * _GL_W


@dataclass(frozen=True, eq=False)
class BumpFamily:
    """The density ``g``, its antiderivative ``G``, and the bump ``f``.

    Attributes
    ----------
    eps, delta : float
        Transition width and ``eps / 2``; below ``delta`` the closed forms
        are exact.
    log_c : float
        Natural log of the normalising constant ``c``.
    mass_check : float
        ``int g`` recomputed from the panel table (should be 1).
    """

    eps: float
    delta: float
    log_c: float
    mass_check: float
    _edges: np.ndarray
    _G_left: np.ndarray  # G at the left edge of every panel
    _KL_left: np.ndarray  # int_0^y G(s)/(1+s) ds at panel edges
    _KR_left: np.ndarray  # int_0^y G(s)/(3-s) ds at panel edges
    _logG_left: np.ndarray = None  # log G at panel edges (no underflow)

    @property
    def c(self) -> float:
        """``c`` itself; overflows to ``inf`` in double precision."""
        with np.errstate(over="ignore"):
            return float(np.exp(self.log_c))

    # -- the density and its antiderivative on [0, eps] ------------------
    def log_g(self, y):
        return self.log_c + _log_g_unnormalised(y, self.eps)

    def g(self, y):
        y = np.asarray(y, dtype=float)
        return np.exp(self.log_g(y))

    def _panel(self, y):
        h = self.eps / _PANELS
        return np.clip((y // h).astype(int), 0, _PANELS - 1)

    def G(self, y):
        """``int_0^y g``: zero for ``y <= 0`` and one for ``y >= eps``."""
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        out[y >= self.eps] = 1.0
        low = (y > 0) & (y <= self.delta)
        yl = y[low]
        # c (3 - y) phi'(y), with phi'(y) = exp(-1/y) / y^2
        out[low] = np.exp(self.log_c + np.log(3.0 - yl) - 1.0 / yl - 2.0 * np.log(yl))
        mid = (y > self.delta) & (y < self.eps)
        if np.any(mid):
            ym = y[mid]
            i = self._panel(ym)
            xs, ws = _gl_nodes(self._edges[i], ym)
            out[mid] = self._G_left[i] + np.sum(ws * self.g(xs), axis=-1)
        return out

    def log_G(self, y):
        """``log G(y)`` without underflow (``-inf`` for ``y <= 0``)."""
        y = np.asarray(y, dtype=float)
        out = np.full_like(y, -np.inf)
        out[y >= self.eps] = 0.0
        low = (y > 0) & (y <= self.delta)
        out[low] = self._log_G_small(y[low])
        mid = (y > self.delta) & (y < self.eps)
        if np.any(mid):
            ym = y[mid]
            i = self._panel(ym)
            xs, ws = _gl_nodes(self._edges[i], ym)
            part = logsumexp(np.log(ws) + self.log_g(xs), axis=-1)
            out[mid] = np.logaddexp(self._logG_left[i], part)
        return out

    def _log_G_small(self, y):
        return self.log_c + np.log(3.0 - y) - 1.0 / y - 2.0 * np.log(y)

    def _cumulative(self, table, weight, y):
        y = np.asarray(y, dtype=float)
        y = np.clip(y, 0.0, self.eps)
        i = self._panel(y)
        xs, ws = _gl_nodes(self._edges[i], y)
        return table[i] + np.sum(ws * self.G(xs) * weight(xs), axis=-1)

    def KL(self, z):
        """``int_0^z G(s)/(1 + s) ds`` (left edge layer of ``h``)."""
        return self._cumulative(self._KL_left, lambda s: 1.0 / (1.0 + s), z)

    def KR(self, z):
        """``int_0^z G(s)/(3 - s) ds``; equals ``c phi(z)`` for ``z <= delta``."""
        z = np.asarray(z, dtype=float)
        out = self._cumulative(self._KR_left, lambda s: 1.0 / (3.0 - s), z)
        low = (z > 0) & (z <= self.delta)
        out[low] = np.exp(self.log_c - 1.0 / z[low])
        out[z <= 0] = 0.0
        return out

    # -- the bump ----------------------------------------------------------
    def _edge_distance(self, x):
        x = np.asarray(x, dtype=float)
        return np.minimum(x - 1.0, 3.0 - x)

    def f(self, x):
        """The bump: supported in ``[1, 3]``, one on ``[1+eps, 3-eps]``."""
        x = np.asarray(x, dtype=float)
        return self.G(self._edge_distance(x))

    def f_sqrt(self, x):
        """``f**0.5`` with the edge layer evaluated as ``exp(log f / 2)``."""
        x = np.asarray(x, dtype=float)
        y = self._edge_distance(x)
        out = np.sqrt(self.G(y))
        low = (y > 0) & (y <= self.delta)
        out[low] = np.exp(0.5 * self._log_G_small(y[low]))
        return out

    def expect(self, fn) -> float:
        """``int g(y) fn(y) dy`` over the panel table (the part below ``delta`` underflows)."""
        xs, ws = _gl_nodes(self._edges[:-1], self._edges[1:])
        return float(np.sum(ws * self.g(xs) * fn(xs)))

    @property
    def edge_layer(self) -> float:
        """Offset ``y`` where ``g`` peaks: ``f`` jumps near ``1 + y`` and ``3 - y``."""
        xs, ws = _gl_nodes(self._edges[:-1], self._edges[1:])
        return float(xs.ravel()[np.argmax(self.log_g(xs).ravel())])

    def f_prime(self, x):
        """``g(x - 1) - g(3 - x)``."""
        x = np.asarray(x, dtype=float)
        return self.g(x - 1.0) - self.g(3.0 - x)


def _find_peak(eps):
    ys = np.linspace(eps / 2, eps, 20001)[1:-1]
    lg = _log_g_unnormalised(ys, eps)
    j = int(np.argmax(lg))
    res = optimize.minimize_scalar(
        lambda y: -float(_log_g_unnormalised(np.array([y]), eps)[0]),
        bounds=(ys[max(j - 1, 0)], ys[min(j + 1, ys.size - 1)]),
        method="bounded",
        options={"xatol": 1e-14},
    )
    return float(res.x), -float(res.fun)


@lru_cache(maxsize=None)
def build_f(eps: float = EPS) -> BumpFamily:
    """Construct the bump family (cached; ``eps`` defaults to 0.001).

    Raises
    ------
    RuntimeError
        If the adaptive normalisation and the panel table disagree by more
        than ``1e-12``.
    """
    delta = eps / 2
    y_peak, log_peak = _find_peak(eps)
    # width of the mass layer from the curvature of log g at the peak
    hstep = 1e-3 * (eps - y_peak)
    lg = _log_g_unnormalised(np.array([y_peak - hstep, y_peak, y_peak + hstep]), eps)
    curv = -(lg[0] - 2 * lg[1] + lg[2]) / hstep**2
    width = 1.0 / math.sqrt(max(curv, 1e-300))

    def scaled(y):
        return float(np.exp(_log_g_unnormalised(np.array([y]), eps)[0] - log_peak))

    pts = [p for p in (y_peak + k * width for k in (-40, -20, -10, -5, -2, 0, 2, 5)) if delta < p < eps]
    J = 0.0
    bounds = [delta] + sorted(pts) + [eps]
    for a, b in zip(bounds[:-1], bounds[1:]):
        val, err = integrate.quad(scaled, a, b, epsabs=0.0, epsrel=1e-13, limit=400)
        J += val
    log_c = -log_peak - math.log(J)

    # panel table of G, KL, KR on [0, eps]
    edges = np.linspace(0.0, eps, _PANELS + 1)
    xs, ws = _gl_nodes(edges[:-1], edges[1:])
    g_panel = np.sum(ws * np.exp(log_c + _log_g_unnormalised(xs, eps)), axis=-1)
    G_left = np.concatenate(([0.0], np.cumsum(g_panel)))[:-1]
    mass = float(G_left[-1] + g_panel[-1])
    if abs(mass - 1.0) > 1e-12:
        raise RuntimeError(f"bump normalisation did not converge: table mass {mass!r}")
    # absorb the last ~1e-13 into c so that G(eps) = 1 holds to rounding
    log_c -= math.log(mass)
    G_left = G_left / mass
    mass = float(G_left[-1] + g_panel[-1] / mass)

    fam = BumpFamily(eps, delta, log_c, mass, edges, G_left, np.zeros(_PANELS), np.zeros(_PANELS))
    Gx = fam.G(xs)
    kl = np.sum(ws * Gx / (1.0 + xs), axis=-1)
    kr = np.sum(ws * Gx / (3.0 - xs), axis=-1)
    object.__setattr__(fam, "_KL_left", np.concatenate(([0.0], np.cumsum(kl)))[:-1])
    object.__setattr__(fam, "_KR_left", np.concatenate(([0.0], np.cumsum(kr)))[:-1])
    log_panel = logsumexp(np.log(ws) + fam.log_g(xs), axis=-1)
    object.__setattr__(fam, "_logG_left", np.concatenate(([-np.inf], np.logaddexp.accumulate(log_panel)))[:-1])
    return fam


class HProfile:
    """Evaluator for ``h(x) = int_{|x|}^3 f(t)/t dt`` and its square root."""

    def __init__(self, fam: BumpFamily):
        self.fam = fam
        e = fam.eps
        self._kr_eps = float(fam.KR(np.array([e]))[0])
        self._kl_eps = float(fam.KL(np.array([e]))[0])
        self._plateau_base = math.log((3.0 - e) / (1.0 + e)) + self._kr_eps

    @property
    def h0(self) -> float:
        return self._plateau_base + self._kl_eps

    def _H(self, s):
        e = self.fam.eps
        out = np.zeros_like(s)
        left = (s <= 1.0)
        out[left] = self.h0
        layer_l = (s > 1.0) & (s < 1.0 + e)
        out[layer_l] = self._plateau_base + self._kl_eps - self.fam.KL(s[layer_l] - 1.0)
        plateau = (s >= 1.0 + e) & (s <= 3.0 - e)
        out[plateau] = np.log((3.0 - e) / s[plateau]) + self._kr_eps
        layer_r = (s > 3.0 - e) & (s < 3.0)
        out[layer_r] = self.fam.KR(3.0 - s[layer_r])
        return out

    def h(self, x):
        x = np.asarray(x, dtype=float)
        return self._H(np.abs(x))

    __call__ = h

    def sqrt(self, x):
        """``h**0.5``; equals ``exp((log c - 1/z)/2)``, ``z = 3 - |x|``, near the edges."""
        x = np.asarray(x, dtype=float)
        z = 3.0 - np.abs(x)
        out = np.sqrt(self.h(x))
        low = (z > 0) & (z <= self.fam.delta)
        out[low] = np.exp(0.5 * (self.fam.log_c - 1.0 / z[low]))
        return out

    def derivative(self, x):
        """``h'(x) = -(f(x) + f(-x)) / x``."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        nz = x != 0
        xn = x[nz]
        out[nz] = -(self.fam.f(xn) + self.fam.f(-xn)) / xn
        return out


def build_h(fam: BumpFamily | None = None) -> HProfile:
    return HProfile(build_f() if fam is None else fam)


@dataclass
class SmoothnessReport:
    """Finite-difference derivative magnitudes near a point.

    ``estimates[n-1, k]`` is the largest one-sided order-``n`` difference
    quotient at ``steps[k]``; ``slopes[n-1]`` is the log-log slope of the
    estimates against ``1/step`` over the finest four steps.
    """

    x0: float
    steps: np.ndarray
    estimates: np.ndarray
    slopes: np.ndarray
    blowup_threshold: float = 0.25

    @property
    def bounded(self) -> np.ndarray:
        return self.slopes <= self.blowup_threshold

    @property
    def sup(self) -> np.ndarray:
        return self.estimates.max(axis=1)


def smoothness_probe(w, x0: float, max_order: int = 3, steps=None, tail: int = 4) -> SmoothnessReport:
    """Probe a 1D evaluator for derivative blow-up at ``x0``.

    Forward and backward difference quotients of orders ``1..max_order`` are
    taken at geometrically shrinking steps (one-sided stencils, so even kinks
    such as ``|x|**0.5`` are not cancelled by symmetry).  A derivative whose
    estimates grow like ``step**-a`` with ``a > 0.25`` over the finest steps is
    flagged as a blow-up.
    """
    if not 1 <= max_order <= 4:
        raise ValueError("max_order must be between 1 and 4")
    steps = np.geomspace(1e-1, 1e-4, 13) if steps is None else np.asarray(steps, dtype=float)
    if np.any(x0 + steps * max_order == x0) or np.any(steps <= 0):
        raise ValueError("step underflow: stencil collapses at this x0")
    est = np.zeros((max_order, steps.size))
    for k, hs in enumerate(steps):
        j = np.arange(max_order + 1)
        right = np.asarray(w(x0 + j * hs), dtype=float)
        left = np.asarray(w(x0 - j * hs), dtype=float)[::-1]
        for n in range(1, max_order + 1):
            dr = np.diff(right[: n + 1], n)[0]
            dl = np.diff(left[-(n + 1):], n)[0]
            est[n - 1, k] = max(abs(dr), abs(dl)) / hs**n
    slopes = np.zeros(max_order)
    tail_h = np.log(1.0 / steps[-tail:])
    for n in range(max_order):
        e = est[n, -tail:]
        if np.all(e > 0):
            slopes[n] = np.polyfit(tail_h, np.log(e), 1)[0]
        elif np.any(e > 0) and e[-1] > 0:
            # estimates appear from zero as the step shrinks: treat as growth
            slopes[n] = np.inf
    return SmoothnessReport(float(x0), steps, est, slopes)


def dump_csv(path, x=None, fam: BumpFamily | None = None) -> None:
    """Write columns ``x, f, f_sqrt, h, h_sqrt`` for plotting."""
    fam = build_f() if fam is None else fam
    hp = build_h(fam)
    x = np.linspace(-4.0, 4.0, 8193) if x is None else np.asarray(x, dtype=float)
    cols = [x, fam.f(x), fam.f_sqrt(x), hp.h(x), hp.sqrt(x)]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "f", "f_sqrt", "h", "h_sqrt"])
        for row in zip(*cols):
            wr.writerow([repr(float(v)) for v in row])
