"""Fourier multipliers on the dual grid and their decomposition into windows.

Pipeline: a symbol ``m`` is split by a smooth angular partition into pieces
living in double cones around the axes; each piece is cut into annular
slices ``m_t = m * theta_hat(t .)`` whose scale integral reproduces it; each
slice is expanded in modulated window products with coefficients ``mu_t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.special import expit

from .bump import build_f, build_h
from .grid import Grid1D, SampledField2D, ScaleQuadrature, inverse_ft_2d, scale_integral
from .windows import SpectralWindow

__all__ = [
    "Symbol2D",
    "AnnularPiece",
    "CoefficientField",
    "ModulatedWindow",
    "builtin_symbol",
    "BUILTIN_SYMBOLS",
    "cz_seminorm_estimate",
    "cone_partition",
    "annular_theta",
    "annulus_log_width",
    "slice_mt",
    "reproduce",
    "coefficients_mu_t",
    "build_phi_u",
    "build_psi_v",
    "root_window",
    "theta1_hat",
    "theta2_hat",
    "symbol_to_kernel",
]

CONE_APERTURE = 1.001


@dataclass(frozen=True, eq=False)
class Symbol2D:
    """Multiplier sampled on the dual grid.

    ``func``, when present, evaluates the symbol at arbitrary frequencies and
    is used for rescaled resampling.  ``dc`` records how the origin bin was
    filled ("zero" for symbols singular at the origin, "value" otherwise).
    """

    grid: Grid1D
    values: np.ndarray
    name: str = "symbol"
    func: Optional[Callable] = None
    cz_order: int = 12
    dc: str = "value"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=complex)
        if v.shape != (self.grid.N, self.grid.N):
            raise ValueError("symbol shape does not match grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("symbol must be bounded (finite) on the grid")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid1D, func, name="symbol", singular_at_origin=True, **kw):
        v = _sample_symmetrised(grid, func)
        c = grid.N // 2
        if singular_at_origin:
            v[c, c] = 0.0
        return cls(grid, v, name=name, func=func, dc="zero" if singular_at_origin else "value", **kw)

    def on(self, grid: Grid1D) -> "Symbol2D":
        """Resample on another grid (needs ``func``)."""
        if self.func is None:
            raise ValueError(f"symbol {self.name!r} has no evaluator; cannot resample")
        return Symbol2D.from_function(grid, self.func, self.name, self.dc == "zero",
                                      cz_order=self.cz_order, meta=dict(self.meta))

    def with_values(self, values, name=None, func=None) -> "Symbol2D":
        return Symbol2D(self.grid, values, name or self.name, func, self.cz_order, self.dc, dict(self.meta))

    @property
    def sup(self) -> float:
        return float(np.abs(self.values).max())


def _sample_symmetrised(grid: Grid1D, func) -> np.ndarray:
    """Sample ``func`` on the dual grid, averaging over +-Nyquist on the edge lines.

    The first row and column stand for both ``-N/(2L)`` and ``+N/(2L)``.
    Averaging the two keeps ``m(-w) = conj m(w)`` exact on the grid whenever
    it holds for ``func``; odd symbols vanish there.
    """
    xi, eta = grid.dual_mesh()

    def ev(a, b):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.asarray(func(a, b), dtype=complex) * np.ones_like(a)

    v = ev(xi, eta)
    ny = grid.nyquist
    row = ev(np.full(grid.N, ny), eta[0])
    v[0, :] = 0.5 * (v[0, :] + row)
    col = ev(xi[:, 0], np.full(grid.N, ny))
    v[:, 0] = 0.5 * (v[:, 0] + col)
    corners = [ev(np.array([a]), np.array([b]))[0] for a in (-ny, ny) for b in (-ny, ny)]
    v[0, 0] = 0.25 * sum(corners)
    return v


# -- angular partition -----------------------------------------------------

def _log_angular_profile(angle):
    """log of a profile equal to 1 below pi/2 - arctan(1.001) and 0 above arctan(1.001)."""
    fam = build_f()
    a_hi = math.atan(CONE_APERTURE)
    a_lo = math.pi / 2 - a_hi
    y = fam.eps * (a_hi - np.asarray(angle, dtype=float)) / (a_hi - a_lo)
    return fam.log_G(y)


def cone_weights(xi, eta):
    """Smooth partition ``(chi_xi, chi_eta)`` of the punctured plane.

    ``chi_eta`` vanishes outside ``|xi| <= 1.001 |eta|`` and ``chi_xi``
    outside ``|eta| <= 1.001 |xi|``; the two add up to one.  Both are ratios
    ``F(a) / (F(a) + F(b))`` of the bump edge evaluated at the two angles to
    the axes, computed from logarithms because ``F`` underflows in the middle
    of the transition band.
    """
    axi, aeta = np.abs(xi), np.abs(eta)
    le = _log_angular_profile(np.arctan2(axi, aeta))
    lx = _log_angular_profile(np.arctan2(aeta, axi))
    # at least one angle is below pi/4, so le and lx are never both -inf;
    # the origin (both angles zero) is split evenly
    chi_eta = expit(le - lx)
    chi_xi = expit(lx - le)
    return chi_xi, chi_eta


def _riesz_ratio(xi, eta):
    return -1j * xi / (np.abs(xi) + np.abs(eta))


def _riesz_euclid(xi, eta):
    return -1j * xi / np.hypot(xi, eta)


def _cone_eta(xi, eta):
    return -1j * cone_weights(xi, eta)[1] * eta / (np.abs(xi) + np.abs(eta))


def _one(xi, eta):
    return np.ones(np.broadcast(xi, eta).shape, dtype=complex)


def _sqrt_radius(xi, eta):
    return np.sqrt(np.hypot(xi, eta))


def _annulus(xi, eta):
    return annular_theta()(np.hypot(xi, eta))


BUILTIN_SYMBOLS = {
    "one": (_one, False),
    "riesz-ratio": (_riesz_ratio, True),
    "riesz-euclid": (_riesz_euclid, True),
    "cone-eta": (_cone_eta, True),
    "annulus": (_annulus, False),
    "sqrt-radius": (_sqrt_radius, True),
}


def builtin_symbol(name: str, grid: Grid1D) -> Symbol2D:
    """Named symbols.

    ``riesz-ratio`` is ``-i xi / (|xi| + |eta|)`` and ``cone-eta`` its
    counterpart ``-i eta / (|xi| + |eta|)`` restricted to the eta-cone; the
    ``-i`` makes these odd symbols Hermitian so that forms with real inputs
    are real.  ``sqrt-radius`` is an out-of-class example.
    """
    try:
        func, singular = BUILTIN_SYMBOLS[name]
    except KeyError:
        raise ValueError(f"unknown symbol {name!r}; choose from {sorted(BUILTIN_SYMBOLS)}") from None
    return Symbol2D.from_function(grid, func, name, singular)


# -- symbol class check ----------------------------------------------------

def _central_diff(a, axis, h):
    return (np.roll(a, -1, axis) - np.roll(a, 1, axis)) / (2 * h)


def cz_seminorm_estimate(m: Symbol2D, order: int, return_table: bool = False):
    """Largest ``|d^a m| (|xi| + |eta|)^|a|`` over ``|a| <= order``.

    Derivatives are repeated centred differences on the dual grid.  Points
    whose stencil reaches the origin or wraps around the grid are skipped.

    Raises
    ------
    ValueError
        If ``order`` exceeds ``m.cz_order`` or the stencil (``2 order + 1``
        points) is wider than ``N / 4``.
    """
    n = m.grid.N
    if order < 0 or order > m.cz_order:
        raise ValueError(f"order must be in [0, {m.cz_order}]")
    if 2 * order + 1 > n // 4:
        raise ValueError(f"order {order} needs a stencil of {2 * order + 1} points; grid allows {n // 4}")
    h = m.grid.dual_spacing
    xi, eta = m.grid.dual_mesh()
    radius = np.abs(xi) + np.abs(eta)
    idx = np.arange(n) - n // 2
    I, J = np.meshgrid(idx, idx, indexing="ij")
    table = {}
    # cache derivatives along xi first, then along eta
    dx = [m.values]
    for _ in range(order):
        dx.append(_central_diff(dx[-1], 0, h))
    best = 0.0
    for a in range(order + 1):
        cur = dx[a]
        for b in range(order + 1 - a):
            if b:
                cur = _central_diff(cur, 1, h)
            # stencil reaches a +- a rows and b +- b columns
            ok = (np.abs(I) + a < n // 2) & (np.abs(J) + b < n // 2)
            ok &= ~((np.abs(I) <= a) & (np.abs(J) <= b))
            val = float(np.max(np.abs(cur[ok]) * radius[ok] ** (a + b), initial=0.0))
            table[(a, b)] = val
            best = max(best, val)
    return (best, table) if return_table else best


def cone_partition(m: Symbol2D, order: Optional[int] = None):
    """Split ``m`` into ``(m_xi, m_eta)`` supported in the two double cones.

    With ``order`` the CZ estimates of input and pieces are computed and the
    ratio ``kappa`` is stored in each piece's ``meta``.
    """
    xi, eta = m.grid.dual_mesh()
    chi_xi, chi_eta = cone_weights(xi, eta)
    fx = fe = None
    if m.func is not None:
        base = m.func
        fx = lambda a, b: base(a, b) * cone_weights(a, b)[0]  # noqa: E731
        fe = lambda a, b: base(a, b) * cone_weights(a, b)[1]  # noqa: E731
    m_eta_vals = m.values * chi_eta
    m_xi = m.with_values(m.values - m_eta_vals, name=f"{m.name}|xi-cone", func=fx)
    m_eta = m.with_values(m_eta_vals, name=f"{m.name}|eta-cone", func=fe)
    if order is not None:
        base_est = cz_seminorm_estimate(m, order)
        for piece in (m_xi, m_eta):
            piece.meta["cz_order"] = order
            piece.meta["kappa"] = cz_seminorm_estimate(piece, order) / base_est if base_est else math.inf
    return m_xi, m_eta


# -- annular slicing -------------------------------------------------------

@lru_cache(maxsize=None)
def annulus_log_width() -> float:
    """``int f(1 + 2(s - 1.7)) ds / s``, the dt/t mass of the unnormalised profile.

    Integration by parts turns it into ``int g(y) ln((5.4 - y)/(3.4 + y)) dy``;
    the result is cross-checked by adaptive quadrature of the defining form.
    """
    fam = build_f()
    width = fam.expect(lambda y: np.log((5.4 - y) / (3.4 + y)))
    e, y0 = fam.eps, fam.edge_layer
    knots = (1.7, 1.7 + y0 / 2, 1.7 + e / 2, 2.7 - e / 2, 2.7 - y0 / 2, 2.7)
    check = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        val, _ = integrate.quad(lambda s: float(fam.f(np.array([1 + 2 * (s - 1.7)]))[0]) / s, a, b,
                                epsabs=1e-14, epsrel=1e-13, limit=400)
        check += val
    if abs(check - width) > 1e-10:
        raise RuntimeError(f"annulus normalisation did not converge ({width} vs {check})")
    return width


class _Theta:
    def __init__(self):
        self.fam = build_f()
        self.norm = 1.0 / annulus_log_width()
        y0, e = self.fam.edge_layer, self.fam.eps
        self.breakpoints = (1.7 + y0 / 2, 2.7 - y0 / 2)
        # subdivision points resolving both edge layers, for adaptive quadrature
        self.knots = (1.7, 1.7 + y0 / 2, 1.7 + e / 2, 2.7 - e / 2, 2.7 - y0 / 2, 2.7)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return self.norm * self.fam.f(1.0 + 2.0 * (s - 1.7))


@lru_cache(maxsize=None)
def annular_theta():
    """Radial profile supported in ``[1.7, 2.7]`` with ``int theta(s) ds/s = 1``."""
    return _Theta()


@dataclass(frozen=True, eq=False)
class AnnularPiece:
    t: float
    grid: Grid1D
    values: np.ndarray
    symbol: Symbol2D


def slice_mt(m: Symbol2D, t: float) -> AnnularPiece:
    """``m_t(xi, eta) = m(xi, eta) theta(t |(xi, eta)|)``."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    xi, eta = m.grid.dual_mesh()
    vals = m.values * annular_theta()(t * np.hypot(xi, eta))
    return AnnularPiece(float(t), m.grid, vals, m)


def reproduce(m: Symbol2D, quad: ScaleQuadrature):
    """``sum_j w_j m_{t_j}`` and the mask of bins the quadrature fully covers."""
    xi, eta = m.grid.dual_mesh()
    r = np.hypot(xi, eta)
    theta = annular_theta()
    acc = scale_integral(theta(quad.nodes[:, None, None] * r[None]), quad)
    covered = (r >= 2.7 / quad.t_max) & (r <= 1.7 / quad.t_min)
    return m.values * acc, covered


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """``mu_t(u, v)`` on the spatial grid of the slice, plus its decay certificate."""

    t: float
    grid: Grid1D
    values: np.ndarray
    certificate: float
    weight_power: int = 12

    @property
    def u(self):
        return self.grid.positions()

    @property
    def mu_tilde(self):
        u = np.abs(self.u)[:, None]
        return (1 + u) ** 10 * self.values


def coefficients_mu_t(piece: AnnularPiece, weight_power: int = 12) -> CoefficientField:
    """``mu_t(u, v) = int m_t(xi/t, eta/t) exp(-2 pi i (u xi + v eta)) dxi deta``.

    The rescaled slice ``m(xi/t, eta/t) theta(|(xi, eta)|)`` lives on the fixed
    annulus ``1.7 <= r <= 2.7``, which must fit below the grid's Nyquist
    frequency.  Symbols without an evaluator are rescaled exactly only at
    ``t = 1``; otherwise the transform of the unscaled slice is evaluated at
    ``(t u, t v)`` by a direct (non-uniform) sum, which is a different Riemann
    sum of the same integral and only available for ``t <= 1``.
    """
    grid = piece.grid
    if 2.7 > grid.nyquist:
        raise ValueError(f"rescaled slice (radius 2.7) unresolved: Nyquist is {grid.nyquist:g}")
    xi, eta = grid.dual_mesh()
    t = piece.t
    m = piece.symbol
    if m.func is not None or t == 1.0:
        if m.func is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                mv = np.asarray(m.func(xi / t, eta / t), dtype=complex) * np.ones_like(xi)
            c = grid.N // 2
            mv[c, c] = m.values[c, c] if m.dc == "value" else 0.0
        else:
            mv = m.values
        ms = mv * annular_theta()(np.hypot(xi, eta))
        mu = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(ms))) / grid.L**2
    else:
        # the unscaled slice must be resolved, and (t u, t v) must stay inside
        # one period of the torus
        if 2.7 / t > grid.nyquist or t > 1.0:
            raise ValueError(f"slice at t = {t:g} unresolved without a symbol evaluator "
                             f"(needs {2.7 / grid.nyquist:g} <= t <= 1)")
        x = grid.positions()
        w = grid.frequencies()
        E = np.exp(-2j * np.pi * np.outer(t * x, w))
        mu = t**2 * (E @ piece.values @ E.T) / grid.L**2
    u = np.abs(grid.positions())
    wgt = (1 + u) ** weight_power
    cert = float(np.max(np.abs(mu) * wgt[:, None] * wgt[None, :]))
    return CoefficientField(t, grid, mu, cert, weight_power)


# -- windows from the bump ---------------------------------------------------

def theta1_hat(s):
    """``f((s + 4)/2)``: one on ``|s| <= 2 - 2 eps``, zero for ``|s| >= 2``."""
    return build_f().f((np.asarray(s, dtype=float) + 4.0) / 2.0)


def theta2_hat(s):
    """``f(s) + f(-s)``."""
    s = np.asarray(s, dtype=float)
    fam = build_f()
    return fam.f(s) + fam.f(-s)


@dataclass(eq=False, repr=False)
class ModulatedWindow(SpectralWindow):
    """Spectral window with a modulation parameter (``u`` or ``v``)."""

    param: float = 0.0


def _edge_points(fam):
    """Points resolving both edge layers of ``f`` on ``[1, 3]``."""
    y0, e = fam.edge_layer, fam.eps
    return (1.0, 1.0 + y0, 1.0 + e, 3.0 - e, 3.0 - y0, 3.0)


def build_phi_u(u: float, L: Optional[float] = None) -> ModulatedWindow:
    """Window with transform ``(1+|u|)^-5 theta1_hat(s)^(1/2) exp(pi i u s)``.

    In space it is ``(1+|u|)^-5`` times the real even profile translated by
    ``-u/2``.  ``L`` (the torus side), when given, guards against the
    translation wrapping around.
    """
    u = float(u)
    if L is not None and abs(u) > L / 2:
        raise ValueError(f"|u| = {abs(u)} aliases on a torus of side {L}")
    fam = build_f()
    amp = (1 + abs(u)) ** -5

    def ft(s):
        s = np.asarray(s, dtype=float)
        return amp * fam.f_sqrt((s + 4.0) / 2.0) * np.exp(1j * np.pi * u * s)

    edge = 2.0 - 2.0 * fam.edge_layer
    return ModulatedWindow(ft, name=f"phi^({u:g})", breakpoints=(edge, 2.0), param=u, meta={"u": u})


def build_psi_v(v: float, L: Optional[float] = None) -> ModulatedWindow:
    """Window with transform ``theta2_hat(s)^(1/2) exp(pi i v s)`` (mean zero)."""
    v = float(v)
    if L is not None and abs(v) > L / 2:
        raise ValueError(f"|v| = {abs(v)} aliases on a torus of side {L}")
    fam = build_f()

    def ft(s):
        s = np.asarray(s, dtype=float)
        return (fam.f_sqrt(s) + fam.f_sqrt(-s)) * np.exp(1j * np.pi * v * s)

    def nld(s):
        # -s d/ds theta2_hat(s) = -s (f'(s) - f'(-s))
        s = np.asarray(s, dtype=float)
        return -s * (fam.f_prime(s) - fam.f_prime(-s))

    return ModulatedWindow(ft, name=f"psi^({v:g})", mean_zero=True, breakpoints=_edge_points(fam),
                           neg_log_deriv=nld, param=v, meta={"v": v})


def root_window() -> SpectralWindow:
    """Even window with ``|transform|^2 = int_s^inf theta2_hat(r) dr / r``.

    Its pair with ``psi^(v)`` satisfies ``-t d/dt |phi_hat(t s)|^2 = |psi_hat(t s)|^2``.
    """
    fam = build_f()
    hp = build_h(fam)

    def nld(s):
        return fam.f(np.abs(np.asarray(s, dtype=float)))

    return SpectralWindow(lambda s: hp.sqrt(s).astype(complex), name="phi_root",
                          breakpoints=_edge_points(fam), neg_log_deriv=nld,
                          meta={"value_at_zero_sq": hp.h0})


def symbol_to_kernel(m: Symbol2D) -> SampledField2D:
    """Kernel ``kappa`` with ``kappa_hat = m`` on the torus (inverse transform)."""
    F = SampledField2D(m.grid, m.values, real=False, domain="frequency")
    k = inverse_ft_2d(F).values
    real = bool(np.max(np.abs(k.imag), initial=0.0) <= 1e-12 * max(1.0, np.abs(k).max()))
    return SampledField2D(m.grid, k.real if real else k, real=real)
