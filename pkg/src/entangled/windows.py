"""One-dimensional windows and their L1 dilations on the periodic grid.

A window is known either through its Fourier transform (``w_hat``, sampled
at ``t * k / L``) or through its spatial profile.  In both cases the torus
version at scale ``t`` is defined so that its spatial samples and its
spectrum are an exact discrete Fourier pair; every form evaluator then sees
the same object whichever side it works on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import expm1

from .grid import Grid1D, forward_ft_1d, inverse_ft_1d, reflect

__all__ = [
    "Window1D",
    "SpectralWindow",
    "SpatialWindow",
    "AbsWindow",
    "gaussian",
    "gaussian_derivative",
    "big_phi",
    "big_phi_window",
    "mass",
]


class Window1D:
    """Interface shared by all windows.

    Subclasses implement :meth:`spectrum` or :meth:`samples`; the other is
    obtained with the discrete transform.  ``spectrum`` returns an
    ``(len(t), N)`` array when ``t`` is an array.
    """

    name: str = "window"
    real: bool = True
    mean_zero: bool = False
    #: magnitudes |s| where the transform has kinks or edges
    breakpoints: tuple = ()

    def spectrum(self, grid: Grid1D, t):
        return forward_ft_1d(self.samples(grid, t), grid, axis=-1)

    def samples(self, grid: Grid1D, t):
        out = inverse_ft_1d(self.spectrum(grid, t), grid, axis=-1)
        return out.real if self.real else out

    def spectrum_reflected(self, grid: Grid1D, t):
        """The dilated transform evaluated at ``-xi``."""
        return reflect(self.spectrum(grid, t), axis=-1)

    def neg_log_deriv_sq(self, s):
        """``-s d/ds |w_hat(s)|^2`` if known in closed form, else ``None``."""
        return None

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


@dataclass(eq=False, repr=False)
class SpectralWindow(Window1D):
    """Window given by a vectorised transform ``ft(s)``.

    The Nyquist bin is set to zero so that real windows stay real on the grid.
    """

    ft: Callable
    name: str = "spectral"
    real: bool = True
    mean_zero: bool = False
    breakpoints: tuple = ()
    neg_log_deriv: Optional[Callable] = None
    space: Optional[Callable] = None
    meta: dict = field(default_factory=dict)

    def spectrum(self, grid: Grid1D, t):
        t_arr = np.asarray(t, dtype=float)
        w = grid.frequencies()
        s = t_arr[..., None] * w
        out = np.asarray(self.ft(s), dtype=complex)
        out = np.broadcast_to(out, s.shape).copy()
        out[..., 0] = 0.0
        return out

    def neg_log_deriv_sq(self, s):
        return None if self.neg_log_deriv is None else self.neg_log_deriv(s)


@dataclass(eq=False, repr=False)
class SpatialWindow(Window1D):
    """Window given by a real spatial profile, periodised over ``images`` copies."""

    profile: Callable
    name: str = "spatial"
    images: int = 200
    real: bool = True
    mean_zero: bool = False

    def samples(self, grid: Grid1D, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        x = grid.positions()
        shifts = np.arange(-self.images, self.images + 1) * grid.L
        out = np.zeros((t_arr.size, grid.N))
        for j, tj in enumerate(t_arr):
            pts = (x[None, :] + shifts[:, None]) / tj
            out[j] = self.profile(pts).sum(axis=0) / tj
        return out if np.ndim(t) else out[0]


@dataclass(eq=False, repr=False)
class AbsWindow(Window1D):
    """Pointwise modulus of the torus samples of another window."""

    base: Window1D
    name: str = ""

    def __post_init__(self):
        self.name = self.name or f"|{self.base.name}|"
        self.real = True
        self.mean_zero = False

    def samples(self, grid: Grid1D, t):
        return np.abs(self.base.samples(grid, t))


def mass(window: Window1D, grid: Grid1D, t: float = 1.0) -> float:
    """Discrete L1 mass ``sum |w_t| dx``."""
    return float(np.abs(window.samples(grid, t)).sum() * grid.spacing)


# -- Gaussians --------------------------------------------------------------

def gaussian(alpha: float = 1.0) -> SpectralWindow:
    """``g_a(x) = exp(-(x/a)^2) / (sqrt(pi) a)``, transform ``exp(-pi^2 a^2 s^2)``."""
    a = float(alpha)

    def ft(s):
        return np.exp(-(math.pi * a * s) ** 2)

    def space(x):
        return np.exp(-((x / a) ** 2)) / (math.sqrt(math.pi) * a)

    def nld(s):
        # -s d/ds exp(-2 pi^2 a^2 s^2)
        return 4 * (math.pi * a * s) ** 2 * np.exp(-2 * (math.pi * a * s) ** 2)

    return SpectralWindow(ft, name=f"g[{a:g}]", neg_log_deriv=nld, space=space, meta={"alpha": a})


def gaussian_derivative(alpha: float = 1.0) -> SpectralWindow:
    """``h_a = a g_a'``, transform ``2 pi i a s exp(-pi^2 a^2 s^2)``; mean zero."""
    a = float(alpha)

    def ft(s):
        return 2j * math.pi * a * s * np.exp(-(math.pi * a * s) ** 2)

    def space(x):
        return -2 * x / a**2 * np.exp(-((x / a) ** 2)) / math.sqrt(math.pi)

    return SpectralWindow(ft, name=f"h[{a:g}]", mean_zero=True, space=space, meta={"alpha": a})


def big_phi(x):
    """``(1 - exp(-x^2)(x^2 + 1)) / (2 x^4)``, the Gaussian superposition.

    Small arguments use the series ``sum_n (-1)^n x^(2n) (n+1) / ((n+2)!)``
    which avoids the cancellation in the closed form.
    """
    x = np.asarray(x, dtype=float)
    u = x * x
    out = np.empty_like(u)
    small = u < 0.5
    us = u[small]
    # 1 - e^{-u}(u+1) = sum_{k>=2} (-1)^k u^k (k-1)/k!   =>   /(2u^2)
    acc = np.zeros_like(us)
    term = np.ones_like(us)
    for n in range(0, 24):
        # coefficient for u^n: (-1)^n (n+1) / (n+2)!  / 2
        acc += term * (n + 1) / math.factorial(n + 2) / 2
        term = -term * us
    out[small] = acc
    ub = u[~small]
    out[~small] = -(expm1(-ub) + ub * np.exp(-ub)) / (2 * ub * ub)
    return out


def big_phi_window() -> SpatialWindow:
    return SpatialWindow(big_phi, name="Phi")
