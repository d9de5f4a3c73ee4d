"""Periodic grids, the Fourier convention, L1 dilations and dt/t quadrature.

The real line is replaced by a torus of side ``L`` sampled at ``N`` points
``x_n = -L/2 + n * L/N``.  Dual frequencies are ``k / L`` for
``k = -N/2, ..., N/2 - 1``.  All arrays are stored in this *centered* order
(index ``N/2`` is the origin) in space and in frequency alike.

The transform matches ``f_hat(w) = int f(x) exp(-2 pi i x w) dx`` with the
Riemann sum on the torus::

    f_hat(w_k) = dx * sum_n f(x_n) exp(-2 pi i x_n w_k)
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Grid1D",
    "SampledField2D",
    "ScaleQuadrature",
    "ResolutionWarning",
    "stable_sum",
    "forward_ft_1d",
    "inverse_ft_1d",
    "forward_ft_2d",
    "inverse_ft_2d",
    "reflect",
    "dilate_l1",
    "scale_integral",
    "lp_norm",
    "write_field",
    "read_field",
]


class ResolutionWarning(UserWarning):
    """A dilated window has fewer than four samples across its support."""


def stable_sum(values) -> float | complex:
    """Order-independent, correctly rounded sum of an array.

    ``math.fsum`` is exact up to the final rounding, so serial and chunked
    evaluations agree bit for bit.
    """
    a = np.asarray(values).ravel()
    if np.iscomplexobj(a):
        return complex(math.fsum(a.real.tolist()), math.fsum(a.imag.tolist()))
    return math.fsum(a.tolist())


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid of ``N`` samples on ``[-L/2, L/2)``."""

    L: float = 16.0
    N: int = 64

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        n = int(self.N)
        if n != self.N or n < 2 or n & (n - 1):
            raise ValueError(f"N must be a power of two >= 2, got {self.N}")

    @property
    def spacing(self) -> float:
        return self.L / self.N

    @property
    def dual_spacing(self) -> float:
        return 1.0 / self.L

    @property
    def nyquist(self) -> float:
        return 0.5 * self.N / self.L

    def positions(self) -> np.ndarray:
        return (np.arange(self.N) - self.N // 2) * self.spacing

    def frequencies(self) -> np.ndarray:
        return (np.arange(self.N) - self.N // 2) / self.L

    def mesh(self):
        x = self.positions()
        return np.meshgrid(x, x, indexing="ij")

    def dual_mesh(self):
        w = self.frequencies()
        return np.meshgrid(w, w, indexing="ij")


@dataclass(frozen=True, eq=False)
class SampledField2D:
    """Samples of a function on the ``N x N`` grid (or its dual).

    ``values[i, j]`` is the sample at ``(x_i, y_j)``; in the frequency domain
    at ``(xi_i, eta_j)``.
    """

    grid: Grid1D
    values: np.ndarray
    real: bool = False
    domain: str = "space"

    def __post_init__(self):
        v = np.asarray(self.values)
        n = self.grid.N
        if v.shape != (n, n):
            raise ValueError(f"field shape {v.shape} does not match grid N={n}")
        if self.domain not in ("space", "frequency"):
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.real:
            if np.iscomplexobj(v):
                if np.max(np.abs(v.imag), initial=0.0) > 1e-12:
                    raise ValueError("real-flagged field has an imaginary part")
                v = v.real
            v = np.ascontiguousarray(v, dtype=np.float64)
        else:
            v = np.ascontiguousarray(v, dtype=np.complex128)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid1D, func, real: bool = True) -> "SampledField2D":
        x, y = grid.mesh()
        return cls(grid, func(x, y), real=real)

    def with_values(self, values, real: bool | None = None) -> "SampledField2D":
        return SampledField2D(self.grid, values, self.real if real is None else real, self.domain)

    def __mul__(self, scalar):
        return self.with_values(self.values * scalar, real=self.real and np.isrealobj(scalar))

    __rmul__ = __mul__


def _check_axis_length(a: np.ndarray, grid: Grid1D, axis: int):
    if a.shape[axis] != grid.N:
        raise ValueError(f"axis {axis} has length {a.shape[axis]}, grid has N={grid.N}")


def forward_ft_1d(a, grid: Grid1D, axis: int = -1) -> np.ndarray:
    """Riemann-sum Fourier transform along one axis (centered order in and out)."""
    a = np.asarray(a)
    _check_axis_length(a, grid, axis)
    s = np.fft.ifftshift(a, axes=axis)
    return grid.spacing * np.fft.fftshift(np.fft.fft(s, axis=axis), axes=axis)


def inverse_ft_1d(a, grid: Grid1D, axis: int = -1) -> np.ndarray:
    """Inverse of :func:`forward_ft_1d`: ``f(x) = (1/L) sum_k f_hat(w_k) exp(2 pi i x w_k)``."""
    a = np.asarray(a)
    _check_axis_length(a, grid, axis)
    s = np.fft.ifftshift(a, axes=axis)
    return np.fft.fftshift(np.fft.ifft(s, axis=axis), axes=axis) / grid.spacing


def forward_ft_2d(f: SampledField2D) -> SampledField2D:
    """Transform a space field to its dual-grid spectrum."""
    if f.domain != "space":
        raise ValueError("forward_ft_2d expects a space-domain field")
    v = f.values
    if v.shape != (f.grid.N, f.grid.N):
        raise ValueError("dimension mismatch")
    s = np.fft.ifftshift(v)
    out = f.grid.spacing**2 * np.fft.fftshift(np.fft.fft2(s))
    return SampledField2D(f.grid, out, real=False, domain="frequency")


def inverse_ft_2d(F: SampledField2D, real: bool = False) -> SampledField2D:
    """Inverse of :func:`forward_ft_2d`."""
    if F.domain != "frequency":
        raise ValueError("inverse_ft_2d expects a frequency-domain field")
    s = np.fft.ifftshift(F.values)
    out = np.fft.fftshift(np.fft.ifft2(s)) / F.grid.spacing**2
    if real:
        out = out.real
    return SampledField2D(F.grid, out, real=real, domain="space")


def reflect(a, axis: int = -1) -> np.ndarray:
    """Return ``a`` evaluated at ``-k`` (centered order, index ``j -> (N - j) mod N``)."""
    a = np.asarray(a)
    n = a.shape[axis]
    idx = (n - np.arange(n)) % n
    return np.take(a, idx, axis=axis)


def _effective_width(w: np.ndarray, x: np.ndarray) -> float:
    mass = np.abs(w)
    total = mass.sum()
    if total == 0:
        return 0.0
    centre = (mass * x).sum() / total
    return 2.0 * math.sqrt(max((mass * (x - centre) ** 2).sum() / total, 0.0))


def dilate_l1(w, t: float, grid: Grid1D) -> np.ndarray:
    """Resample the L1 dilation ``t^-1 w(x / t)`` of a sampled window.

    The window is treated as band limited: its transform ``w_hat(t k / L)`` is
    evaluated from the samples and frequencies beyond Nyquist are dropped.
    Total mass (the zero-frequency value) is preserved exactly.
    """
    if not t > 0:
        raise ValueError(f"dilation parameter must be positive, got {t}")
    w = np.asarray(w)
    _check_axis_length(w, grid, -1)
    if t == 1:
        return w.copy()
    x = grid.positions()
    width = _effective_width(w, x)
    if t * width < 4 * grid.spacing:
        warnings.warn(
            f"dilated window (width {t * width:.3g}) is unresolved at spacing {grid.spacing:.3g}",
            ResolutionWarning,
            stacklevel=2,
        )
    freqs = grid.frequencies() * t
    inside = np.abs(freqs) < grid.nyquist
    phase = np.exp(-2j * np.pi * np.outer(freqs[inside], x))
    spec = np.zeros(grid.N, dtype=complex)
    spec[inside] = grid.spacing * (phase @ w)
    out = inverse_ft_1d(spec, grid)
    return out.real if np.isrealobj(w) else out


@dataclass(frozen=True, eq=False)
class ScaleQuadrature:
    """Nodes and weights for integrals ``int g(t) dt/t`` over ``[t_min, t_max]``.

    The default rule is the log-midpoint rule with equal weights
    ``ln(t_max/t_min)/M``.  :meth:`composite` builds a Gauss-Legendre rule in
    ``ln t`` with prescribed breakpoints; its weights are unequal but still
    positive and sum to ``ln(t_max/t_min)``.
    """

    t_min: float
    t_max: float
    nodes: np.ndarray
    weights: np.ndarray
    kind: str = "log-midpoint"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0 < self.t_min < self.t_max):
            raise ValueError(f"need 0 < t_min < t_max, got {self.t_min}, {self.t_max}")
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.shape != weights.shape or nodes.ndim != 1 or nodes.size == 0:
            raise ValueError("nodes and weights must be matching non-empty 1D arrays")
        if np.any(weights <= 0):
            raise ValueError("quadrature weights must be positive")
        slack = 1e-12 * self.t_max
        if nodes.min() < self.t_min - slack or nodes.max() > self.t_max + slack:
            raise ValueError("quadrature nodes outside [t_min, t_max]")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def M(self) -> int:
        return self.nodes.size

    @property
    def log_length(self) -> float:
        return math.log(self.t_max / self.t_min)

    @classmethod
    def log_midpoint(cls, t_min: float, t_max: float, M: int = 256) -> "ScaleQuadrature":
        if M < 1:
            raise ValueError("M must be positive")
        if not (0 < t_min < t_max):
            raise ValueError(f"need 0 < t_min < t_max, got {t_min}, {t_max}")
        h = math.log(t_max / t_min) / M
        nodes = t_min * np.exp((np.arange(M) + 0.5) * h)
        return cls(t_min, t_max, nodes, np.full(M, h), "log-midpoint", {"M": M})

    @classmethod
    def for_grid(cls, grid: Grid1D, M: int = 256, snap: bool = True) -> "ScaleQuadrature":
        """Default rule on ``[4 dx, L]``.

        With ``snap`` the upper end is moved (by less than one node spacing in
        ``ln t``) so that the dt/t mass of the annular profile is an integer
        number of node spacings.  That profile is close to an indicator, so
        the midpoint rule then reproduces it to the accuracy of its edge
        width rather than of the node spacing.
        """
        t_min = 4 * grid.spacing
        t_max = grid.L
        if snap:
            from .symbols import annulus_log_width

            annulus = annulus_log_width()
            k = max(1, round(M * annulus / math.log(t_max / t_min)))
            t_max = t_min * math.exp(M * annulus / k)
        return cls.log_midpoint(t_min, t_max, M)

    @classmethod
    def composite(
        cls,
        t_min: float,
        t_max: float,
        breakpoints=(),
        order: int = 8,
        max_log_width: float = 0.125,
    ) -> "ScaleQuadrature":
        """Composite Gauss-Legendre rule in ``s = ln t`` split at ``breakpoints``."""
        lo, hi = math.log(t_min), math.log(t_max)
        cuts = [lo, hi]
        for b in np.asarray(breakpoints, dtype=float).ravel():
            if t_min < b < t_max:
                cuts.append(math.log(b))
        cuts = np.unique(np.asarray(cuts))
        edges = [cuts[0]]
        for a, b in zip(cuts[:-1], cuts[1:]):
            pieces = max(1, math.ceil((b - a) / max_log_width))
            edges.extend(np.linspace(a, b, pieces + 1)[1:])
        edges = np.asarray(edges)
        edges = edges[np.concatenate(([True], np.diff(edges) > 1e-14))]
        gx, gw = np.polynomial.legendre.leggauss(order)
        a, b = edges[:-1, None], edges[1:, None]
        s = 0.5 * (a + b) + 0.5 * (b - a) * gx
        w = 0.5 * (b - a) * gw
        nodes = np.exp(s.ravel())
        # keep the log-length exact
        weights = w.ravel() * ((hi - lo) / w.sum())
        return cls(t_min, t_max, nodes, weights, "composite-gauss",
                   {"order": order, "intervals": edges.size - 1})


def scale_integral(samples, q: ScaleQuadrature):
    """Apply the quadrature: ``sum_j w_j g(t_j)`` approximating ``int g(t) dt/t``."""
    s = np.asarray(samples)
    if s.shape[0] != q.M:
        raise ValueError(f"{s.shape[0]} samples for {q.M} quadrature nodes")
    if s.ndim == 1:
        return stable_sum(q.weights * s)
    return np.tensordot(q.weights, s, axes=(0, 0))


def lp_norm(f: SampledField2D, p: float) -> float:
    """Discrete ``L^p`` norm ``(sum |f|^p dx^2)^(1/p)``."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a = np.abs(f.values)
    return stable_sum(a**p * f.grid.spacing**2) ** (1.0 / p)


_MAGIC = b"EF2D"


def write_field(path, f: SampledField2D) -> None:
    """Write ``f`` in the EF2D layout (x fastest, little-endian)."""
    n = f.grid.N
    data = np.empty((n, n, 2), dtype="<f8")
    v = np.asarray(f.values, dtype=complex).T  # rows indexed by y
    data[..., 0] = v.real
    data[..., 1] = v.imag
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Id", n, float(f.grid.L)))
        fh.write(data.tobytes())


def read_field(path, real: bool | None = None, domain: str = "space") -> SampledField2D:
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise ValueError(f"{path}: not an EF2D file")
    n, L = struct.unpack("<Id", raw[4:16])
    data = np.frombuffer(raw[16:], dtype="<f8")
    if data.size != 2 * n * n:
        raise ValueError(f"{path}: expected {n * n} samples, found {data.size // 2}")
    data = data.reshape(n, n, 2)
    v = (data[..., 0] + 1j * data[..., 1]).T
    if real is None:
        real = bool(np.all(data[..., 1] == 0))
    return SampledField2D(Grid1D(L, n), v, real=real, domain=domain)
