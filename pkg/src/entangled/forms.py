"""Evaluators for the entangled forms on the periodic grid.

Everything is expressed through the restricted spectrum

    B(xi, eta) = sum F1(x,y) F2(x',y) F3(x',y') F4(x,y')
                     exp(-2 pi i ((x - x') xi + (y - y') eta)) dx^4,

which does not depend on the symbol or the scale and is computed once per
quadruple.  A form with symbol ``m`` is then ``sum B m / L^2``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grid import (
    Grid1D,
    ResolutionWarning,
    SampledField2D,
    ScaleQuadrature,
    forward_ft_1d,
    inverse_ft_1d,
    reflect,
    scale_integral,
    stable_sum,
)
from .symbols import Symbol2D
from .windows import Window1D, mass

__all__ = [
    "QuadInput",
    "EntangledSpectrum",
    "WindowQuad",
    "FormReport",
    "entangled_spectrum",
    "pair_with_symbol",
    "product_form",
    "single_scale_form",
    "single_scale_batch",
    "spatial_single_scale",
    "lambda_over_scales",
    "lambda_tilde",
    "twisted_paraproduct",
    "dyadic_form",
    "haar_system",
    "triangular_form",
    "pairing_gradient",
    "circulant",
]

IMAG_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class QuadInput:
    """Four real fields on one grid."""

    F1: SampledField2D
    F2: SampledField2D
    F3: SampledField2D
    F4: SampledField2D

    def __post_init__(self):
        g = self.F1.grid
        for f in self.fields:
            if f.grid != g:
                raise ValueError("grid mismatch between the four fields")
            if f.domain != "space":
                raise ValueError("QuadInput fields must live in space")

    @property
    def fields(self):
        return (self.F1, self.F2, self.F3, self.F4)

    @property
    def grid(self) -> Grid1D:
        return self.F1.grid

    @property
    def arrays(self):
        return tuple(f.values for f in self.fields)

    @property
    def real(self) -> bool:
        return all(f.real for f in self.fields)

    @classmethod
    def from_arrays(cls, grid: Grid1D, *arrays, real: bool = True) -> "QuadInput":
        if len(arrays) != 4:
            raise ValueError("need four arrays")
        return cls(*(SampledField2D(grid, a, real=real) for a in arrays))

    def permuted(self, order: Sequence[int]) -> "QuadInput":
        """Reorder the slots, e.g. ``(2, 3, 0, 1)`` for the cyclic relabeling."""
        fs = self.fields
        return QuadInput(*(fs[i] for i in order))


@dataclass(frozen=True, eq=False)
class EntangledSpectrum:
    grid: Grid1D
    values: np.ndarray
    real_inputs: bool = True

    def hermitian_defect(self) -> float:
        """``max |B(-w) - conj B(w)|``; zero up to rounding for real inputs."""
        v = self.values
        return float(np.max(np.abs(reflect(reflect(v, 0), 1) - np.conj(v))))


@dataclass
class WindowQuad:
    """The four windows of a single-scale form."""

    phi1: Window1D
    phi2: Window1D
    phi3: Window1D
    phi4: Window1D

    def __post_init__(self):
        self.mean_zero = tuple(bool(w.mean_zero) for w in self.windows)

    @property
    def windows(self):
        return (self.phi1, self.phi2, self.phi3, self.phi4)

    @classmethod
    def pair(cls, a: Window1D, b: Window1D) -> "WindowQuad":
        """The ``(a, a, b, b)`` arrangement used throughout the telescoping argument."""
        return cls(a, a, b, b)

    def check_masses(self, grid: Grid1D, t: float = 1.0):
        masses = [mass(w, grid, t) for w in self.windows]
        if not all(np.isfinite(masses)):
            raise ValueError("window with infinite L1 mass")
        return masses

    def names(self):
        return [w.name for w in self.windows]


@dataclass
class FormReport:
    """Value of a form plus the data it was assembled from."""

    value: complex
    per_scale: Optional[np.ndarray] = None
    quadrature: Optional[ScaleQuadrature] = None
    evaluator: str = "spectral"
    ledger: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def num(z):
            z = complex(z)
            return z.real if z.imag == 0 else {"re": z.real, "im": z.imag}

        out = {"value": num(self.value), "evaluator": self.evaluator}
        if self.per_scale is not None:
            ps = np.asarray(self.per_scale)
            out["per_scale"] = {"re": ps.real.tolist(), "im": ps.imag.tolist()} if np.iscomplexobj(ps) else ps.tolist()
        if self.quadrature is not None:
            q = self.quadrature
            out["quadrature"] = {"kind": q.kind, "t_min": q.t_min, "t_max": q.t_max, "M": q.M,
                                 "nodes": q.nodes.tolist(), "weights": q.weights.tolist()}
        if self.ledger:
            out["ledger"] = self.ledger
        if self.meta:
            out["meta"] = self.meta
        return out


def _check_grid(a: Grid1D, b: Grid1D):
    if a != b:
        raise ValueError(f"grid mismatch: {a} vs {b}")


# -- the restricted spectrum ---------------------------------------------------

def entangled_spectrum(q: QuadInput) -> EntangledSpectrum:
    """``B(xi, eta)`` in ``O(N^3 log N)``.

    For every pair of rows ``(y, y')`` the products ``F1 F4`` and ``F2 F3``
    are transformed in ``x`` (the second at ``-xi``); their product is then
    transformed in ``y`` and contracted against ``exp(+2 pi i y' eta)``.
    """
    g = q.grid
    F1, F2, F3, F4 = q.arrays
    # P[xi, y, y'] = dx sum_x F1(x,y) F4(x,y') e^{-2 pi i x xi}
    P = forward_ft_1d(F1[:, :, None] * F4[:, None, :], g, axis=0)
    Q = reflect(forward_ft_1d(F2[:, :, None] * F3[:, None, :], g, axis=0), axis=0)
    # S[xi, eta, y'] = dx sum_y P Q e^{-2 pi i y eta}
    S = forward_ft_1d(P * Q, g, axis=1)
    E = np.exp(2j * np.pi * np.outer(g.frequencies(), g.positions()))
    B = g.spacing * np.einsum("kly,ly->kl", S, E)
    return EntangledSpectrum(g, B, q.real)


def pair_with_symbol(B: EntangledSpectrum, m: Symbol2D, return_imag: bool = False):
    """``Re sum_{xi, eta} B m / L^2``.

    Raises
    ------
    ValueError
        On grid mismatch, or if the imaginary part exceeds ``1e-6`` of the
        absolute sum (the symbol is not Hermitian for these inputs).
    """
    _check_grid(B.grid, m.grid)
    terms = B.values * m.values
    total = complex(stable_sum(terms.real.ravel()), stable_sum(terms.imag.ravel())) * B.grid.dual_spacing**2
    scale = float(np.abs(terms).sum()) * B.grid.dual_spacing**2
    if abs(total.imag) > IMAG_TOL * max(scale, 1e-300) and abs(total.imag) > 1e-300:
        raise ValueError(f"pairing has imaginary residue {total.imag:.3e} (scale {scale:.3e}); "
                         "symbol and inputs are not a real-valued pair")
    return (total.real, total.imag) if return_imag else total.real


def product_form(q: QuadInput) -> float:
    """``sum F1 F2 F3 F4 dx^2``."""
    F1, F2, F3, F4 = q.arrays
    return float(np.real(stable_sum((F1 * F2 * F3 * F4).ravel()))) * q.grid.spacing**2


# -- single scale --------------------------------------------------------------

def _resolution_check(grid: Grid1D, t):
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr <= 0):
        raise ValueError("scale t must be positive")
    if np.any(t_arr < grid.spacing) or np.any(t_arr > 2 * grid.L):
        warnings.warn(f"scale outside the resolvable range [{grid.spacing:g}, {2 * grid.L:g}]",
                      ResolutionWarning, stacklevel=3)


def _window_factors(wq: WindowQuad, grid: Grid1D, t):
    a = wq.phi1.spectrum(grid, t) * wq.phi2.spectrum_reflected(grid, t)
    b = wq.phi3.spectrum(grid, t) * wq.phi4.spectrum_reflected(grid, t)
    return a, b


def single_scale_batch(B: EntangledSpectrum, wq: WindowQuad, ts) -> np.ndarray:
    """``L^t`` for every ``t`` in ``ts`` (complex array)."""
    ts = np.asarray(ts, dtype=float)
    _resolution_check(B.grid, ts)
    a, b = _window_factors(wq, B.grid, ts)
    return np.einsum("tk,kl,tl->t", a, B.values, b) * B.grid.dual_spacing**2


def single_scale_form(B: EntangledSpectrum, wq: WindowQuad, t: float) -> complex:
    """``L^t = sum B(xi, eta) w1(t xi) w2(-t xi) w3(t eta) w4(-t eta) / L^2``."""
    return complex(single_scale_batch(B, wq, np.array([float(t)]))[0])


def circulant(samples: np.ndarray) -> np.ndarray:
    """``C[i, j] = w(x_i - x_j)`` for samples in centered order."""
    n = samples.shape[-1]
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :] + n // 2) % n
    return samples[..., idx]


def spatial_single_scale(q: QuadInput, wq: WindowQuad, t: float, return_parts: bool = False):
    """``L^t`` from the spatial brackets.

    ``V(q; x, x') = sum_y F1(x,y) F2(x',y) w3_t(q - y) dy``,
    ``W(q; x, x') = sum_y' F3(x',y') F4(x,y') w4_t(q - y') dy``,
    ``K(x, x') = sum_p w1_t(p - x) w2_t(p - x') dp`` and the value is
    ``sum V W K dx^3``.
    """
    g = q.grid
    _resolution_check(g, t)
    F1, F2, F3, F4 = q.arrays
    dx = g.spacing
    w = [win.samples(g, t) for win in wq.windows]
    C3, C4 = circulant(w[2]), circulant(w[3])
    V = np.einsum("qy,xy,zy->qxz", C3, F1, F2) * dx
    W = np.einsum("qy,zy,xy->qxz", C4, F3, F4) * dx
    C1, C2 = circulant(w[0]), circulant(w[1])
    K = np.einsum("px,pz->xz", C1, C2) * dx
    val = complex(np.einsum("qxz,qxz,xz->", V, W, K) * dx**3)
    if return_parts:
        return val, {"V": V, "W": W, "K": K}
    return val


# -- integrals over scales -------------------------------------------------------

def lambda_over_scales(B: EntangledSpectrum, wq: WindowQuad, quad: ScaleQuadrature) -> FormReport:
    """``sum_j w_j L^{t_j}``, keeping the per-scale values."""
    per = single_scale_batch(B, wq, quad.nodes)
    val = complex(scale_integral(per.real, quad), scale_integral(per.imag, quad))
    return FormReport(val, per, quad, "spectral", meta={"windows": wq.names(), "form": "lambda"})


def lambda_tilde(B: EntangledSpectrum, wq: WindowQuad, quad: ScaleQuadrature) -> FormReport:
    """``sum_j w_j |L^{t_j}|``."""
    per = single_scale_batch(B, wq, quad.nodes)
    val = scale_integral(np.abs(per), quad)
    return FormReport(val, per, quad, "spectral", meta={"windows": wq.names(), "form": "lambda-tilde"})


def twisted_paraproduct(F1: SampledField2D, F2: SampledField2D, F3: SampledField2D, m: Symbol2D) -> float:
    """``Lambda(F1, F2, F3, 1)`` with the constant field on the torus."""
    one = SampledField2D(F1.grid, np.ones((F1.grid.N, F1.grid.N)), real=True)
    B = entangled_spectrum(QuadInput(F1, F2, F3, one))
    return pair_with_symbol(B, m)


# -- dyadic model ------------------------------------------------------------------

def haar_system(grid: Grid1D, depth: int):
    """Scaling and Haar functions of the intervals of length ``L / 2^depth``.

    Returns two ``(2^depth, N)`` arrays; intervals are blocks of consecutive
    grid cells starting at the first cell.
    """
    n = grid.N
    levels = int(math.log2(n))
    if not 0 <= depth < levels:
        raise ValueError(f"depth must be in [0, {levels - 1}] for N = {n}")
    count = 2**depth
    width = n // count
    length = width * grid.spacing
    phi = np.zeros((count, n))
    psi = np.zeros((count, n))
    for k in range(count):
        sl = slice(k * width, (k + 1) * width)
        phi[k, sl] = length**-0.5
        psi[k, k * width: k * width + width // 2] = length**-0.5
        psi[k, k * width + width // 2: (k + 1) * width] = -(length**-0.5)
    return phi, psi


def _block_sums(a: np.ndarray, width: int, axis: int) -> np.ndarray:
    a = np.moveaxis(a, axis, 0)
    out = a.reshape(a.shape[0] // width, width, *a.shape[1:]).sum(axis=1)
    return np.moveaxis(out, 0, axis)


def dyadic_form(q: QuadInput, depth_range: Optional[tuple] = None) -> FormReport:
    """Entangled form with the perfect dyadic kernel.

    ``sum_{|I| = |J|} sum phi_I(x) phi_I(x') psi_J(y) psi_J(y') F1(x,y) F2(x',y) F3(x',y') F4(x,y')``.
    For each interval ``I`` the ``x`` sums give ``C14_I(y, y')`` and
    ``C23_I(y, y')``; the ``J`` sums are Haar coefficients of their product on
    the diagonal blocks.  ``depth_range`` is an inclusive pair of depths
    (interval length ``L / 2^depth``); the default is every depth the grid
    can represent.
    """
    g = q.grid
    levels = int(math.log2(g.N))
    lo, hi = (0, levels - 1) if depth_range is None else depth_range
    if not (0 <= lo <= hi <= levels - 1):
        raise ValueError(f"depth range {depth_range} outside [0, {levels - 1}]")
    F1, F2, F3, F4 = q.arrays
    dx = g.spacing
    P14 = F1[:, :, None] * F4[:, None, :]
    P23 = F2[:, :, None] * F3[:, None, :]
    per_depth = []
    for d in range(lo, hi + 1):
        width = g.N // 2**d
        length = width * dx
        C14 = _block_sums(P14, width, 0) * dx * length**-0.5
        C23 = _block_sums(P23, width, 0) * dx * length**-0.5
        D = C14 * C23  # [I, y, y']
        half = width // 2
        S = _block_sums(_block_sums(D, half, 1), half, 2)  # [I, 2J+s, 2J'+s']
        nJ = 2**d
        S = S.reshape(nJ, nJ, 2, nJ, 2)
        diag = S[:, np.arange(nJ), :, np.arange(nJ), :]  # [J, I, s, s']
        coeff = diag[..., 0, 0] - diag[..., 0, 1] - diag[..., 1, 0] + diag[..., 1, 1]
        per_depth.append(float(coeff.sum()) * dx**2 / length)
    value = stable_sum(per_depth)
    return FormReport(value, np.asarray(per_depth), None, "dyadic",
                      meta={"depths": list(range(lo, hi + 1))})


# -- triangular form -------------------------------------------------------------

def triangular_form(F1: SampledField2D, F2: SampledField2D, F3: SampledField2D, return_complex: bool = False):
    """``sum_xi s_hat(xi) sgn(xi) / L`` with ``s(w) = sum_{x+y+z = w} F1(x,y) F2(y,z) F3(z,x)``.

    For real inputs the sum is purely imaginary, ``i T``; ``T`` is returned.
    ``sgn`` vanishes at zero and at the self-conjugate Nyquist bin.
    """
    g = F1.grid
    _check_grid(g, F2.grid)
    _check_grid(g, F3.grid)
    a, b, c = F1.values, F2.values, F3.values
    n = g.N
    T = a[:, :, None] * b[None, :, :] * np.transpose(c)[:, None, :]  # [x, y, z]
    idx = (np.arange(n)[:, None, None] + np.arange(n)[None, :, None] + np.arange(n)[None, None, :]) % n
    s = np.zeros(n, dtype=T.dtype)
    np.add.at(s, idx.ravel(), T.ravel())
    s = s * g.spacing**2
    shat = forward_ft_1d(s, g)
    sgn = np.sign(g.frequencies())
    sgn[0] = 0.0
    total = complex(np.sum(shat * sgn)) / g.L
    return total if return_complex else total.imag


# -- gradient ------------------------------------------------------------------------

def _grad_first_slot(F2, F3, F4, m: np.ndarray, grid: Grid1D) -> np.ndarray:
    dx = grid.spacing
    L = grid.L
    Q = reflect(forward_ft_1d(F2[:, :, None] * F3[:, None, :], grid, axis=0), axis=0)  # [xi, y, y']
    # Mt[xi, d] = sum_eta m(xi, eta) e^{-2 pi i d eta},  d = y - y' on the grid
    n = grid.N
    w = grid.frequencies()
    offs = (np.arange(2 * n - 1) - (n - 1)) * dx
    Mt = m @ np.exp(-2j * np.pi * np.outer(w, offs))  # [xi, offset]
    H = Mt[:, (np.arange(n)[:, None] - np.arange(n)[None, :]) + n - 1] * Q  # [xi, y, y']
    # U[x, y, y'] = sum_xi e^{-2 pi i x xi} H   (positions x)
    # U[x, y, y'] = sum_xi e^{-2 pi i x xi} H = L * (inverse transform of H(-xi))
    U = L * inverse_ft_1d(reflect(H, 0), grid, axis=0)
    G = np.einsum("xb,xab->xa", F4, U) * dx**3 / L**2
    return G / dx**2


def pairing_gradient(q: QuadInput, m: Symbol2D, j: int) -> SampledField2D:
    """``G_j`` with ``sum G_j F_j dx^2 = Lambda_m(F1, F2, F3, F4)``.

    Slots 2, 3, 4 reduce to slot 1 by relabeling ``x <-> x'`` and/or
    ``y <-> y'``, which reflects the symbol in ``xi`` and/or ``eta``.
    """
    _check_grid(q.grid, m.grid)
    if j not in (1, 2, 3, 4):
        raise ValueError("slot index must be 1..4")
    F1, F2, F3, F4 = q.arrays
    mv = m.values
    if j == 1:
        args, sym = (F2, F3, F4), mv
    elif j == 2:
        args, sym = (F1, F4, F3), reflect(mv, 0)
    elif j == 3:
        args, sym = (F4, F1, F2), reflect(reflect(mv, 0), 1)
    else:
        args, sym = (F3, F2, F1), reflect(mv, 1)
    G = _grad_first_slot(*args, sym, q.grid)
    real = q.real and bool(np.max(np.abs(G.imag), initial=0.0) <= 1e-9 * max(1.0, np.abs(G).max()))
    return SampledField2D(q.grid, G.real if real else G, real=real)
