"""Brute-force reference evaluators.

These follow the defining sums literally (explicit exponentials, explicit
kernels, full index contractions) and are meant for small grids only.  The
fast evaluators in :mod:`entangled.forms` are tested against them.
"""

from __future__ import annotations

import numpy as np

from .grid import Grid1D, SampledField2D
from .windows import Window1D

__all__ = [
    "brute_spectrum",
    "brute_single_scale",
    "brute_kernel_form",
    "brute_dyadic",
    "brute_triangular",
    "MAX_BRUTE_N",
]

MAX_BRUTE_N = 16


def _guard(grid: Grid1D, limit: int = MAX_BRUTE_N):
    if grid.N > limit:
        raise ValueError(f"brute-force oracle limited to N <= {limit}")


def brute_spectrum(grid: Grid1D, F1, F2, F3, F4) -> np.ndarray:
    """``B(xi, eta)`` as a direct quadruple sum for every dual bin."""
    _guard(grid)
    x = grid.positions()
    w = grid.frequencies()
    dx = grid.spacing
    F = np.einsum("ab,cb,cd,ad->acbd", F1, F2, F3, F4)  # [x, x', y, y']
    E = np.exp(-2j * np.pi * np.outer(w, x))  # [xi, x]
    out = np.zeros((grid.N, grid.N), dtype=complex)
    for i in range(grid.N):
        ex = E[i][:, None] * np.conj(E[i])[None, :]  # e^{-2 pi i (x - x') xi}
        for j in range(grid.N):
            ey = E[j][:, None] * np.conj(E[j])[None, :]
            out[i, j] = np.einsum("acbd,ac,bd->", F, ex, ey)
    return out * dx**4


def _window_samples(win: Window1D, grid: Grid1D, t: float) -> np.ndarray:
    return np.asarray(win.samples(grid, t))


def brute_single_scale(grid: Grid1D, fields, windows, t: float) -> complex:
    """The six-fold spatial sum over ``x, x', y, y', p, q``."""
    _guard(grid)
    F1, F2, F3, F4 = fields
    n = grid.N
    dx = grid.spacing
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :] + n // 2) % n  # p - x
    K = [_window_samples(w, grid, t)[idx] for w in windows]  # [p, x]
    total = np.einsum("ab,cb,cd,ad,pa,pc,qb,qd->", F1, F2, F3, F4, K[0], K[1], K[2], K[3], optimize=True)
    return complex(total) * dx**6


def brute_kernel_form(grid: Grid1D, fields, kernel: np.ndarray) -> complex:
    """``sum F1(x,y) F2(x',y) F3(x',y') F4(x,y') kappa(x'-x, y'-y) dx^4``."""
    _guard(grid)
    F1, F2, F3, F4 = fields
    n = grid.N
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None] + n // 2) % n  # [x, x'] -> x' - x
    Kx = kernel[idx[:, :, None, None], idx[None, None, :, :]]  # [x, x', y, y']
    total = np.einsum("ab,cb,cd,ad,acbd->", F1, F2, F3, F4, Kx)
    return complex(total) * grid.spacing**4


def brute_dyadic(grid: Grid1D, fields, depths=None) -> float:
    """Explicit dyadic kernel ``sum phi_I(x) phi_I(x') psi_J(y) psi_J(y')`` contracted with the entangled product."""
    _guard(grid)
    n = grid.N
    levels = int(np.log2(n))
    depths = range(levels) if depths is None else depths
    dx = grid.spacing
    K = np.zeros((n, n, n, n))
    for d in depths:
        width = n // 2**d
        length = width * dx
        for i0 in range(0, n, width):
            phi = np.zeros(n)
            phi[i0:i0 + width] = length**-0.5
            for j0 in range(0, n, width):
                psi = np.zeros(n)
                psi[j0:j0 + width // 2] = length**-0.5
                psi[j0 + width // 2:j0 + width] = -(length**-0.5)
                K += np.einsum("a,c,b,d->acbd", phi, phi, psi, psi)
    F1, F2, F3, F4 = fields
    return float(np.einsum("ab,cb,cd,ad,acbd->", F1, F2, F3, F4, K)) * dx**4


def brute_triangular(grid: Grid1D, F1, F2, F3) -> complex:
    """Triple sum for ``s(w)`` and an explicit DFT, returning the complex total."""
    _guard(grid, 32)
    n = grid.N
    x = grid.positions()
    w = grid.frequencies()
    dx = grid.spacing
    total = 0j
    for k, xi in enumerate(w):
        if k == 0 or xi == 0:
            continue
        acc = 0j
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    phase = np.exp(-2j * np.pi * (x[a] + x[b] + x[c]) * xi)
                    acc += F1[a, b] * F2[b, c] * F3[c, a] * phase
        total += np.sign(xi) * acc * dx**3
    return total / grid.L


def as_arrays(fields):
    return [f.values if isinstance(f, SampledField2D) else np.asarray(f) for f in fields]
