"""Empirical norm probing: random ensembles and gradient ascent on the ratio
``|Lambda_m(F1, F2, F3, F4)| / prod ||F_j||_4``.

Everything here produces lower bounds for the operator norm; nothing is
certified.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from .forms import QuadInput, entangled_spectrum, pair_with_symbol, pairing_gradient
from .grid import Grid1D, SampledField2D, inverse_ft_2d, lp_norm, reflect
from .symbols import Symbol2D

__all__ = [
    "KINDS",
    "EnsembleSpec",
    "AscentConfig",
    "NormEstimate",
    "random_field",
    "random_quadruple",
    "ensemble",
    "ratio_objective",
    "ratio_gradient",
    "ascend",
    "probe_norm",
]

KINDS = ("gaussian-random-trig", "rank-one", "checkerboard", "replay-adversarial")


@dataclass(frozen=True)
class EnsembleSpec:
    """Seeded description of a family of test quadruples.

    ``band`` is the largest frequency index ``|k|`` (in units of ``1/L``)
    present in generated fields.
    """

    kind: str = "gaussian-random-trig"
    count: int = 10
    seed: int = 0
    grid: Grid1D = field(default_factory=lambda: Grid1D(16.0, 32))
    band: int = 6

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}; choose from {KINDS}")
        if self.count < 1:
            raise ValueError("count must be positive")
        if not (1 <= self.band < self.grid.N // 2):
            raise ValueError(f"band must lie in [1, {self.grid.N // 2 - 1}]")

    def rng(self, *key) -> np.random.Generator:
        return np.random.default_rng([self.seed, *key])


def _normalise(grid: Grid1D, a: np.ndarray) -> SampledField2D:
    f = SampledField2D(grid, a, real=True)
    return SampledField2D(grid, a / lp_norm(f, 4), real=True)


def _band_limited(grid: Grid1D, rng, band: int) -> np.ndarray:
    # random Hermitian coefficients on |k|, |l| <= band
    n = grid.N
    c = n // 2
    coef = np.zeros((n, n), dtype=complex)
    k = np.arange(-band, band + 1)
    block = rng.standard_normal((k.size, k.size)) + 1j * rng.standard_normal((k.size, k.size))
    coef[c - band:c + band + 1, c - band:c + band + 1] = block
    # Hermitian symmetrisation makes the field real
    coef = 0.5 * (coef + np.conj(reflect(reflect(coef, 0), 1)))
    F = SampledField2D(grid, coef, real=False, domain="frequency")
    return inverse_ft_2d(F).values.real


def random_field(spec: EnsembleSpec, index: int = 0, slot: int = 0) -> SampledField2D:
    """One real field of the ensemble, with unit ``L^4`` norm.

    ``gaussian-random-trig`` multiplies a random trigonometric polynomial of
    degree ``band - band // 2`` by a Gaussian envelope truncated to degree
    ``band // 2``, so the spectrum stays inside ``|k|, |l| <= band``.
    ``rank-one`` is a product ``a(x) b(y)`` of band-limited profiles;
    ``checkerboard`` a random sign pattern on dyadic blocks.  The
    ``replay-adversarial`` kind generates like ``gaussian-random-trig``; the
    selection happens in :func:`ensemble`.
    """
    g = spec.grid
    rng = spec.rng(index, slot)
    kind = spec.kind
    if kind in ("gaussian-random-trig", "replay-adversarial"):
        env_band = max(1, spec.band // 2)
        content = _band_limited(g, rng, spec.band - env_band)
        # Gaussian envelope with a truncated spectrum
        n, c = g.N, g.N // 2
        coef = np.zeros((n, n), dtype=complex)
        k = np.arange(-env_band, env_band + 1)
        kk, ll = np.meshgrid(k, k, indexing="ij")
        coef[c - env_band:c + env_band + 1, c - env_band:c + env_band + 1] = np.exp(-(kk**2 + ll**2) / env_band)
        envelope = inverse_ft_2d(SampledField2D(g, coef, real=False, domain="frequency")).values.real
        return _normalise(g, content * envelope)
    if kind == "rank-one":
        a = _band_limited(g, rng, spec.band)
        return _normalise(g, np.outer(a[:, 0], a[0, :]))
    # checkerboard
    n = g.N
    size = 2 ** int(rng.integers(1, max(2, int(math.log2(n)) - 1)))
    signs = rng.choice([-1.0, 1.0], size=(n // size, n // size))
    return _normalise(g, np.kron(signs, np.ones((size, size))))


def random_quadruple(spec: EnsembleSpec, index: int = 0) -> QuadInput:
    return QuadInput(*(random_field(spec, index, j) for j in range(4)))


def ensemble(spec: EnsembleSpec, m: Optional[Symbol2D] = None) -> List[QuadInput]:
    """The quadruples of ``spec``.

    For ``replay-adversarial`` four times as many candidates are drawn and
    the ``count`` with the largest ``Lambda-tilde / replay bound`` (the
    tightest first step of the positivity argument) are kept.
    """
    if spec.kind != "replay-adversarial":
        return [random_quadruple(spec, i) for i in range(spec.count)]
    from .telescope import ProofReplay

    cands = [random_quadruple(spec, i) for i in range(4 * spec.count)]
    score = []
    for q in cands:
        rep = ProofReplay(q).run(0.0, 0.0, spatial=False)
        score.append(rep.meta["normalised_value"] / rep.meta["normalised_bound"])
    order = np.argsort(score)[::-1][: spec.count]
    return [cands[i] for i in sorted(order)]


# -- objective ---------------------------------------------------------------------

def _norms(q: QuadInput) -> np.ndarray:
    n = np.array([lp_norm(F, 4) for F in q.fields])
    if np.any(n == 0):
        raise ValueError("ratio undefined: an input field is identically zero")
    return n


def ratio_objective(q: QuadInput, m: Symbol2D) -> float:
    """``|Lambda_m(q)| / prod ||F_j||_4``."""
    n = _norms(q)
    return abs(pair_with_symbol(entangled_spectrum(q), m)) / float(np.prod(n))


def ratio_gradient(q: QuadInput, m: Symbol2D):
    """Ratio and its gradient (per slot, with respect to the ``dx^2`` inner product).

    For ``R = |Lambda| / prod n_j`` with ``n_j = ||F_j||_4``,
    ``dR/dF_j = sgn(Lambda) G_j / prod n - R F_j^3 / n_j^4`` where ``G_j``
    is the pairing gradient of slot ``j``.
    """
    n = _norms(q)
    G = [pairing_gradient(q, m, j).values for j in (1, 2, 3, 4)]
    F = q.arrays
    lam = float(np.sum(G[0] * F[0]) * q.grid.spacing**2)
    P = float(np.prod(n))
    R = abs(lam) / P
    s = math.copysign(1.0, lam)
    grads = [s * Gj / P - R * Fj**3 / nj**4 for Gj, Fj, nj in zip(G, F, n)]
    return R, grads


# -- ascent ----------------------------------------------------------------------------

@dataclass(frozen=True)
class AscentConfig:
    max_iter: int = 200
    rtol: float = 1e-8
    armijo: float = 1e-4
    step0: float = 1.0
    max_halvings: int = 40
    #: start each line search at twice the last accepted step (the first
    #: search starts at step0); without it every search starts at step0
    warm_start: bool = True


@dataclass
class NormEstimate:
    best: float
    argmax: Optional[int]
    trace: List[float]
    stats: dict = field(default_factory=dict)
    stalled: bool = False
    iterations: int = 0
    best_quad: Optional[QuadInput] = field(default=None, repr=False)
    traces: List[List[float]] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"best": self.best, "argmax": self.argmax, "trace": self.trace, "stats": self.stats,
                "stalled": self.stalled, "iterations": self.iterations}


def _renormalise(q: QuadInput) -> QuadInput:
    return QuadInput(*(_normalise(q.grid, F) for F in q.arrays))


def ascend(q0: QuadInput, m: Symbol2D, cfg: AscentConfig = AscentConfig()) -> NormEstimate:
    """Gradient ascent on the ratio with Armijo backtracking.

    Each accepted step renormalises every slot to unit ``L^4`` norm; the
    ratio is invariant under this, it only keeps the iterates well scaled.
    The trace is nondecreasing because only steps that pass the Armijo test
    are taken.
    """
    if not q0.real:
        raise ValueError("ascent works on real fields")
    q = _renormalise(q0)
    dx2 = q.grid.spacing**2
    R, grads = ratio_gradient(q, m)
    trace = [R]
    stalled = False
    it = 0
    step = cfg.step0
    evals = 0
    for it in range(1, cfg.max_iter + 1):
        gnorm2 = sum(float(np.sum(g * g)) for g in grads) * dx2
        if gnorm2 == 0:
            break
        step = 2 * step if (cfg.warm_start and it > 1) else cfg.step0
        for _ in range(cfg.max_halvings):
            evals += 1
            trial = QuadInput.from_arrays(q.grid, *(F + step * g for F, g in zip(q.arrays, grads)))
            try:
                Rt = ratio_objective(trial, m)
            except ValueError:
                Rt = -math.inf
            if Rt >= R + cfg.armijo * step * gnorm2:
                break
            step /= 2
        else:
            stalled = True
            break
        q = _renormalise(trial)
        R_old, (R, grads) = R, ratio_gradient(q, m)
        trace.append(R)
        if abs(R - R_old) <= cfg.rtol * abs(R_old):
            break
    return NormEstimate(max(trace), 0, trace, {"evaluations": evals}, stalled, it, q, [trace])


def probe_norm(m: Symbol2D, spec: EnsembleSpec, cfg: AscentConfig = AscentConfig(),
               quads: Optional[List[QuadInput]] = None) -> NormEstimate:
    """Ensemble statistics of the ratio plus the best ascended value."""
    quads = quads if quads is not None else ensemble(spec, m)
    start = np.array([ratio_objective(q, m) for q in quads])
    runs = [ascend(q, m, cfg) for q in quads]
    finals = np.array([r.best for r in runs])
    i = int(np.argmax(finals))
    stats = {
        "count": len(quads),
        "start": {"max": float(start.max()), "mean": float(start.mean()),
                  "quantiles": dict(zip(("q10", "q50", "q90"), map(float, np.quantile(start, [0.1, 0.5, 0.9]))))},
        "ascended": {"max": float(finals.max()), "mean": float(finals.mean()),
                     "quantiles": dict(zip(("q10", "q50", "q90"), map(float, np.quantile(finals, [0.1, 0.5, 0.9]))))},
        "spec": asdict(spec) if spec is not None else None,
        "config": asdict(cfg),
    }
    best = max(float(finals.max()), float(start.max()))
    return NormEstimate(best, i, runs[i].trace, stats, any(r.stalled for r in runs),
                        runs[i].iterations, runs[i].best_quad, [r.trace for r in runs])
