"""Acceptance suite: one check per criterion, runnable from tests or the CLI.

Every check returns a :class:`CriterionResult`.  ``full=False`` shrinks the
ensembles and iteration counts so that ``entangled selftest`` finishes in
under half a minute; ``full=True`` uses the sizes the criteria prescribe.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .bump import build_f, build_h, smoothness_probe
from .forms import (
    QuadInput,
    WindowQuad,
    dyadic_form,
    entangled_spectrum,
    haar_system,
    lambda_over_scales,
    pair_with_symbol,
    pairing_gradient,
    single_scale_form,
    spatial_single_scale,
)
from .grid import Grid1D, ScaleQuadrature
from .oracles import brute_dyadic, brute_single_scale
from .probe import (
    AscentConfig,
    EnsembleSpec,
    ascend,
    probe_norm,
    random_quadruple,
    ratio_gradient,
    ratio_objective,
)
from .symbols import (
    Symbol2D,
    build_psi_v,
    builtin_symbol,
    coefficients_mu_t,
    cone_partition,
    root_window,
    slice_mt,
)
from .telescope import (
    ProofReplay,
    certify_pair,
    derived_window,
    gaussian_window,
    telescoping_identity_check,
    uniformity_certificate,
)
from .windows import gaussian, gaussian_derivative

__all__ = ["CriterionResult", "CRITERIA", "run_criterion", "run_all"]


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"criterion {self.number:2d} {'PASS' if self.passed else 'FAIL'}: {self.title}"

    def to_dict(self) -> dict:
        return {"criterion": self.number, "title": self.title, "passed": self.passed,
                "details": self.details}


def _rand_quad(grid: Grid1D, seed: int) -> QuadInput:
    rng = np.random.default_rng(seed)
    return QuadInput.from_arrays(grid, *[rng.standard_normal((grid.N, grid.N)) for _ in range(4)])


def _mixed_windows() -> WindowQuad:
    return WindowQuad(gaussian(1.0), gaussian(0.7), gaussian_derivative(1.2), build_psi_v(0.5))


# -- 1 ---------------------------------------------------------------------------------

def hyperplane_plancherel(full: bool = True) -> dict:
    count = 20 if full else 3
    wq = _mixed_windows()
    cases = [(Grid1D(4.0, 8), (0.6, 1.0, 2.0), 1e-10), (Grid1D(8.0, 16), (1.0, 1.7, 3.0), 1e-8)]
    out = {"passed": True}
    for g, ts, tol in cases:
        worst = 0.0
        for seed in range(count):
            q = _rand_quad(g, seed)
            B = entangled_spectrum(q)
            for t in ts:
                spec = single_scale_form(B, wq, t)
                spat = spatial_single_scale(q, wq, t)
                brute = brute_single_scale(g, q.arrays, wq.windows, t)
                worst = max(worst, abs(spec - spat), abs(spec - brute), abs(spat - brute))
        out[f"N={g.N}"] = {"max_disagreement": worst, "tolerance": tol, "inputs": count, "scales": list(ts)}
        out["passed"] &= worst <= tol
    return out


# -- 2 ---------------------------------------------------------------------------------

def product_form_reduction(full: bool = True) -> dict:
    worst = 0.0
    for n, L in ((8, 4.0), (16, 8.0), (32, 16.0)):
        g = Grid1D(L, n)
        one = builtin_symbol("one", g)
        for seed in range(10 if full else 3):
            q = _rand_quad(g, 100 + seed)
            F1, F2, F3, F4 = q.arrays
            direct = float(np.sum(F1 * F2 * F3 * F4)) * g.spacing**2
            worst = max(worst, abs(pair_with_symbol(entangled_spectrum(q), one) - direct))
    return {"passed": worst <= 1e-10, "max_error": worst, "tolerance": 1e-10}


# -- 3 ---------------------------------------------------------------------------------

def telescoping_certificates(full: bool = True) -> dict:
    g = Grid1D(16.0, 32)
    gauss = []
    for a in (0.5, 1.0, 1.5, 3.0):
        p = certify_pair(gaussian_window(a), derived_window(a), g, method="closed", tol=1e-10, strict=False)
        gauss.append(p.residual)
    root = []
    for v in ((0.0, 1.0, -1.0, 5.0, -5.0) if full else (0.0, 1.0)):
        p = certify_pair(root_window(), build_psi_v(v), g, tol=1e-6, strict=False)
        root.append(p.residual)
    ok = max(gauss) <= 1e-10 and max(root) <= 1e-6
    return {"passed": ok, "gaussian_residual": float(max(gauss)), "root_pair_residual": float(max(root)),
            "tolerances": {"gaussian": 1e-10, "root_pair": 1e-6}}


# -- 4 ---------------------------------------------------------------------------------

def telescoping_identity(full: bool = True) -> dict:
    g = Grid1D(16.0, 32)
    pairs = (certify_pair(gaussian_window(1.0), derived_window(1.0), g),
             certify_pair(gaussian_window(1.5), derived_window(1.5), g))
    q256, q512 = ScaleQuadrature.for_grid(g, M=256), ScaleQuadrature.for_grid(g, M=512)
    rel, improved = [], []
    for seed in range(10 if full else 3):
        q = _rand_quad(g, 200 + seed)
        B = entangled_spectrum(q)
        a = telescoping_identity_check(q, *pairs, q256, B)
        b = telescoping_identity_check(q, *pairs, q512, B)
        rel.append(a["relative_gap"])
        improved.append(b["gap"] < a["gap"])
    return {"passed": max(rel) <= 3e-3 and all(improved), "max_relative_gap_M256": max(rel),
            "improves_under_doubling": all(improved), "tolerance": 3e-3}


# -- 5 ---------------------------------------------------------------------------------

def positivity(full: bool = True) -> dict:
    g = Grid1D(8.0, 16)
    quad = ScaleQuadrature.for_grid(g, M=64)
    rng = np.random.default_rng(5)
    low = math.inf
    count = 100 if full else 20
    for _ in range(count):
        F = rng.standard_normal((g.N, g.N)) * rng.uniform(0.1, 10.0)
        a, c = rng.uniform(0.5, 3.0, size=2)
        B = entangled_spectrum(QuadInput.from_arrays(g, F, F, F, F))
        val = lambda_over_scales(B, WindowQuad.pair(gaussian_window(a), derived_window(c)), quad).value
        low = min(low, complex(val).real)
    return {"passed": low >= -1e-10, "min_value": low, "inputs": count, "tolerance": -1e-10}


# -- 6 ---------------------------------------------------------------------------------

def proof_replay(full: bool = True) -> dict:
    g = Grid1D(16.0, 32)
    spec = EnsembleSpec(count=20, seed=6, grid=g, band=6)
    params = (0.0, 1.0, -1.0, 5.0, -5.0)
    uv = [(u, v) for u in params for v in params] if full else [(0.0, 0.0), (1.0, -5.0), (-5.0, 1.0)]
    nq = 20 if full else 2
    min_slack, finite, uniform = math.inf, True, True
    worst_ratio = 0.0
    factor = None
    for i in range(nq):
        rep = ProofReplay(random_quadruple(spec, i))
        cert = uniformity_certificate(rep)
        factor = cert["sup"]
        for u, v in uv:
            r = rep.run(u, v, strict=False, spatial=full and i < 2)
            m = r.meta
            min_slack = min(min_slack, m["min_slack"])
            finite &= math.isfinite(m["bound"]) and math.isfinite(m["constant"])
            ratio = m["normalised_constant"] / cert["uniform_constant"]
            worst_ratio = max(worst_ratio, ratio)
            uniform &= ratio <= 1.0 + 1e-12
    return {"passed": min_slack >= -1e-6 and finite and uniform, "min_slack": min_slack,
            "quadruples": nq, "uv_pairs": len(uv), "bounds_finite": finite,
            "max_constant_over_uniform": worst_ratio, "uniformity_factor": factor, "tolerance": -1e-6}


# -- 7 ---------------------------------------------------------------------------------

def bump_invariants(full: bool = True) -> dict:
    fam, hp = build_f(), build_h()
    e = fam.eps
    f2 = float(fam.f(np.array([2.0]))[0])
    x = np.linspace(-6.0, 6.0, 120001)
    fx = fam.f(x)
    support = float(np.max(np.abs(fx[(x <= 1.0) | (x >= 3.0)]), initial=0.0))
    d = np.linspace(0.0, 1.5, 30001)
    even = float(np.max(np.abs(fam.f(2.0 + d) - fam.f(2.0 - d))))
    plateau = float(np.max(np.abs(fam.f(np.linspace(1 + e, 3 - e, 20001)) - 1.0)))
    probes = {}
    for name, w, x0 in (("f_sqrt@1", fam.f_sqrt, 1.0), ("f_sqrt@3", fam.f_sqrt, 3.0),
                        ("h_sqrt@-3", hp.sqrt, -3.0), ("h_sqrt@3", hp.sqrt, 3.0)):
        rep = smoothness_probe(w, x0, max_order=3)
        probes[name] = {"bounded": bool(np.all(rep.bounded)), "slopes": rep.slopes.tolist()}
    control = smoothness_probe(lambda s: np.abs(s) ** 0.5, 0.0, max_order=3)
    exact = abs(f2 - 1.0) <= 1e-12 and support <= 1e-12 and even <= 1e-12 and plateau <= 1e-12
    ok = exact and all(p["bounded"] for p in probes.values()) and not control.bounded[0]
    return {"passed": ok, "f(2)": f2, "support_max": support, "evenness_defect": even,
            "plateau_defect": plateau, "probes": probes,
            "negative_control_diverges": bool(not control.bounded[0])}


# -- 8 ---------------------------------------------------------------------------------

def _cone_source(xi, eta):
    with np.errstate(divide="ignore", invalid="ignore"):
        return -1j * eta / (np.abs(xi) + np.abs(eta))


def coefficient_decay(full: bool = True) -> dict:
    ts = ScaleQuadrature.for_grid(Grid1D(8.0, 64), M=16).nodes
    if not full:
        ts = ts[::4]
    certs = {}
    for n in (64, 128):
        g = Grid1D(8.0, n)
        m = Symbol2D.from_function(g, _cone_source, "eta-ratio", True)
        _, piece = cone_partition(m)
        certs[n] = np.array([coefficients_mu_t(slice_mt(piece, t)).certificate for t in ts])
    change = np.abs(certs[128] / certs[64] - 1.0)
    ok = bool(np.all(np.isfinite(certs[64])) and np.all(np.isfinite(certs[128])) and change.max() <= 0.2)
    return {"passed": ok, "sup_N64": float(certs[64].max()), "sup_N128": float(certs[128].max()),
            "max_relative_change": float(change.max()), "scales": ts.tolist(), "tolerance": 0.2}


# -- 9 ---------------------------------------------------------------------------------

def gradient_correctness(full: bool = True) -> dict:
    g = Grid1D(8.0, 16)
    rng = np.random.default_rng(9)
    euler, fd = 0.0, 0.0
    for name in ("one", "riesz-ratio", "cone-eta"):
        m = builtin_symbol(name, g)
        q = _rand_quad(g, 300)
        lam = pair_with_symbol(entangled_spectrum(q), m)
        for j in range(1, 5):
            G = pairing_gradient(q, m, j)
            euler = max(euler, abs(float(np.sum(G.values * q.arrays[j - 1])) * g.spacing**2 - lam))
        R, grads = ratio_gradient(q, m)
        d = [rng.standard_normal((g.N, g.N)) for _ in range(4)]
        exact = sum(float(np.sum(a * b)) for a, b in zip(grads, d)) * g.spacing**2
        h = 1e-5
        plus = ratio_objective(QuadInput.from_arrays(g, *(F + h * e for F, e in zip(q.arrays, d))), m)
        minus = ratio_objective(QuadInput.from_arrays(g, *(F - h * e for F, e in zip(q.arrays, d))), m)
        fd = max(fd, abs((plus - minus) / (2 * h) - exact) / max(abs(exact), 1e-300))
    monotone = True
    cone = builtin_symbol("cone-eta", g)
    for i in range(5 if full else 2):
        est = ascend(random_quadruple(EnsembleSpec(grid=g, seed=9, band=4), i), cone, AscentConfig(max_iter=30))
        monotone &= bool(np.all(np.diff(est.trace) >= 0))
    ok = euler <= 1e-10 and fd <= 1e-4 and monotone
    return {"passed": ok, "euler_error": euler, "fd_relative_error": fd, "traces_monotone": monotone,
            "tolerances": {"euler": 1e-10, "finite_difference": 1e-4}}


# -- 10 --------------------------------------------------------------------------------

#: ascent budget per start in the full boundedness experiment
BOUNDEDNESS_ITERATIONS = 40


def empirical_boundedness(full: bool = True) -> dict:
    starts = 50 if full else 4
    cfg = AscentConfig(max_iter=BOUNDEDNESS_ITERATIONS if full else 15)
    best = {}
    for n in (32, 64):
        g = Grid1D(16.0, n)
        est = probe_norm(builtin_symbol("cone-eta", g), EnsembleSpec(count=starts, seed=0, grid=g, band=6), cfg)
        best[n] = est.best
    change = abs(best[64] / best[32] - 1.0)
    ok = math.isfinite(best[32]) and math.isfinite(best[64]) and change < 0.1
    return {"passed": ok, "max_ratio_N32": best[32], "max_ratio_N64": best[64], "relative_change": change,
            "starts": starts, "max_iter": cfg.max_iter, "tolerance": 0.1}


# -- 11 --------------------------------------------------------------------------------

def dyadic_model(full: bool = True) -> dict:
    g = Grid1D(4.0, 8)
    worst = 0.0
    for seed in range(10 if full else 3):
        q = _rand_quad(g, 400 + seed)
        worst = max(worst, abs(dyadic_form(q).value - brute_dyadic(g, q.arrays)))
    mean, norm = 0.0, 0.0
    for d in range(3):
        phi, psi = haar_system(g, d)
        mean = max(mean, float(np.max(np.abs(psi.sum(axis=1)))) * g.spacing)
        norm = max(norm, float(np.max(np.abs((psi**2).sum(axis=1) * g.spacing - 1))),
                   float(np.max(np.abs((phi**2).sum(axis=1) * g.spacing - 1))))
    ok = worst <= 1e-10 and mean <= 1e-15 and norm <= 1e-14
    return {"passed": ok, "max_error": worst, "haar_mean": mean, "normalisation_defect": norm,
            "tolerance": 1e-10}


CRITERIA: Dict[int, tuple] = {
    1: ("spectral, spatial and brute-force single-scale forms agree", hyperplane_plancherel),
    2: ("constant symbol gives the pointwise product form", product_form_reduction),
    3: ("dilation pairs certified", telescoping_certificates),
    4: ("telescoping identity holds and improves under M doubling", telescoping_identity),
    5: ("positivity of the Gaussian form on F,F,F,F", positivity),
    6: ("proof replay slacks and uniform bounds", proof_replay),
    7: ("bump invariants and square-root smoothness", bump_invariants),
    8: ("coefficient decay stable under refinement", coefficient_decay),
    9: ("pairing gradient and ascent monotonicity", gradient_correctness),
    10: ("empirical boundedness stable under refinement", empirical_boundedness),
    11: ("dyadic model against brute force; Haar system", dyadic_model),
}


def run_criterion(number: int, full: bool = True) -> CriterionResult:
    title, fn = CRITERIA[number]
    t0 = time.perf_counter()
    details = fn(full)
    passed = bool(details.pop("passed"))
    return CriterionResult(number, title, passed, details, time.perf_counter() - t0)


def run_all(full: bool = False, numbers: Optional[List[int]] = None,
            callback: Optional[Callable[[CriterionResult], None]] = None) -> List[CriterionResult]:
    out = []
    for n in numbers or sorted(CRITERIA):
        r = run_criterion(n, full)
        if callback is not None:
            callback(r)
        out.append(r)
    return out
