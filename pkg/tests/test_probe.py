import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entangled.forms import QuadInput, pair_with_symbol
from entangled.grid import Grid1D, forward_ft_2d, lp_norm
from entangled.oracles import brute_kernel_form
from entangled.probe import (
    AscentConfig,
    EnsembleSpec,
    ascend,
    ensemble,
    probe_norm,
    random_field,
    random_quadruple,
    ratio_gradient,
    ratio_objective,
)
from entangled.symbols import builtin_symbol

G16 = Grid1D(8.0, 16)


@pytest.mark.parametrize("kind", ["gaussian-random-trig", "rank-one", "checkerboard"])
def test_random_field_deterministic_and_normalised(kind):
    spec = EnsembleSpec(kind=kind, seed=5, grid=G16, band=4)
    a, b = random_field(spec, 2, 1), random_field(spec, 2, 1)
    np.testing.assert_array_equal(a.values, b.values)
    assert lp_norm(a, 4) == pytest.approx(1.0, abs=1e-12)
    assert not np.array_equal(a.values, random_field(spec, 3, 1).values)


@pytest.mark.parametrize("kind", ["gaussian-random-trig", "rank-one"])
def test_random_field_band(kind):
    spec = EnsembleSpec(kind=kind, seed=1, grid=Grid1D(16.0, 32), band=5)
    F = forward_ft_2d(random_field(spec)).values
    k = np.arange(32) - 16
    outside = (np.abs(k)[:, None] > 5) | (np.abs(k)[None, :] > 5)
    assert np.abs(F[outside]).max() < 1e-13 * np.abs(F).max()


def test_spec_validation():
    with pytest.raises(ValueError):
        EnsembleSpec(kind="bogus")
    with pytest.raises(ValueError):
        EnsembleSpec(grid=G16, band=8)


def test_holder_equality_case():
    X, Y = G16.mesh()
    F = np.exp(-(X**2 + Y**2))
    q = QuadInput.from_arrays(G16, F, F, F, F)
    m = builtin_symbol("one", G16)
    assert ratio_objective(q, m) == pytest.approx(1.0, abs=1e-12)
    est = ascend(q, m, AscentConfig(max_iter=5))
    assert est.best == pytest.approx(1.0, abs=1e-12)
    assert max(est.trace) - min(est.trace) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000), st.floats(-5, 5).filter(lambda s: abs(s) > 1e-3), st.integers(0, 3))
def test_ratio_homogeneous(seed, lam, slot):
    m = builtin_symbol("cone-eta", G16)
    q = random_quadruple(EnsembleSpec(seed=seed, grid=G16, band=4))
    arrs = list(q.arrays)
    arrs[slot] = lam * arrs[slot]
    assert ratio_objective(QuadInput.from_arrays(G16, *arrs), m) == pytest.approx(ratio_objective(q, m), rel=1e-10)


def test_cone_ratio_matches_oracle():
    m = builtin_symbol("cone-eta", G16)
    q = random_quadruple(EnsembleSpec(seed=3, grid=G16, band=4))
    from entangled.symbols import symbol_to_kernel
    val = brute_kernel_form(G16, q.arrays, symbol_to_kernel(m).values)
    norms = np.prod([lp_norm(F, 4) for F in q.fields])
    assert ratio_objective(q, m) == pytest.approx(abs(val) / norms, rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000))
def test_modulation_move_invariance(seed):
    rng = np.random.default_rng(seed)
    m = builtin_symbol("cone-eta", G16)
    q = random_quadruple(EnsembleSpec(seed=seed, grid=G16, band=4))
    gy = rng.choice([-1.0, 1.0], size=16)[None, :]
    F1, F2, F3, F4 = q.arrays
    a = ratio_objective(QuadInput.from_arrays(G16, F1 * gy, F2, F3, F4), m)
    b = ratio_objective(QuadInput.from_arrays(G16, F1, F2 * gy, F3, F4), m)
    assert a == pytest.approx(b, rel=1e-10, abs=1e-14)


def test_ratio_gradient_finite_difference():
    m = builtin_symbol("cone-eta", G16)
    q = random_quadruple(EnsembleSpec(seed=9, grid=G16, band=4))
    R, grads = ratio_gradient(q, m)
    assert R == pytest.approx(ratio_objective(q, m), rel=1e-12)
    rng = np.random.default_rng(0)
    d = [rng.standard_normal((16, 16)) for _ in range(4)]
    dx2 = G16.spacing**2
    analytic = sum(float(np.sum(g * e)) for g, e in zip(grads, d)) * dx2
    errs = []
    for h in (1e-3, 1e-4, 1e-5):
        plus = QuadInput.from_arrays(G16, *(F + h * e for F, e in zip(q.arrays, d)))
        minus = QuadInput.from_arrays(G16, *(F - h * e for F, e in zip(q.arrays, d)))
        fd = (ratio_objective(plus, m) - ratio_objective(minus, m)) / (2 * h)
        errs.append(abs(fd - analytic) / abs(analytic))
    assert min(errs) <= 1e-4


def test_ascent_monotone_and_improves():
    m = builtin_symbol("cone-eta", G16)
    q = random_quadruple(EnsembleSpec(seed=2, grid=G16, band=4))
    est = ascend(q, m, AscentConfig(max_iter=40))
    assert np.all(np.diff(est.trace) >= 0)
    assert est.best > est.trace[0]
    assert lp_norm(est.best_quad.fields[0], 4) == pytest.approx(1.0, abs=1e-12)


def test_probe_norm_statistics_reproducible():
    m = builtin_symbol("cone-eta", G16)
    spec = EnsembleSpec(count=3, seed=4, grid=G16, band=4)
    a = probe_norm(m, spec, AscentConfig(max_iter=10))
    b = probe_norm(m, spec, AscentConfig(max_iter=10))
    assert a.to_dict() == b.to_dict()
    assert a.best >= a.stats["start"]["max"] and a.best >= a.stats["ascended"]["max"]
    assert all(np.all(np.diff(t) >= 0) for t in a.traces)


def test_ensemble_lengths():
    spec = EnsembleSpec(kind="checkerboard", count=4, seed=0, grid=G16, band=3)
    assert len(ensemble(spec)) == 4
