import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entangled.forms import (
    QuadInput,
    WindowQuad,
    dyadic_form,
    entangled_spectrum,
    haar_system,
    lambda_over_scales,
    lambda_tilde,
    pair_with_symbol,
    pairing_gradient,
    product_form,
    single_scale_batch,
    single_scale_form,
    spatial_single_scale,
    triangular_form,
    twisted_paraproduct,
)
from entangled.grid import Grid1D, ResolutionWarning, SampledField2D, ScaleQuadrature, forward_ft_1d
from entangled.oracles import brute_dyadic, brute_single_scale, brute_spectrum, brute_triangular
from entangled.symbols import Symbol2D, build_phi_u, build_psi_v, builtin_symbol
from entangled.windows import AbsWindow, gaussian, gaussian_derivative


def rand_quad(grid, seed):
    rng = np.random.default_rng(seed)
    return QuadInput.from_arrays(grid, *[rng.standard_normal((grid.N, grid.N)) for _ in range(4)])


G8 = Grid1D(4.0, 8)
G16 = Grid1D(8.0, 16)


# -- spectrum ----------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(3))
def test_spectrum_matches_quadruple_sum(seed):
    q = rand_quad(G8, seed)
    B = entangled_spectrum(q)
    np.testing.assert_allclose(B.values, brute_spectrum(G8, *q.arrays), atol=1e-10)


def test_spectrum_hermitian_for_real_inputs():
    B = entangled_spectrum(rand_quad(G16, 4))
    assert B.hermitian_defect() <= 1e-10


def test_spectrum_of_rank_one_inputs():
    g = G16
    rng = np.random.default_rng(5)
    a = rng.standard_normal((4, g.N))
    b = rng.standard_normal((4, g.N))
    q = QuadInput.from_arrays(g, *[np.outer(a[k], b[k]) for k in range(4)])
    B = entangled_spectrum(q).values

    def ft(v):
        return forward_ft_1d(v, g)

    def neg(v):
        return ft(v)[(g.N - np.arange(g.N)) % g.N]

    expect = np.outer(ft(a[0] * a[3]) * neg(a[1] * a[2]), ft(b[0] * b[1]) * neg(b[2] * b[3]))
    np.testing.assert_allclose(B, expect, atol=1e-12)


def test_spectrum_of_single_cell_indicator():
    e = np.zeros((8, 8))
    e[3, 5] = 2.0
    q = QuadInput.from_arrays(G8, e, e, e, e)
    B = entangled_spectrum(q).values
    # one cell: every phase cancels, B is the constant dx^4 * 2^4
    np.testing.assert_allclose(B, G8.spacing**4 * 16 * np.ones((8, 8)), atol=1e-13)
    np.testing.assert_allclose(B, brute_spectrum(G8, e, e, e, e), atol=1e-13)


def test_grid_mismatch():
    f = SampledField2D(G8, np.ones((8, 8)), real=True)
    h = SampledField2D(Grid1D(5.0, 8), np.ones((8, 8)), real=True)
    with pytest.raises(ValueError):
        QuadInput(f, f, f, h)
    B = entangled_spectrum(QuadInput(f, f, f, f))
    with pytest.raises(ValueError):
        pair_with_symbol(B, builtin_symbol("one", G16))


# -- pairing -------------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(3))
def test_identity_symbol_gives_product_form(seed):
    q = rand_quad(G16, seed)
    val = pair_with_symbol(entangled_spectrum(q), builtin_symbol("one", G16))
    assert val == pytest.approx(product_form(q), abs=1e-10)


def test_zero_symbol():
    B = entangled_spectrum(rand_quad(G16, 1))
    assert pair_with_symbol(B, Symbol2D(G16, np.zeros((16, 16)))) == 0.0


def test_gaussian_product_symbol_with_rank_one_gaussians():
    g = Grid1D(16.0, 64)
    x = g.positions()
    gs = [np.exp(-((x - c) / w) ** 2) for c, w in ((0.3, 2.0), (-0.5, 1.5), (1.0, 2.5), (0.0, 1.0))]
    hs = [np.exp(-((x + c) / w) ** 2) for c, w in ((0.1, 1.2), (0.4, 2.0), (-0.7, 1.0), (0.0, 3.0))]
    q = QuadInput.from_arrays(g, *[np.outer(gs[k], hs[k]) for k in range(4)])
    G = gaussian(1.0)
    xi, eta = g.dual_mesh()
    m = Symbol2D(g, (G.ft(xi) * G.ft(eta)).astype(complex))
    val = pair_with_symbol(entangled_spectrum(q), m)

    # 1D pairings with the periodised kernel: sum u(x) v(x') g1(x' - x) dx^2
    d = x[None, :] - x[:, None]
    ker = sum(G.space(d + k * g.L) for k in range(-3, 4))

    def pair1d(u, v):
        return float(u @ ker @ v) * g.spacing**2

    expect = pair1d(gs[0] * gs[3], gs[1] * gs[2]) * pair1d(hs[0] * hs[1], hs[3] * hs[2])
    assert val == pytest.approx(expect, rel=1e-10)


def test_non_hermitian_pair_rejected():
    B = entangled_spectrum(rand_quad(G16, 2))
    with pytest.raises(ValueError, match="imaginary residue"):
        pair_with_symbol(B, Symbol2D(G16, 1j * np.ones((16, 16))))


# -- single scale ----------------------------------------------------------------------

def mixed_windows():
    return WindowQuad(gaussian(1.0), gaussian(0.7), gaussian_derivative(1.2), build_psi_v(0.5))


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("t", [0.6, 1.0, 2.0])
def test_single_scale_against_sextuple_sum(seed, t):
    q = rand_quad(G8, seed)
    wq = mixed_windows()
    val = single_scale_form(entangled_spectrum(q), wq, t)
    assert abs(val - brute_single_scale(G8, q.arrays, wq.windows, t)) <= 1e-10


@pytest.mark.parametrize("seed", range(3))
def test_spatial_matches_spectral_n16(seed):
    q = rand_quad(G16, seed)
    wq = WindowQuad(build_phi_u(1.0), build_phi_u(-1.0), build_psi_v(1.0), build_psi_v(-1.0))
    B = entangled_spectrum(q)
    for t in (1.0, 1.7, 3.0):
        assert abs(single_scale_form(B, wq, t) - spatial_single_scale(q, wq, t)) <= 1e-8


def test_small_scale_limit_is_product_form():
    # smooth periodic fields; the gap closes like (t / L)^2 as t = 4 dx shrinks
    gaps = []
    for n in (64, 128):
        g = Grid1D(16.0, n)
        x, y = g.mesh()
        F = 2 + np.cos(2 * np.pi * x / g.L) + 0.5 * np.sin(2 * np.pi * y / g.L)
        q = QuadInput.from_arrays(g, F, F, F, F)
        val = single_scale_form(entangled_spectrum(q), WindowQuad(*[gaussian(1.0)] * 4), 4 * g.spacing)
        gaps.append(abs(val.real / product_form(q) - 1))
    assert gaps[1] < 0.02
    assert gaps[1] < 0.3 * gaps[0]


def test_mean_zero_window_kills_y_constant_fields():
    g = G16
    rng = np.random.default_rng(3)
    arrs = [np.repeat(rng.standard_normal((g.N, 1)), g.N, axis=1) for _ in range(4)]
    q = QuadInput.from_arrays(g, *arrs)
    wq = WindowQuad(gaussian(1.0), gaussian(1.0), gaussian_derivative(1.0), gaussian(1.0))
    B = entangled_spectrum(q)
    assert abs(single_scale_form(B, wq, 1.5)) < 1e-14
    quad = ScaleQuadrature.log_midpoint(1.0, 8.0, 32)
    assert abs(lambda_over_scales(B, wq, quad).value) < 1e-13
    assert lambda_tilde(B, wq, quad).value < 1e-13


def test_relabeling_swaps_window_roles():
    q = rand_quad(G16, 6)
    wq = WindowQuad(gaussian(1.0), gaussian(0.8), gaussian_derivative(1.0), build_psi_v(0.3))
    swapped_q = q.permuted((3, 2, 1, 0))
    swapped_w = WindowQuad(wq.phi1, wq.phi2, wq.phi4, wq.phi3)
    a = spatial_single_scale(swapped_q, wq, 1.3)
    b = spatial_single_scale(q, swapped_w, 1.3)
    assert abs(a - b) < 1e-12
    sym = WindowQuad(gaussian(1.0), gaussian(0.8), gaussian_derivative(1.0), gaussian_derivative(1.0))
    assert abs(spatial_single_scale(swapped_q, sym, 1.3) - spatial_single_scale(q, sym, 1.3)) < 1e-12


def test_zero_field_gives_zero():
    q = rand_quad(G16, 7)
    z = QuadInput(q.F1, q.F2, q.F3.with_values(np.zeros((16, 16))), q.F4)
    assert spatial_single_scale(z, mixed_windows(), 1.0) == 0
    assert single_scale_form(entangled_spectrum(z), mixed_windows(), 1.0) == 0


def test_resolution_warning_and_errors():
    B = entangled_spectrum(rand_quad(G16, 0))
    with pytest.warns(ResolutionWarning):
        single_scale_form(B, mixed_windows(), 0.1)
    with pytest.raises(ValueError):
        single_scale_form(B, mixed_windows(), -1.0)


# -- over scales ------------------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_lambda_tilde_dominates(seed):
    q = rand_quad(G16, seed)
    B = entangled_spectrum(q)
    wq = WindowQuad(build_phi_u(2.0), build_phi_u(-2.0), build_psi_v(1.0), build_psi_v(-1.0))
    quad = ScaleQuadrature.log_midpoint(1.0, 8.0, 64)
    lam = lambda_over_scales(B, wq, quad)
    tl = lambda_tilde(B, wq, quad)
    assert tl.value >= abs(lam.value) - 1e-14
    assert lam.value == pytest.approx(complex(np.sum(quad.weights * lam.per_scale)), abs=1e-12)
    assert tl.value == pytest.approx(float(np.sum(quad.weights * np.abs(tl.per_scale))), abs=1e-12)


def test_batch_matches_single():
    B = entangled_spectrum(rand_quad(G16, 8))
    ts = np.array([1.0, 2.0, 4.0])
    batch = single_scale_batch(B, mixed_windows(), ts)
    for t, v in zip(ts, batch):
        assert v == pytest.approx(single_scale_form(B, mixed_windows(), t), abs=1e-15)


def test_report_serialises():
    import json

    B = entangled_spectrum(rand_quad(G16, 9))
    rep = lambda_over_scales(B, mixed_windows(), ScaleQuadrature.log_midpoint(1.0, 4.0, 8))
    d = json.loads(json.dumps(rep.to_dict()))
    assert d["quadrature"]["M"] == 8 and len(d["per_scale"]["re"]) == 8


# -- twisted paraproduct -------------------------------------------------------------------

def test_twisted_paraproduct_identity_symbol():
    q = rand_quad(G16, 10)
    one = builtin_symbol("one", G16)
    F1, F2, F3, _ = q.fields
    dx2 = G16.spacing**2
    assert twisted_paraproduct(F1, F2, F3, one) == pytest.approx(float((F1.values * F2.values * F3.values).sum()) * dx2, abs=1e-10)
    ones = F1.with_values(np.ones((16, 16)))
    assert twisted_paraproduct(F1, F2, ones, one) == pytest.approx(float((F1.values * F2.values).sum()) * dx2, abs=1e-10)


def test_twisted_paraproduct_is_fourth_slot_constant():
    q = rand_quad(G16, 11)
    m = builtin_symbol("cone-eta", G16)
    F1, F2, F3, _ = q.fields
    ones = F1.with_values(np.ones((16, 16)))
    direct = pair_with_symbol(entangled_spectrum(QuadInput(F1, F2, F3, ones)), m)
    assert twisted_paraproduct(F1, F2, F3, m) == pytest.approx(direct, abs=1e-12)


# -- dyadic -----------------------------------------------------------------------------------

def test_haar_normalisation():
    g = Grid1D(8.0, 32)
    for d in range(5):
        phi, psi = haar_system(g, d)
        np.testing.assert_allclose((psi**2).sum(axis=1) * g.spacing, 1.0, atol=1e-15)
        np.testing.assert_allclose((phi**2).sum(axis=1) * g.spacing, 1.0, atol=1e-15)
        assert np.all(psi.sum(axis=1) == 0)
    with pytest.raises(ValueError):
        haar_system(g, 5)


def test_dyadic_constant_fields_vanish():
    ones = np.ones((16, 16))
    assert dyadic_form(QuadInput.from_arrays(G16, ones, ones, ones, ones)).value == 0.0


@pytest.mark.parametrize("seed", range(3))
def test_dyadic_matches_explicit_kernel(seed):
    q = rand_quad(G8, seed)
    assert dyadic_form(q).value == pytest.approx(brute_dyadic(G8, q.arrays), abs=1e-10)
    for d in range(3):
        assert dyadic_form(q, (d, d)).value == pytest.approx(brute_dyadic(G8, q.arrays, [d]), abs=1e-10)


def test_dyadic_depth_errors():
    q = rand_quad(G8, 0)
    with pytest.raises(ValueError):
        dyadic_form(q, (0, 3))
    with pytest.raises(ValueError):
        dyadic_form(q, (2, 1))


# -- triangular ------------------------------------------------------------------------------

def test_triangular_even_inputs_vanish():
    rng = np.random.default_rng(12)
    n = 16
    fs = []
    for _ in range(3):
        a = rng.standard_normal((n, n))
        r = (n - np.arange(n)) % n
        fs.append(SampledField2D(G16, a + a[np.ix_(r, r)], real=True))
    assert abs(triangular_form(*fs)) < 1e-12


def test_triangular_constants_vanish():
    f = SampledField2D(G16, np.ones((16, 16)), real=True)
    assert abs(triangular_form(f, f, f, return_complex=True)) < 1e-12


@pytest.mark.parametrize("seed", range(2))
def test_triangular_matches_triple_sum(seed):
    q = rand_quad(G8, seed)
    fast = triangular_form(*q.fields[:3], return_complex=True)
    slow = brute_triangular(G8, *q.arrays[:3])
    assert abs(fast - slow) < 1e-10
    assert abs(fast.real) < 1e-12


# -- gradient ------------------------------------------------------------------------------------

@pytest.mark.parametrize("name", ["one", "riesz-ratio", "cone-eta"])
def test_gradient_euler_identity(name):
    q = rand_quad(G16, 13)
    m = builtin_symbol(name, G16)
    lam = pair_with_symbol(entangled_spectrum(q), m)
    for j in range(1, 5):
        G = pairing_gradient(q, m, j)
        assert float((G.values * q.arrays[j - 1]).sum()) * G16.spacing**2 == pytest.approx(lam, abs=1e-10)


def test_gradient_finite_differences():
    q = rand_quad(G16, 14)
    m = builtin_symbol("cone-eta", G16)
    rng = np.random.default_rng(15)
    for j in range(1, 5):
        d = rng.standard_normal((16, 16))
        G = pairing_gradient(q, m, j)
        exact = float((G.values * d).sum()) * G16.spacing**2
        for h in (1e-2, 1e-4):
            fs = list(q.arrays)
            fs[j - 1] = q.arrays[j - 1] + h * d
            plus = pair_with_symbol(entangled_spectrum(QuadInput.from_arrays(G16, *fs)), m)
            fs[j - 1] = q.arrays[j - 1] - h * d
            minus = pair_with_symbol(entangled_spectrum(QuadInput.from_arrays(G16, *fs)), m)
            assert (plus - minus) / (2 * h) == pytest.approx(exact, rel=1e-6)


def test_gradient_of_product_form():
    q = rand_quad(G16, 16)
    G = pairing_gradient(q, builtin_symbol("one", G16), 1)
    F1, F2, F3, F4 = q.arrays
    np.testing.assert_allclose(G.values, F2 * F3 * F4, atol=1e-10)
    assert G.real


def test_gradient_bad_slot():
    with pytest.raises(ValueError):
        pairing_gradient(rand_quad(G8, 0), builtin_symbol("one", G8), 5)


# -- structural invariants -------------------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(st.integers(0, 4), st.floats(-3, 3), st.integers(0, 10_000))
def test_multilinearity(slot, lam, seed):
    q = rand_quad(G16, seed)
    extra = np.random.default_rng(seed + 1).standard_normal((16, 16))
    m = builtin_symbol("riesz-ratio", G16)
    slot = min(slot, 3)

    def val(arrs):
        return pair_with_symbol(entangled_spectrum(QuadInput.from_arrays(G16, *arrs)), m)

    base = list(q.arrays)
    mixed = list(base)
    mixed[slot] = lam * base[slot] + extra
    other = list(base)
    other[slot] = extra
    assert val(mixed) == pytest.approx(lam * val(base) + val(other), abs=1e-12 * (1 + abs(lam)) * 50)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_generalised_modulation_invariance(seed):
    q = rand_quad(G16, seed)
    gy = np.random.default_rng(seed + 7).standard_normal(16)
    m = builtin_symbol("cone-eta", G16)
    F1, F2, F3, F4 = q.arrays
    a = pair_with_symbol(entangled_spectrum(QuadInput.from_arrays(G16, F1 * gy[None, :], F2, F3, F4)), m)
    b = pair_with_symbol(entangled_spectrum(QuadInput.from_arrays(G16, F1, F2 * gy[None, :], F3, F4)), m)
    assert a == pytest.approx(b, abs=1e-10)


@pytest.mark.parametrize("name", ["one", "annulus"])
def test_cyclic_symmetry_for_even_kernels(name):
    q = rand_quad(G16, 17)
    m = builtin_symbol(name, G16)
    a = pair_with_symbol(entangled_spectrum(q), m)
    b = pair_with_symbol(entangled_spectrum(q.permuted((2, 3, 0, 1))), m)
    assert a == pytest.approx(b, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.5, 3.0), st.sampled_from(["h", "psi", "phi"]))
def test_positivity_skeleton(seed, alpha, which):
    g = Grid1D(16.0, 32)
    rng = np.random.default_rng(seed)
    F1, F2 = rng.standard_normal((2, 32, 32))
    q = QuadInput.from_arrays(g, F1, F2, F2, F1)
    phi3 = {"h": gaussian_derivative(1.0), "psi": build_psi_v(1.5), "phi": AbsWindow(build_phi_u(1.0))}[which]
    wq = WindowQuad(gaussian(alpha), gaussian(alpha), phi3, phi3)
    quad = ScaleQuadrature.log_midpoint(4 * g.spacing, g.L, 32)
    per = single_scale_batch(entangled_spectrum(q), wq, quad.nodes)
    assert np.all(per.real >= -1e-10)
    assert lambda_over_scales(entangled_spectrum(q), wq, quad).value.real >= -1e-10
