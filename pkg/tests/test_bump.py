import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from entangled.bump import (
    build_f,
    build_h,
    dump_csv,
    edge_phi1,
    mollifier_phi,
    smoothness_probe,
    transition_phi2,
)

# Reference values from a 40-digit mpmath evaluation of the defining
# integrals (independent of the panel tables used by the package).
LOG_C_REF = 1027.0820700121701
H0_REF = 1.0973095498981946
G_REF = {0.00097: 0.021681203892541165, 0.00098: 0.78079264995702249, 0.000985: 0.99703028992501970}


@pytest.fixture(scope="module")
def fam():
    return build_f()


@pytest.fixture(scope="module")
def hp(fam):
    return build_h(fam)


def test_elementary_pieces():
    assert mollifier_phi(1.0) == pytest.approx(math.exp(-1))
    assert mollifier_phi(0.0) == 0.0 and mollifier_phi(-2.0) == 0.0
    assert transition_phi2(0.5) == pytest.approx(0.5, abs=1e-15)
    assert transition_phi2(-0.1) == 0.0 and transition_phi2(1.3) == 1.0


def test_phi1_matches_differentiated_closed_form():
    # ((3 - x) phi'(x))' by a high-order central difference
    def inner(x):
        return (3 - x) * np.exp(-1 / x) / x**2

    for x in (0.05, 0.2, 0.7, 1.5):
        hstep = 1e-4 * x
        fd = (-inner(x + 2 * hstep) + 8 * inner(x + hstep) - 8 * inner(x - hstep) + inner(x - 2 * hstep)) / (12 * hstep)
        assert edge_phi1(x) == pytest.approx(fd, rel=1e-8)


def test_phi1_flat_at_zero():
    ratios = []
    for k in (1, 2, 3):
        x = 10.0**-k
        exact = math.exp(-1 / x) * (x * x - 7 * x + 3) / x**4
        assert edge_phi1(x) == pytest.approx(exact, rel=1e-13)
        ratios.append(edge_phi1(x) / x**8)
    # beats x**8 by ever larger factors as x shrinks
    assert ratios[0] > 1e3 * ratios[1] and ratios[1] > 1e3 * ratios[2]


def test_normalisation(fam):
    assert abs(fam.mass_check - 1.0) < 1e-12
    assert fam.log_c == pytest.approx(LOG_C_REF, abs=1e-10)


def test_antiderivative_against_reference(fam):
    ys = np.array(sorted(G_REF))
    np.testing.assert_allclose(fam.G(ys), [G_REF[y] for y in ys], rtol=1e-10)


def test_g_support_and_sign(fam):
    y = np.linspace(-0.01, 0.02, 200001)
    gy = fam.g(y)
    assert np.all(gy >= 0)
    assert np.all(gy[(y <= 0) | (y >= fam.eps)] == 0)


def test_f_reference_values(fam):
    assert fam.f(np.array([2.0]))[0] == 1.0
    assert fam.f(np.array([1.0]))[0] == 0.0
    assert fam.f(np.array([3.0]))[0] == 0.0


def test_f_plateau_and_support(fam):
    x = np.linspace(1.001, 2.999, 100001)
    assert np.max(np.abs(fam.f(x) - 1)) < 1e-12
    out = np.concatenate([np.linspace(-5, 1, 1001), np.linspace(3, 6, 1001)])
    assert np.all(fam.f(out) == 0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.5, 3.5))
def test_f_even_about_two_and_bounded(fam, x):
    a, b = fam.f(np.array([x, 4.0 - x]))
    assert a == pytest.approx(b, abs=1e-13)
    assert 0.0 <= a <= 1.0


def test_f_is_monotone_on_rising_edge(fam):
    x = np.linspace(1.0, 1.0011, 20001)
    assert np.all(np.diff(fam.f(x)) >= -1e-15)


def test_edge_closed_form(fam):
    # f(x) = c (4 - x) phi'(x - 1) below 1 + delta, in log form
    x = np.array([1.00045, 1.0005, 1.0004])
    y = x - 1
    expect = np.exp(fam.log_c + np.log(4 - x) - 1 / y - 2 * np.log(y))
    np.testing.assert_allclose(fam.f(x), expect, rtol=1e-13)


def test_derivative_consistency(fam):
    # derivative of the cumulative f equals g(x-1) - g(3-x)
    x = np.linspace(1 + fam.eps - 6e-5, 1 + fam.eps - 1e-6, 50)
    hstep = 3e-8

    def fd(xs):
        v = [fam.f(xs + k * hstep) for k in (-2, -1, 1, 2)]
        return (v[0] - 8 * v[1] + 8 * v[2] - v[3]) / (12 * hstep)

    scale = np.max(np.abs(fam.f_prime(x)))
    assert np.max(np.abs(fd(x) - fam.f_prime(x))) < 1e-8 * scale
    xr = 4 - x
    assert np.max(np.abs(fd(xr) - fam.f_prime(xr))) < 1e-8 * scale


def test_f_sqrt(fam):
    x = np.linspace(0.9, 3.1, 4001)
    np.testing.assert_allclose(fam.f_sqrt(x) ** 2, fam.f(x), atol=1e-15, rtol=1e-12)


def test_h_basic(fam, hp):
    assert hp.h(np.array([3.0, -3.0, 4.0]))[:2].tolist() == [0.0, 0.0]
    h0 = hp.h(np.array([0.0]))[0]
    assert math.log(2.997 / 1.001) <= h0 <= math.log(3)
    assert h0 == pytest.approx(H0_REF, abs=1e-12)
    x = np.linspace(-3.5, 3.5, 70001)
    np.testing.assert_allclose(hp.h(x), hp.h(-x), atol=1e-12)
    inner = np.abs(x) < 3
    assert np.all(hp.h(x[inner & (np.abs(x) < 2.9995)]) > 0)


def test_h_near_edge_closed_form(fam, hp):
    z = np.array([1e-4, 2e-4, 4e-4, 4.9e-4])
    for sgn in (-1, 1):
        x = sgn * (3 - z)
        zz = 3 - np.abs(x)
        expect_log = fam.log_c - 1 / zz
        got = hp.sqrt(x)
        np.testing.assert_allclose(got, np.exp(0.5 * expect_log), rtol=1e-12)


def test_h_matches_tail_integral(fam, hp):
    # int_x^inf (f(t) + f(-t)) / t dt, by adaptive quadrature on the rising layers
    def tail(x):
        total = 0.0
        knots = [-3, -3 + fam.eps, -1 - fam.eps, -1, 1, 1 + fam.eps, 3 - fam.eps, 3]
        for a, b in zip(knots[:-1], knots[1:]):
            lo, hi = max(a, x), b
            if hi <= lo or (a == -1 and b == 1):
                continue
            val, _ = integrate.quad(lambda t: (fam.f(np.array([t]))[0] + fam.f(np.array([-t]))[0]) / t,
                                    lo, hi, epsabs=1e-13, epsrel=1e-13, limit=500,
                                    points=[p for p in (1 + fam.eps - 3e-5, 3 - fam.eps + 3e-5,
                                                        -1 - fam.eps + 3e-5, -3 + fam.eps - 3e-5) if lo < p < hi] or None)
            total += val
        return total

    for x in (-2.5, -1.5, 0.0, 0.5, 1.0005, 1.5, 2.0, 2.9992):
        assert tail(x) == pytest.approx(hp.h(np.array([x]))[0], abs=1e-10)


def test_h_derivative(fam, hp):
    x = np.array([-2.5, -1.2, 1.7, 2.2])
    hstep = 1e-6
    fd = (hp.h(x + hstep) - hp.h(x - hstep)) / (2 * hstep)
    np.testing.assert_allclose(fd, hp.derivative(x), rtol=1e-7)
    # -s d/ds h(s) = f(|s|)
    s = np.linspace(0.5, 3.5, 301)
    np.testing.assert_allclose(-s * hp.derivative(s), fam.f(s), atol=1e-15)


@pytest.mark.parametrize("which,x0", [("f", 1.0), ("f", 3.0), ("h", -3.0), ("h", 3.0)])
def test_square_roots_smooth(fam, hp, which, x0):
    w = fam.f_sqrt if which == "f" else hp.sqrt
    rep = smoothness_probe(w, x0, max_order=3)
    assert np.all(rep.bounded)


def test_probe_negative_control():
    rep = smoothness_probe(lambda x: np.abs(x) ** 0.5, 0.0, max_order=3)
    assert not rep.bounded[0]
    assert rep.slopes[0] == pytest.approx(0.5, abs=1e-6)


def test_probe_errors():
    with pytest.raises(ValueError):
        smoothness_probe(np.sin, 0.0, max_order=5)
    with pytest.raises(ValueError):
        smoothness_probe(np.sin, 1e300, max_order=2, steps=[1e-300])


def test_dump_csv(tmp_path):
    p = tmp_path / "bump.csv"
    dump_csv(p, x=np.linspace(-4, 4, 81))
    lines = p.read_text().splitlines()
    assert lines[0] == "x,f,f_sqrt,h,h_sqrt" and len(lines) == 82
