import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gammaln

from fermicomm.classical_norms import (
    classical_grad_envelope, classical_grad_norm, classical_mass, classical_purity_defect,
    classical_purity_envelope, magnetic_grad_x_norm, magnetic_sphere_integral,
    magnetic_sphere_integral_mc, partial_gradient_constant,
)
from fermicomm.fermi_dirac import model_integral_bracket
from fermicomm.model_params import PhysicalParams, sphere_measure


def prm(beta, mu, d=1, b=None):
    return PhysicalParams(1.0, beta, mu, d, b)


def radial_grad_reference(d, beta, mu, p):
    """int_{R^{2d}} |grad F(|z|^2)|^p dz evaluated in the radius r = |z|."""
    beta, mu = mp.mpf(beta), mp.mpf(mu)

    def dF(t):
        y = beta * (t - mu)
        return beta * mp.exp(-abs(y)) / (1 + mp.exp(-abs(y))) ** 2

    f = lambda r: r ** (2 * d - 1) * (2 * r * dF(r * r)) ** p
    peak = mp.sqrt(max(mu, 0)) if mu > 0 else mp.mpf(1) / mp.sqrt(beta)
    return sphere_measure(2 * d) * mp.quad(f, [0, peak, peak + 40 / beta, mp.inf])


def test_mass_one_dimension():
    assert classical_mass(prm(1.0, 0.0)).value == pytest.approx(math.pi * math.log(2), rel=1e-12)


def test_mass_nondegenerate_bracket():
    # 1/(1+e^{t-nu}) lies between e^{nu-t}/2 and e^{nu-t} when nu < 0
    val = classical_mass(prm(2.0, -5.0, 3)).value
    scale = math.pi ** 3 * 2.0 ** -3 * math.exp(-10.0)
    assert 0.5 * scale <= val <= scale


@pytest.mark.parametrize("b", [0.0, 1.0, 7.5])
def test_mass_does_not_depend_on_field(b):
    assert classical_mass(prm(1.3, 0.4, 3, b)).value == classical_mass(prm(1.3, 0.4, 3)).value


def test_grad_norm_formula_one_dimension():
    integral = mp.quad(lambda t: t * mp.exp(2 * t) / (1 + mp.exp(t)) ** 4, [0, 5, mp.inf])
    expected = math.sqrt(4 * math.pi * float(integral))
    assert classical_grad_norm(prm(1.0, 0.0), 2).value == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("d,beta,mu,p", [(1, 1.0, 0.0, 2), (2, 3.0, 1.5, 1), (3, 0.5, -2.0, 4),
                                         (3, 20.0, 2.0, 2.5)])
def test_grad_norm_matches_phase_space_integral(d, beta, mu, p):
    ref = float(radial_grad_reference(d, beta, mu, p)) ** (1 / p)
    assert classical_grad_norm(prm(beta, mu, d), p).value == pytest.approx(ref, rel=1e-9)


def test_grad_norm_monte_carlo_two_dimensional():
    rng = np.random.default_rng(7)
    n, box = 2_000_000, 8.0
    z = rng.uniform(-box, box, size=(n, 2))
    t = (z ** 2).sum(axis=1)
    dF = np.exp(-np.abs(t)) / (1 + np.exp(-np.abs(t))) ** 2
    vals = 4 * t * dF ** 2 * (2 * box) ** 2
    est, err = vals.mean(), 3 * vals.std() / math.sqrt(n)
    assert abs(classical_grad_norm(prm(1.0, 0.0), 2).value ** 2 - est) <= err


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("p", [1, 2, 4])
def test_grad_norm_growth_follows_envelope_exponent(d, p):
    vals = [classical_grad_norm(prm(beta, 1.0, d), p).value for beta in (10.0, 100.0, 1000.0)]
    expo = 0.5 - d / p + (d - 1) / p + 0.5
    if expo > 0:
        assert vals[0] < vals[1] < vals[2]
    slope = math.log10(vals[2] / vals[1])
    assert slope == pytest.approx(expo, abs=0.01)


def test_purity_defect_one_dimension():
    assert classical_purity_defect(prm(2.5, 0.0), 1).value == pytest.approx(math.pi / 5.0,
                                                                          rel=1e-12)


def test_purity_defect_explicit_bracket():
    val = classical_purity_defect(prm(1.0, -4.0, 2), 2).value ** 2
    lo = math.pi ** 2 * 2 ** -4 * 2 ** -2 * math.exp(-8)
    hi = math.pi ** 2 * 2 ** -2 * math.exp(-8)
    assert lo <= val <= hi


GRID = [(d, p, beta, mu) for d in (1, 2, 3) for p in (1, 2, 4)
        for beta in (0.1, 1.0, 10.0) for mu in (-1.0, 0.0, 1.0, 10.0)]


@pytest.mark.parametrize("d,p,beta,mu", GRID)
def test_norms_inside_explicit_brackets(d, p, beta, mu):
    nu = beta * mu
    c = d + p / 2
    lo, hi = model_integral_bracket(p, c, nu)
    pref = math.exp(p * math.log(2) + d * math.log(math.pi) + (p / 2 - d) * math.log(beta)
                    + gammaln(c) - gammaln(d))
    g = classical_grad_norm(prm(beta, mu, d), p).value ** p
    assert pref * lo <= g <= pref * hi
    lo, hi = model_integral_bracket(p, d, nu)
    k = classical_purity_defect(prm(beta, mu, d), p).value ** p
    assert (math.pi / beta) ** d * lo <= k <= (math.pi / beta) ** d * hi


@pytest.mark.parametrize("d,p,beta,mu", GRID)
def test_envelope_ratios_bounded(d, p, beta, mu):
    g = classical_grad_norm(prm(beta, mu, d), p).value
    k = classical_purity_defect(prm(beta, mu, d), p).value
    assert 1e-3 < g / classical_grad_envelope(prm(beta, mu, d), p) < 1e3
    assert 1e-3 < k / classical_purity_envelope(prm(beta, mu, d), p) < 1e3


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_partial_gradient_constant_p2(d):
    assert partial_gradient_constant(d, 2) == pytest.approx(1 / math.sqrt(2), rel=1e-13)


def test_partial_gradient_constant_d3_p2_sphere_ratio():
    ratio = sphere_measure(3) * sphere_measure(8) / (sphere_measure(6) * sphere_measure(5))
    assert ratio == pytest.approx(0.5, rel=1e-13)


@pytest.mark.parametrize("d,p", [(1, 4), (2, 1), (3, 3)])
def test_partial_gradient_constant_monte_carlo(d, p):
    rng = np.random.default_rng(11)
    u = rng.standard_normal((1_000_000, 2 * d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    vals = np.linalg.norm(u[:, :d], axis=1) ** p
    est, err = vals.mean(), 3 * vals.std() / 1000.0
    assert abs(partial_gradient_constant(d, p) ** p - est) <= err


@pytest.mark.parametrize("b,expected", [(0.0, 0.5), (1.0, 5 / 6), (3.0, 3.5)])
def test_sphere_integral_p2(b, expected):
    assert magnetic_sphere_integral(b, 2) == pytest.approx(expected * math.pi ** 3, rel=1e-14)


@pytest.mark.parametrize("b", [0.0, 2.0, 10.0])
def test_sphere_integral_p4_dirichlet_moments(b):
    # (y1^2+y2^2, y3^2, rest) ~ Dirichlet(1, 1/2, 3/2) on the sphere
    k = b * b + 1
    expected = (k * k / 6 + k / 12 + 1 / 16) * math.pi ** 3
    assert magnetic_sphere_integral(b, 4) == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("b,p", [(2.0, 4), (0.5, 1), (10.0, 3)])
def test_sphere_integral_monte_carlo(b, p):
    est, err = magnetic_sphere_integral_mc(b, p, samples=10**6, seed=3)
    assert abs(magnetic_sphere_integral(b, p) - est) <= err


@settings(max_examples=25)
@given(st.floats(0, 100), st.floats(1, 6))
def test_sphere_integral_bracket(b, p):
    # <b>^2 U <= <b>^2 U + V <= <b>^2 with U = y1^2 + y2^2 ~ Beta(1, 2)
    ratio = magnetic_sphere_integral(b, p) / ((b * b + 1) ** (p / 2) * math.pi ** 3)
    s = p / 2
    assert 2 / ((1 + s) * (2 + s)) * (1 - 1e-9) <= ratio <= 1.0


@pytest.mark.parametrize("b", [0.0, 1.0, 3.0, 5.0])
@pytest.mark.parametrize("beta,mu", [(1.0, 0.5), (10.0, -0.3), (0.2, 4.0)])
def test_magnetic_p2_ratio_exact(b, beta, mu):
    gx = magnetic_grad_x_norm(prm(beta, mu, 3, b), 2).value
    g = classical_grad_norm(prm(beta, mu, 3), 2).value
    assert (gx / g) ** 2 == pytest.approx((3 + 2 * b * b) / 6, rel=1e-10)


@pytest.mark.parametrize("p", [1, 2, 3.5])
def test_magnetic_b0_is_partial_gradient(p):
    gx = magnetic_grad_x_norm(prm(2.0, 1.0, 3, 0.0), p).value
    g = classical_grad_norm(prm(2.0, 1.0, 3), p).value
    assert gx == pytest.approx(partial_gradient_constant(3, p) * g, rel=1e-9)


def test_magnetic_p1_linear_in_bracket():
    b = 10.0
    ratio = (magnetic_grad_x_norm(prm(1.0, 1.0, 3, b), 1).value
             / classical_grad_norm(prm(1.0, 1.0, 3), 1).value) / math.hypot(1, b)
    assert 0.1 <= ratio <= 1.0


def test_zero_temperature_rejected():
    with pytest.raises(ValueError):
        classical_grad_norm(prm(math.inf, 1.0), 2)
