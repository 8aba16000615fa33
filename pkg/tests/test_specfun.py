import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import eval_hermite, factorial, erf

from excursions.specfun import (
    composite_gauss_legendre,
    gauss_legendre,
    log_transition_density,
    oscillator_derivatives,
    oscillator_wavefunctions,
    transition_density,
)


def hermite_function(k, x):
    """Independent oracle: explicit Hermite polynomial times Gaussian."""
    norm = 1.0 / np.sqrt(2.0 ** k * factorial(k) * np.sqrt(np.pi))
    return norm * eval_hermite(k, x) * np.exp(-x * x / 2)


def test_wavefunctions_match_explicit_hermite():
    x = np.linspace(-6, 6, 41)
    phi = oscillator_wavefunctions(30, x)
    for k in range(31):
        np.testing.assert_allclose(phi[k], hermite_function(k, x), atol=1e-13)


def test_wavefunction_parity():
    x = np.linspace(0.1, 5, 13)
    phi_pos = oscillator_wavefunctions(11, x)
    phi_neg = oscillator_wavefunctions(11, -x)
    for k in range(12):
        np.testing.assert_array_equal(phi_neg[k], (-1) ** k * phi_pos[k])


def test_orthonormality_by_quadrature():
    rule = composite_gauss_legendre(np.linspace(-16.0, 16.0, 33), 30)
    phi = oscillator_wavefunctions(40, rule.nodes)
    gram = (phi * rule.weights) @ phi.T
    np.testing.assert_allclose(gram, np.eye(41), atol=1e-12)


def test_large_index_and_argument_stay_finite():
    phi = oscillator_wavefunctions(400, np.array([0.0, 10.0, 30.0, 100.0]))
    assert np.all(np.isfinite(phi))
    # Cramér's bound
    assert np.max(np.abs(phi)) <= 1.0865 * np.pi ** -0.25 + 1e-12


def test_derivatives_against_finite_differences():
    x = np.linspace(-3, 3, 7)
    h = 1e-6
    _, dphi = oscillator_derivatives(10, x)
    fd = (oscillator_wavefunctions(10, x + h) - oscillator_wavefunctions(10, x - h)) / (2 * h)
    np.testing.assert_allclose(dphi, fd, atol=1e-8)


def test_gauss_legendre_exactness():
    rule = gauss_legendre(10, 0.0, 2.0)
    # exact for degree 19
    assert rule.integrate(lambda x: x ** 19) == pytest.approx(2.0 ** 20 / 20, rel=1e-14)
    assert len(rule) == 10


def test_gauss_legendre_erf():
    rule = gauss_legendre(40, 0.0, 1.5)
    val = rule.integrate(lambda x: 2 / np.sqrt(np.pi) * np.exp(-x * x))
    assert val == pytest.approx(erf(1.5), abs=1e-15)


def test_composite_rule():
    rule = composite_gauss_legendre([0.0, 1.0, 3.0], 8)
    assert len(rule) == 16
    assert rule.integrate(np.cos) == pytest.approx(np.sin(3.0), abs=1e-12)


@pytest.mark.parametrize("bad", [(0, 0.0, 1.0), (5, 1.0, 1.0), (5, 0.0, np.inf)])
def test_gauss_legendre_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        gauss_legendre(*bad)


def test_transition_density_forms_agree():
    # sinh form vs difference of Gaussians straddling the switch point
    x, y, t = 3.0, 5.0, 0.5  # xy/t = 30
    direct = (np.exp(-(x - y) ** 2 / (2 * t)) - np.exp(-(x + y) ** 2 / (2 * t))) / np.sqrt(
        2 * np.pi * t)
    assert transition_density(x, y, t) == pytest.approx(direct, rel=1e-14)
    assert transition_density(x, y * 0.999, t) == pytest.approx(
        (np.exp(-(x - y * .999) ** 2 / (2 * t)) - np.exp(-(x + y * .999) ** 2 / (2 * t)))
        / np.sqrt(2 * np.pi * t), rel=1e-12)


def test_transition_density_is_killed_semigroup():
    # Chapman-Kolmogorov for the absorbed kernel
    rule = gauss_legendre(200, 0.0, 15.0)
    x, y, s, t = 0.7, 1.3, 0.4, 0.9
    lhs = transition_density(x, y, s + t)
    rhs = np.sum(rule.weights * transition_density(x, rule.nodes, s)
                 * transition_density(rule.nodes, y, t))
    assert rhs == pytest.approx(lhs, rel=1e-12)


def test_transition_density_vanishes_at_zero():
    assert transition_density(0.0, 1.0, 0.3) == 0.0
    assert log_transition_density(0.0, 1.0, 0.3) == -np.inf


def test_transition_density_errors():
    with pytest.raises(ValueError):
        transition_density(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        transition_density(-1.0, 1.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 8), st.floats(0.01, 8), st.floats(0.05, 3))
def test_log_density_consistent(x, y, t):
    assert np.exp(log_transition_density(x, y, t)) == pytest.approx(
        transition_density(x, y, t), rel=1e-10, abs=1e-300)
