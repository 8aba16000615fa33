import numpy as np
import pytest

from excursions.fredholm import finite_det, k0_kernel, resolvent_diagonal
from excursions.painleve import (
    LOG_FLOOR,
    PainleveState,
    default_top_start,
    first_integrals,
    integrate_bottom,
    integrate_top,
    nystrom_state,
    prob_bottom,
    prob_series_bottom,
    prob_top,
    r0,
    series_coefficients,
    series_log_integral,
    series_r,
)
from excursions.specfun import oscillator_derivatives


def r0_oracle(n):
    """Small-window limit: r(s) ~ s K0(s, s) ~ s^{3/2} sum_j phi'_{2j+1}(0)^2."""
    _, d = oscillator_derivatives(2 * n, np.array([0.0]))
    return float(np.sum(d[1:2 * n:2, 0] ** 2))


def test_r0_values():
    assert r0(1) == pytest.approx(2 / np.sqrt(np.pi), rel=1e-15)
    assert r0(1) == pytest.approx(1.1283792, abs=1e-7)
    for n in range(1, 9):
        assert r0(n) == pytest.approx(r0_oracle(n), rel=1e-12)


def test_series_vanishes_at_zero():
    assert series_r(3, 0.0) == 0.0
    assert series_log_integral(3, 0.0) == 0.0
    assert prob_series_bottom(3, 0.0) == 1.0


def test_series_leading_term():
    a = series_coefficients(4)
    assert np.all(a[:3] == 0)
    assert a[3] == pytest.approx(r0(4))


@pytest.mark.parametrize("n", [1, 2, 5])
def test_series_matches_resolvent(n):
    s = 0.05
    assert series_r(n, s) == pytest.approx(s * resolvent_diagonal(k0_kernel(n), s), abs=1e-7)


def test_series_rejects_large_s():
    with pytest.raises(ValueError):
        series_r(2, 0.5)
    with pytest.raises(ValueError):
        prob_series_bottom(2, 0.31)


def test_ten_term_expansion_values():
    assert prob_series_bottom(1, 0.1) == pytest.approx(0.99925224, abs=1e-8)
    # the s^10 term carries a factor (n - 1)
    s = 0.2
    c = r0(1)
    without = (1 - 2 / 3 * c * s ** 3 + 2 / 25 * 5 * c * s ** 5 - 105 / 735 * c * s ** 7
               + 5 * 63 / 8505 * c * s ** 9)
    assert prob_series_bottom(1, s) == pytest.approx(without, abs=1e-16)


def test_ten_term_expansion_matches_ode():
    assert prob_series_bottom(2, 0.1) == pytest.approx(prob_bottom(2, 0.1), abs=1e-10)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_ten_term_expansion_within_envelope(n):
    for s in (0.1, 0.2, 0.3):
        det = finite_det(n, (0.0, s))
        assert abs(prob_series_bottom(n, s) - det) <= r0(n) * s ** 11


@pytest.mark.parametrize("n", [2, 5, 8])
def test_ten_term_expansion_error_is_order_s11(n):
    # the omitted remainder scales like s^11 (its coefficient grows with n)
    ratios = [(prob_series_bottom(n, s) - finite_det(n, (0.0, s))) / s ** 11
              for s in (0.1, 0.2)]
    assert ratios[1] == pytest.approx(ratios[0], rel=0.05)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_series_log_integral_matches_determinant(n):
    for s in (0.1, 0.2, 0.3):
        det = finite_det(n, (0.0, s))
        assert np.exp(-series_log_integral(n, s * s)) == pytest.approx(det, abs=1e-10)


def test_series_refuses_outside_convergence_region():
    assert series_r(3, 0.1) == pytest.approx(0.1 * resolvent_diagonal(k0_kernel(3), 0.1),
                                             rel=1e-8)
    with pytest.raises(ValueError, match="convergence"):
        series_r(12, 0.1)


def test_initial_first_integrals_vanish():
    for kind, s in (("bottom", 1e-3), ("top", default_top_start(2))):
        st = nystrom_state(2, s, kind)
        assert isinstance(st, PainleveState)
        assert np.max(np.abs(st.first_integrals())) < 1e-10


def test_first_integrals_detect_perturbation():
    st = nystrom_state(2, 0.5, "bottom")
    good = first_integrals(2, st.s, st.q, st.p, st.u, st.v, st.w)
    bad = first_integrals(2, st.s, st.q * 1.01, st.p, st.u, st.v, st.w)
    assert np.max(np.abs(good)) < 1e-10
    assert np.max(np.abs(bad)) > 1e-4


def test_bottom_trajectory_n1():
    sol = integrate_bottom(1, 1.0)
    assert sol.probability()[-1] == pytest.approx(0.5724067, abs=1e-6)
    assert np.max(np.abs(sol.r_prime - sol.r_prime_check)) < 1e-7
    assert np.all(sol.r_values >= -1e-10)
    assert np.all(sol.first_integral_gate())
    assert np.all(sol.sigma_gate())


def test_bottom_trajectory_state_consistency():
    sol = integrate_bottom(3, 4.0)
    i = 100
    st = PainleveState(sol.grid[i], *sol.states[:, i], n=3)
    assert st.r == pytest.approx(sol.r_values[i], rel=1e-12)
    assert sol.r_values[i] == pytest.approx(
        sol.grid[i] * resolvent_diagonal(k0_kernel(3), sol.grid[i]), abs=1e-8)


def test_top_trajectory_n1():
    sol = integrate_top(1, 1.0)
    assert abs(sol.r_values[0]) < 1e-10
    assert sol.probability()[-1] == pytest.approx(0.4275933, abs=1e-6)
    assert np.all(sol.first_integral_residuals <= 1e-7 * (1 + sol.grid))
    assert sol.cutoff is None


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_prob_bottom_against_determinant(n):
    s = np.linspace(0.25, 3.0, 12)
    ref = [finite_det(n, (0.0, x)) for x in s]
    np.testing.assert_allclose(prob_bottom(n, s), ref, atol=1e-8)


def test_prob_bottom_edge_cases():
    assert prob_bottom(3, 0.0) == 1.0
    with pytest.raises(ValueError):
        prob_bottom(3, -0.1)


def test_prob_bottom_s0_insensitive():
    s = np.array([0.5, 1.0, 2.0])
    a = prob_bottom(3, s, s0=1e-3)
    b = prob_bottom(3, s, s0=2.5e-4)
    assert np.max(np.abs(a - b)) < 1e-8


def test_prob_top_against_determinant():
    s = np.linspace(0.5, 3.0, 11)
    vals = prob_top(3, s)
    ref = np.array([finite_det(3, (x, np.inf)) for x in s])
    np.testing.assert_allclose(vals, ref, atol=1e-5)
    # points below the integration cutoff are reported as 0 with a tiny true value
    assert np.all(ref[vals == 0] < np.exp(-LOG_FLOOR) * 2)


def test_prob_top_large_s_is_one():
    n = 2
    s = np.sqrt(4 * n) + 6
    assert prob_top(n, s) == pytest.approx(1.0, abs=1e-8)
    assert prob_top(1, 1.0) == pytest.approx(0.4275933, abs=1e-6)


def test_prob_top_rejects_nonpositive():
    with pytest.raises(ValueError):
        prob_top(2, 0.0)


def test_top_cutoff_reports_bound():
    sol = integrate_top(3, 0.05)
    assert sol.cutoff is not None and sol.cutoff > 0.05
    assert 0 < sol.cutoff_probability <= np.exp(-LOG_FLOOR) * 1.7
    assert sol.cutoff_probability == pytest.approx(finite_det(3, (np.sqrt(sol.cutoff), np.inf)),
                                                   rel=1e-3)


def test_integrator_validation():
    with pytest.raises(ValueError):
        integrate_bottom(2, 1.0, s0=2.0)
    with pytest.raises(ValueError):
        integrate_top(2, 5.0, s_start=4.0)
