import numpy as np
import pytest
from scipy.integrate import quad

from excursions.kernels import BesselTimePartition, bessel_kernel, kernel_scalar
from excursions.observables import (
    AREA_PREFACTOR,
    METHODS,
    area_asymptotics,
    bessel_integral,
    bessel_scaling_error,
    bottom_cdf,
    constant_cH,
    constant_cL,
    expected_area_bottom,
    expected_area_top,
    expected_areas,
    joint_cdf,
    joint_limit_check,
    sigma,
    top_cdf,
)
from reference import AREA_TABLE, BESSEL_INTEGRAL, C_H, C_L, SCALED_BOTTOM, TOP_ASYMPTOTIC


def test_sigma():
    assert sigma(0.5) == pytest.approx(np.sqrt(0.5))
    with pytest.raises(ValueError):
        sigma(1.0)


@pytest.mark.parametrize("method", METHODS)
def test_bottom_cdf_zero_threshold(method):
    assert bottom_cdf(3, 0.4, 0.0, method=method) == 1.0


@pytest.mark.parametrize("method", ["finite", "fredholm", "painleve"])
def test_bottom_cdf_single_path(method):
    assert bottom_cdf(1, 0.5, sigma(0.5), method=method) == pytest.approx(0.5724067, abs=1e-6)


def test_bottom_cdf_tau_invariance():
    a = bottom_cdf(3, 0.3, 0.7 * sigma(0.3))
    b = bottom_cdf(3, 0.6, 0.7 * sigma(0.6))
    assert a == pytest.approx(b, abs=1e-10)


@pytest.mark.parametrize("n", [1, 2, 5, 8])
def test_bottom_methods_agree(n):
    tau = 0.5
    s = np.linspace(0.25, 3.0, 12)
    x = s * sigma(tau)
    ref = bottom_cdf(n, tau, x, "finite")
    for method in ("fredholm", "painleve"):
        np.testing.assert_allclose(bottom_cdf(n, tau, x, method), ref, atol=1e-5)
    small = x[s <= 0.3]
    np.testing.assert_allclose(bottom_cdf(n, tau, small, "series"), ref[s <= 0.3], atol=1e-9)


def test_series_method_limits():
    with pytest.raises(ValueError):
        bottom_cdf(2, 0.5, 0.5 * sigma(0.5), method="series")
    with pytest.raises(ValueError):
        top_cdf(2, 0.5, 1.0, method="series")
    with pytest.raises(ValueError):
        bottom_cdf(2, 0.5, 0.1, method="spline")


def test_cdf_monotonicity():
    x = np.linspace(0, 3, 16)
    b = bottom_cdf(4, 0.5, x)
    t = top_cdf(4, 0.5, x)
    assert np.all(np.diff(b) <= 1e-14)
    assert np.all(np.diff(t) >= -1e-14)


def test_top_cdf_values():
    assert top_cdf(1, 0.5, sigma(0.5)) == pytest.approx(0.4275933, abs=1e-7)
    n = 3
    far = (np.sqrt(4 * n) + 6) * sigma(0.5)
    for method in ("finite", "fredholm", "painleve"):
        assert top_cdf(n, 0.5, far, method) == pytest.approx(1.0, abs=1e-8)


def test_complement_only_for_single_path():
    x = 0.8 * sigma(0.5)
    assert bottom_cdf(1, 0.5, x) + top_cdf(1, 0.5, x) == pytest.approx(1.0, abs=1e-14)
    assert abs(bottom_cdf(3, 0.5, x) + top_cdf(3, 0.5, x) - 1.0) > 1e-3


@pytest.mark.parametrize("n", [2, 3, 5])
def test_top_methods_agree(n):
    s = np.linspace(0.5, 3.0, 6)
    x = s * sigma(0.5)
    ref = top_cdf(n, 0.5, x, "finite")
    np.testing.assert_allclose(top_cdf(n, 0.5, x, "fredholm"), ref, atol=1e-8)
    np.testing.assert_allclose(top_cdf(n, 0.5, x, "painleve"), ref, atol=1e-5)


def test_negative_threshold_rejected():
    with pytest.raises(ValueError):
        bottom_cdf(2, 0.5, -0.1)


def test_joint_cdf():
    val = joint_cdf(2, (0.4, 0.6), (0.3 * sigma(0.4), 0.3 * sigma(0.6)))
    assert val == pytest.approx(0.91083784, abs=1e-7)
    single = joint_cdf(2, (0.4,), (0.3 * sigma(0.4),))
    assert single == pytest.approx(bottom_cdf(2, 0.4, 0.3 * sigma(0.4)), abs=1e-10)
    # staying below a level at two times is no likelier than at one of them
    top2 = joint_cdf(2, (0.4, 0.6), (1.0, 1.0), kind="top")
    assert top2 <= top_cdf(2, 0.4, 1.0) + 1e-12


def test_area_prefactor():
    # E(area) = int_0^1 sigma(tau) dtau * int_0^inf P(s) ds
    val, _ = quad(sigma, 0, 1)
    assert AREA_PREFACTOR == pytest.approx(val, rel=1e-10)


@pytest.mark.parametrize("n", [1, 2])
def test_area_closed_forms(n):
    res = expected_areas(n)
    lo, hi = AREA_TABLE[n]
    assert res.bottom_mean == pytest.approx(lo, abs=1e-9)
    assert res.top_mean == pytest.approx(hi, abs=1e-9)


def test_area_table_samples():
    assert expected_area_bottom(5) == pytest.approx(AREA_TABLE[5][0], abs=1e-5)
    assert expected_area_top(9) == pytest.approx(AREA_TABLE[9][1], abs=1e-5)
    res = expected_areas(9)
    assert res.scaled_bottom == pytest.approx(SCALED_BOTTOM[9], abs=1e-5)
    assert 0 < res.bottom_mean < res.top_mean


def test_area_validation():
    with pytest.raises(ValueError):
        expected_areas(0)


def test_limit_constants():
    val, err, cut = bessel_integral()
    assert val == pytest.approx(BESSEL_INTEGRAL, abs=2e-4)
    assert err < 1e-10 and cut > 4
    c = constant_cL()
    assert c.c_L == pytest.approx(C_L, abs=1e-5)
    assert c.c_L == pytest.approx(np.pi / (16 * np.sqrt(2)) * c.bessel_integral, abs=1e-12)
    assert constant_cH() == pytest.approx(C_H, abs=1e-12)


def test_area_asymptotics():
    c = constant_cL()
    for n, ref in TOP_ASYMPTOTIC.items():
        assert area_asymptotics(n, "top") == pytest.approx(ref, abs=5e-5)
    assert area_asymptotics(9, "bottom", c) == pytest.approx(c.c_L / 3)
    with pytest.raises(ValueError):
        area_asymptotics(9, "middle")


def test_bessel_kernel_limit_pointwise():
    n = 200
    c = 2 * np.sqrt(n)
    assert kernel_scalar(n, 1.0 / c, 2.0 / c) / c == pytest.approx(bessel_kernel(1.0, 2.0),
                                                                   abs=2e-3)


def test_scaling_error_decreases():
    errs = [bessel_scaling_error(n) for n in (8, 16, 32, 64, 128)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < errs[0] / 3
    with pytest.raises(ValueError):
        bessel_scaling_error(8, box_size=9)


def test_extended_scaling_error_decreases():
    times = BesselTimePartition((0.0, 1.0))
    errs = [bessel_scaling_error(n, times=times, points=21) for n in (8, 16, 32)]
    assert errs[0] > errs[1] > errs[2]


def test_joint_limit_check():
    res = joint_limit_check(BesselTimePartition((0.0,)), [2.0], (16, 32, 64))
    assert res["monotone"] and not res["probe"]
    assert res["rows"][-1]["difference"] < 2e-2
    zero = joint_limit_check(BesselTimePartition((0.0, 1.0)), [0.0, 0.0], (8, 16))
    assert zero["bessel"] == 1.0 and all(r["value"] == 1.0 for r in zero["rows"])
    with pytest.raises(ValueError):
        joint_limit_check(BesselTimePartition((0.0, 1.0)), [1.0], (8,))
