import numpy as np
import pytest
from scipy import stats

from excursions.fredholm import finite_det
from excursions.montecarlo import (
    EstimatorResult,
    ExcursionEnsemble,
    RejectionFailure,
    acceptance_rate,
    density_chi_square,
    estimate_areas,
    estimate_bottom_cdf,
    estimate_joint,
    estimate_top_cdf,
    grid_index,
    make_streams,
    sample_bridge,
    sample_excursion,
    sample_matrix_paths,
    sample_matrix_times,
    sample_nonintersecting,
)


def single_excursion_cdf(tau):
    """CDF of one excursion at time tau from the closed-form survival function."""
    sigma = np.sqrt(2 * tau * (1 - tau))
    return lambda x: 1.0 - np.array([finite_det(1, (0.0, xi / sigma)) for xi in np.atleast_1d(x)])


def test_streams_are_reproducible_and_distinct():
    a = [g.standard_normal(3) for g in make_streams(7, 3)]
    b = [g.standard_normal(3) for g in make_streams(7, 3)]
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)
    assert not np.allclose(a[0], a[1])


def test_grid_index():
    assert grid_index(0.5, 512) == 256
    assert grid_index(0.4, 520) == 208
    with pytest.raises(ValueError):
        grid_index(0.4, 512)
    with pytest.raises(ValueError):
        grid_index(1.0, 64)


def test_bridge_endpoints_and_variance():
    rng = make_streams(1, 1)[0]
    b = sample_bridge(64, rng, size=20000)
    assert np.all(b[:, 0] == 0) and np.all(b[:, -1] == 0)
    t = 16 / 64
    assert np.var(b[:, 16]) == pytest.approx(t * (1 - t), rel=0.05)


@pytest.mark.parametrize("method", ["bessel", "vervaat"])
def test_excursion_shape(method):
    rng = make_streams(2, 1)[0]
    e = sample_excursion(64, rng, method)
    assert e.shape == (65,)
    assert e[0] == 0 and e[-1] == 0
    assert np.all(e[1:-1] > 0) if method == "bessel" else np.all(e[1:-1] >= 0)


def test_excursion_marginal_law():
    # exact at grid times: KS test of X(1/4) against the single-path law
    rng = make_streams(3, 1)[0]
    x = np.array([sample_excursion(16, rng)[4] for _ in range(4000)])
    assert stats.kstest(x, single_excursion_cdf(0.25)).pvalue > 0.01


def test_excursion_rejects_bad_input():
    rng = make_streams(0, 1)[0]
    with pytest.raises(ValueError):
        sample_excursion(4, rng)
    with pytest.raises(ValueError):
        sample_excursion(16, rng, method="walk")


def test_rejection_sampler_validity():
    rng = make_streams(4, 1)[0]
    for n in (1, 2, 3):
        ens = sample_nonintersecting(n, 16, rng)
        assert isinstance(ens, ExcursionEnsemble)
        assert ens.is_valid()
        assert ens.positions.shape == (n, 17)
    with pytest.raises(ValueError):
        sample_nonintersecting(4, 16, rng)


def test_rejection_failure_reports_rate():
    rng = make_streams(5, 1)[0]
    with pytest.raises(RejectionFailure, match="rate"):
        sample_nonintersecting(3, 256, rng, max_attempts=20, batch=10)


def test_acceptance_rates_order():
    r1 = acceptance_rate(1, 16, 2000, seed=1)
    r2 = acceptance_rate(2, 16, 20000, seed=1)
    r3 = acceptance_rate(3, 16, 20000, seed=1)
    assert r1.estimate == 1.0
    assert r3.estimate < r2.estimate < 1.0


def test_ensemble_validation():
    grid = np.linspace(0, 1, 9)
    with pytest.raises(ValueError):
        ExcursionEnsemble(2, grid, np.zeros((3, 9)))
    bad = ExcursionEnsemble(2, grid, np.vstack([np.sin(np.pi * grid), 0.5 * np.sin(np.pi * grid)]))
    assert not bad.is_valid()
    good = ExcursionEnsemble(2, grid, np.vstack([0.5 * np.sin(np.pi * grid), np.sin(np.pi * grid)]))
    good.positions[:, -1] = 0.0
    assert good.is_valid()
    np.testing.assert_allclose(good.areas(), good.positions.sum(axis=1) / 8)


def test_matrix_sampler_single_path_law():
    rng = make_streams(6, 1)[0]
    x = sample_matrix_times(1, [0.3], rng, 4000)[:, 0, 0]
    assert stats.kstest(x, single_excursion_cdf(0.3)).pvalue > 0.01


def test_matrix_sampler_ordering_and_paths():
    rng = make_streams(7, 1)[0]
    x = sample_matrix_times(3, [0.2, 0.5, 0.9], rng, 500)
    assert x.shape == (500, 3, 3)
    assert np.all(np.diff(x, axis=-1) > 0) and np.all(x > 0)
    paths = sample_matrix_paths(3, 32, rng, 50)
    assert paths.shape == (50, 3, 33)
    for p in paths:
        assert ExcursionEnsemble(3, np.linspace(0, 1, 33), p).is_valid()


@pytest.mark.parametrize("n", [2, 3])
def test_matrix_sampler_bottom_probability(n):
    tau, s = 0.5, 0.6
    sigma = np.sqrt(2 * tau * (1 - tau))
    res = estimate_bottom_cdf(n, 64, tau, [s * sigma], samples=40000, seed=11)[0]
    assert res.within(finite_det(n, (0.0, s)), k=4)


def test_matrix_sampler_top_probability():
    tau, s = 0.25, 2.0
    sigma = np.sqrt(2 * tau * (1 - tau))
    res = estimate_top_cdf(2, 64, tau, [s * sigma], samples=40000, seed=12)[0]
    assert res.within(finite_det(2, (s, np.inf)), k=4)


def test_rejection_and_matrix_samplers_agree():
    # two independent constructions of the same law at grid times
    tau = 0.5
    sigma = np.sqrt(0.5)
    a = estimate_bottom_cdf(2, 16, tau, [0.5 * sigma], 3000, seed=3, sampler="rejection")[0]
    b = estimate_bottom_cdf(2, 16, tau, [0.5 * sigma], 3000, seed=3, sampler="matrix")[0]
    diff = abs(a.estimate - b.estimate)
    assert diff < 4 * np.hypot(a.standard_error, b.standard_error)


def test_threshold_zero_and_monotone():
    res = estimate_bottom_cdf(2, 64, 0.5, [0.0, 0.2, 0.4, 0.8], samples=5000, seed=1)
    assert res[0].estimate == 1.0 and res[0].standard_error == 0.0
    est = [r.estimate for r in res]
    assert all(a >= b for a, b in zip(est, est[1:]))


def test_determinism_and_thread_invariance():
    kw = dict(n=2, M=64, tau=0.5, thresholds=[0.3], samples=4000, seed=99, streams=4)
    a = estimate_bottom_cdf(threads=1, **kw)[0]
    b = estimate_bottom_cdf(threads=1, **kw)[0]
    c = estimate_bottom_cdf(threads=3, **kw)[0]
    assert a.estimate == b.estimate == c.estimate
    assert a.standard_error == c.standard_error
    d = estimate_bottom_cdf(threads=1, **{**kw, "seed": 100})[0]
    assert d.estimate != a.estimate


def test_estimator_standard_error_definition():
    res = estimate_bottom_cdf(2, 64, 0.5, [0.3], samples=5000, seed=5)[0]
    p = res.estimate
    assert res.standard_error == pytest.approx(np.sqrt(p * (1 - p) / (5000 - 1)), rel=1e-12)
    d = res.as_dict()
    assert d["sample_count"] == 5000 and d["seed"] == 5


def test_joint_estimates():
    sig = np.sqrt(2 * np.array([0.25, 0.75]) * 0.75)
    assert estimate_joint(2, 64, [0.25, 0.75], [0.0, 0.0], "bottom", 1000, seed=1).estimate == 1.0
    # a vacuous second threshold reproduces the one-time probability
    joint = estimate_joint(2, 64, [0.25, 0.75], [0.4 * sig[0], 0.0], "bottom", 30000, seed=2)
    assert joint.within(finite_det(2, (0.0, 0.4)), k=4)
    top = estimate_joint(2, 64, [0.25, 0.75], [9.0, 9.0], "top", 1000, seed=1)
    assert top.estimate == 1.0
    with pytest.raises(ValueError):
        estimate_joint(2, 64, [0.25], [0.1, 0.2], "bottom", 10, seed=1)
    with pytest.raises(ValueError):
        estimate_joint(2, 64, [0.3], [0.1], "bottom", 10, seed=1)


def test_single_path_areas():
    lo, hi = estimate_areas(1, 256, samples=20000, seed=8)
    assert lo.estimate == hi.estimate
    assert lo.within(np.sqrt(np.pi / 8), k=4)


def test_two_path_areas():
    lo, hi = estimate_areas(2, 256, samples=20000, seed=9)
    assert lo.within(5 / 8 * (np.sqrt(2) - 1) * np.sqrt(np.pi), k=4)
    assert hi.within(5 / 8 * np.sqrt(np.pi), k=4)
    assert lo.estimate < hi.estimate


def test_density_chi_square_passes():
    res = density_chi_square(2, 64, 0.5, samples=50000, seed=4, bins=20)
    assert res["pvalue"] > 0.01
    assert res["counts"].sum() == 100000
    assert res["expected"].sum() == pytest.approx(100000)


def test_density_mismatch_is_detected():
    # positions of two paths are not distributed like a single excursion
    rng = make_streams(13, 1)[0]
    x = sample_matrix_times(2, [0.5], rng, 5000)[:, 0, :].ravel()
    assert stats.kstest(x, single_excursion_cdf(0.5)).pvalue < 1e-6


def test_estimator_within():
    r = EstimatorResult(0.5, 0.01, 100, 1)
    assert r.within(0.53) and not r.within(0.54)
