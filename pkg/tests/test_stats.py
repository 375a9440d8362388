import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import linregress

from slowrec.errors import InsufficientPointsError
from slowrec.montecarlo import SurvivalEstimate
from slowrec.stats import (Sandwich, TailExponentRegressor, TailFit, default_window,
                           fit_tail, sandwich_verdict, usable_mask)


def _curve(slope, n, trajectories=None, scale=1.0, censored=0):
    n = np.asarray(n)
    s = np.minimum(1.0, scale * n.astype(float) ** -slope)
    if trajectories is None:
        return SurvivalEstimate(n, s, np.zeros_like(s), None, 0, int(n[-1]))
    counts = np.rint(s * trajectories).astype(np.int64)
    return SurvivalEstimate.from_counts(n, counts, trajectories, censored, int(n[-1]))


def test_exact_power_law_recovered():
    n = np.geomspace(10, 1e4, 30).astype(int)
    fit = fit_tail(_curve(0.5, n))
    assert fit.slope == pytest.approx(0.5, abs=1e-10)
    assert fit.stderr == pytest.approx(0.0, abs=1e-10)
    assert fit.points_used == 30 and fit.window == (10, 10000)


def test_fit_matches_scipy_on_noisy_curve():
    rng = np.random.default_rng(3)
    n = np.unique(np.geomspace(10, 1e4, 25).astype(int))
    s = n**-0.3 * np.exp(rng.normal(0, 0.05, n.size))
    est = SurvivalEstimate(n, s, np.zeros_like(s), None, 0, int(n[-1]))
    fit = fit_tail(est)
    ref = linregress(np.log(n), np.log(s))
    assert fit.slope == pytest.approx(-ref.slope, rel=1e-12)
    assert fit.stderr == pytest.approx(ref.stderr, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(slope=st.floats(0.05, 2.0), scale=st.floats(1e-3, 1.0), k=st.floats(1e-3, 1e3))
def test_slope_invariant_under_scaling(slope, scale, k):
    n = np.unique(np.geomspace(10, 1e4, 20).astype(int))
    rng = np.random.default_rng(0)
    s = scale * n**-slope * np.exp(rng.normal(0, 0.02, n.size))
    base = TailExponentRegressor().fit(n, s)
    scaled = TailExponentRegressor().fit(n, s * min(k, 1.0 / s.max()))
    assert scaled.slope_ == pytest.approx(base.slope_, rel=1e-9, abs=1e-12)
    # rescaling n shifts only the intercept
    stretched = TailExponentRegressor().fit(n * 10, s)
    assert stretched.slope_ == pytest.approx(base.slope_, rel=1e-9, abs=1e-12)


def test_regressor_predict_and_minimum_points():
    reg = TailExponentRegressor().fit([1, 2, 4, 8, 16], [1, 0.5, 0.25, 0.125, 0.0625])
    assert reg.slope_ == pytest.approx(1.0)
    np.testing.assert_allclose(reg.predict([32]), [1 / 32])
    with pytest.raises(InsufficientPointsError):
        TailExponentRegressor().fit([1, 2, 3, 4], [1, 0.5, 0.3, 0.2])


def test_low_count_points_excluded():
    n = np.geomspace(10, 1e5, 30).astype(int)
    est = _curve(1.0, n, trajectories=10**4, scale=10.0)
    mask = usable_mask(est)
    assert np.all(np.rint(est.surv[mask] * 10**4) >= 50)
    assert not mask[-1]
    fit = fit_tail(est)
    assert fit.min_surv_used * 10**4 >= 50


def test_fully_censored_run_has_no_usable_points():
    n = np.array([10, 20, 50, 100, 200, 500])
    est = SurvivalEstimate.from_counts(n, np.full(6, 1000), 1000, 1000, 500)
    with pytest.raises(InsufficientPointsError):
        fit_tail(est)


def test_too_few_points_in_window():
    n = np.geomspace(10, 1e4, 30).astype(int)
    with pytest.raises(InsufficientPointsError):
        fit_tail(_curve(0.5, n), window=(100, 130))


def test_default_window_starts_at_half():
    n = np.arange(1, 11)
    s = np.array([1, 1, 0.9, 0.6, 0.5, 0.4, 0.3, 0.2, 0.15, 0.1])
    est = SurvivalEstimate(n, s, np.zeros(10), None, 0, 10)
    assert default_window(est) == (5, 10)
    flat = SurvivalEstimate(n, np.ones(10), np.zeros(10), None, 0, 10)
    assert default_window(flat) == (1, 10)


def _fit(slope, se):
    return TailFit(slope, 0.0, (10, 100), se, 10, 0.1)


@pytest.mark.parametrize("slope, se, bracket, verdict", [
    (0.5, 0.01, (0.4, 0.6), Sandwich.PASS),
    (0.5, 0.01, (0.6, 0.4), Sandwich.PASS),
    (0.7, 0.01, (0.4, 0.6), Sandwich.FAIL),
    (0.3, 0.01, (0.4, 0.6), Sandwich.FAIL),
    (0.59, 0.01, (0.4, 0.6), Sandwich.MARGINAL),
    (0.41, 0.02, (0.4, 0.6), Sandwich.MARGINAL),
])
def test_sandwich_verdicts(slope, se, bracket, verdict):
    assert sandwich_verdict(_fit(slope, se), bracket) is verdict


def test_fit_to_dict():
    d = _fit(0.5, 0.01).to_dict()
    assert d["window"] == [10, 100] and d["slope"] == 0.5


def test_constant_factor_example():
    n = np.unique(np.geomspace(10, 1e4, 20).astype(int))
    est = SurvivalEstimate(n, np.minimum(1.0, 3 * n**-0.25), np.zeros(n.size), None, 0, int(n[-1]))
    assert fit_tail(est, (100, 10**4)).slope == pytest.approx(0.25, abs=1e-12)


def test_marginal_example():
    assert sandwich_verdict(_fit(0.41, 0.05), (0.4, 0.6)) is Sandwich.MARGINAL


# -- exact Bessel curve ------------------------------------------------------------

@pytest.fixture(scope="module")
def bessel_curve():
    from slowrec.models import BesselLikeWalk
    from slowrec.oracle import build_kernel, exact_survival
    kernel = build_kernel(BesselLikeWalk(-0.5), cap=50 + 20000).with_absorbing(10)
    return exact_survival(kernel, 50, 20000)


def _window_slope(curve, lo, hi):
    n = np.unique(np.rint(np.geomspace(lo, hi, 30)).astype(int))
    return fit_tail(curve.on_grid(n)).slope


@pytest.mark.slow
def test_bessel_exact_slope_example(bessel_curve):
    assert 0.2 <= _window_slope(bessel_curve, 1e3, 2e4) <= 0.3


@pytest.mark.slow
def test_bessel_late_windows_inside_bracket(bessel_curve):
    for lo, hi in ((1e3, 1e4), (2e3, 2e4)):
        assert 0.2 < _window_slope(bessel_curve, lo, hi) < 0.3


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="the exact curve overshoots 0.25 on the last window: "
                   "distances 0.19, 0.02, 0.04 are not monotone")
def test_bessel_window_shrinkage_monotone(bessel_curve):
    dist = [abs(_window_slope(bessel_curve, lo, hi) - 0.25)
            for lo, hi in ((1e2, 1e3), (1e3, 1e4), (2e3, 2e4))]
    assert dist[0] >= dist[1] >= dist[2]
