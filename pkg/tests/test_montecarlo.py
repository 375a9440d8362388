import numpy as np
import pytest

from slowrec.errors import ConfigError
from slowrec.models import BesselLikeWalk, CriticalGWI, PowerDriftChain, TrajectoryConfig
from slowrec.montecarlo import (MIN_DRIFT_SAMPLES, SurvivalEstimate, Verdict,
                                agreement_with_exact, check_drift_power,
                                check_drift_transformed, default_grid, estimate_survival,
                                hitting_times, locate_drift_threshold, sign_verdict,
                                survival_from_times)
from slowrec.oracle import build_kernel, exact_survival
from slowrec.transforms import DriftSpec, make_engine

ZERO_NOISE = PowerDriftChain(1.0, 0.0, 0.0)


def test_default_grid_shape():
    g = default_grid(20000)
    assert g[0] == 10 and g[-1] == 20000 and len(g) == 40
    assert np.all(np.diff(g) > 0)
    assert default_grid(5)[-1] == 5


def test_zero_noise_survival_is_one():
    est = estimate_survival(ZERO_NOISE, TrajectoryConfig(10, 5, 200), 500, [1, 10, 200])
    np.testing.assert_array_equal(est.surv, 1.0)
    assert est.censored == 500 and est.censored_fraction == 1.0
    np.testing.assert_array_equal(est.ci_half_width, 0.0)


def test_symmetric_walk_survival_small():
    est = estimate_survival(BesselLikeWalk(0.0), TrajectoryConfig(1, 0, 3), 200000, [1, 2, 3])
    np.testing.assert_allclose(est.surv, [0.5, 0.5, 0.375], atol=0.004)


def test_survival_invariants_and_ci():
    est = estimate_survival(BesselLikeWalk(-0.5), TrajectoryConfig(20, 5, 3000, seed=2), 5000)
    assert np.all(np.diff(est.surv) <= 0)
    assert np.all((est.surv >= 0) & (est.surv <= 1))
    p = est.surv
    np.testing.assert_allclose(est.ci_half_width, 1.96 * np.sqrt(p * (1 - p) / 5000))
    assert np.array_equal(est.survivors, np.rint(est.surv * 5000).astype(int))


def test_thread_count_does_not_change_results():
    model = BesselLikeWalk(-0.5)
    cfg = TrajectoryConfig(30, 5, 4000, seed=5)
    a = estimate_survival(model, cfg, 9000, n_threads=1)
    b = estimate_survival(model, cfg, 9000, n_threads=4)
    assert a.to_csv_text() == b.to_csv_text() and a.fingerprint == b.fingerprint
    ta = hitting_times(model, cfg, 9000, 1)
    tb = hitting_times(model, cfg, 9000, 3)
    assert np.array_equal(ta, tb)


def test_streams_are_per_trajectory():
    model = BesselLikeWalk(-0.5)
    cfg = TrajectoryConfig(30, 5, 4000, seed=5)
    short = hitting_times(model, cfg, 100)
    long = hitting_times(model, cfg, 3000)
    assert np.array_equal(short, long[:100])


def test_seed_changes_results():
    model = BesselLikeWalk(-0.5)
    a = estimate_survival(model, TrajectoryConfig(30, 5, 2000, seed=1), 3000)
    b = estimate_survival(model, TrajectoryConfig(30, 5, 2000, seed=2), 3000)
    assert a.to_csv_text() != b.to_csv_text() and a.fingerprint != b.fingerprint


@pytest.mark.parametrize("grid", [[], [3, 2], [0, 5], [5, 10**6]])
def test_grid_validation(grid):
    with pytest.raises(ConfigError):
        estimate_survival(BesselLikeWalk(-0.5), TrajectoryConfig(30, 5, 100), 10, grid)


def test_survival_from_times_counts_censored_as_alive():
    taus = np.array([1, 3, 5, -1, -1])
    est = survival_from_times(taus, [1, 2, 5, 10], 10)
    np.testing.assert_allclose(est.surv, [0.8, 0.8, 0.4, 0.4])
    assert est.censored == 2


def test_csv_schema():
    est = SurvivalEstimate.from_counts([1, 2], [5, 3], 10, 1, 2)
    lines = est.to_csv_text().splitlines()
    assert lines[0] == "n,surv,ci_half,trajectories,censored"
    assert lines[1].startswith("1,0.5,")


def test_mc_agrees_with_exact_oracle_small():
    model = BesselLikeWalk(-0.5)
    cfg = TrajectoryConfig(20, 5, 2000, seed=4)
    est = estimate_survival(model, cfg, 20000)
    k = build_kernel(model, cap=20 + 2000).with_absorbing(5)
    exact = exact_survival(k, 20, 2000).surv[est.n_grid]
    assert agreement_with_exact(est, exact).mean() >= 0.95


def test_agreement_handles_all_survived_points():
    est = SurvivalEstimate.from_counts([1, 2], [100, 90], 100, 0, 2)
    ok = agreement_with_exact(est, np.array([1.0 - 1e-17, 0.9]))
    assert ok.all()


# -- drift checks ------------------------------------------------------------------

def test_sign_verdict():
    assert sign_verdict(-1.0, 0.1) is Verdict.NEGATIVE
    assert sign_verdict(1.0, 0.1) is Verdict.POSITIVE
    assert sign_verdict(0.1, 0.1) is Verdict.INCONCLUSIVE


@pytest.mark.parametrize("alpha, verdict", [(0.3, Verdict.NEGATIVE), (0.7, Verdict.POSITIVE)])
def test_power_drift_signs(alpha, verdict):
    rep = check_drift_power(PowerDriftChain(0.25, 0.0, 1.0), alpha, [1e3], 10**6, seed=0)
    assert rep.verdicts == [verdict] and rep.samples >= MIN_DRIFT_SAMPLES


def test_power_drift_zero_noise_exact():
    rep = check_drift_power(PowerDriftChain(0.5, 0.3, 0.0), 0.4, [10.0, 100.0], 10**5)
    expected = [(x + 0.5 * x**0.3) ** 0.4 - x**0.4 for x in (10.0, 100.0)]
    np.testing.assert_allclose(rep.mean, expected, rtol=1e-12)
    assert rep.verdicts == [Verdict.POSITIVE] * 2


def test_transformed_check_zero_noise():
    model = PowerDriftChain(1.0, 0.0, 0.0)
    rep = check_drift_transformed(model, make_engine(model.drift()), [1e2, 1e3, 1e4], 10**5)
    np.testing.assert_allclose(rep.mean, 1.0, atol=1e-9)
    np.testing.assert_allclose(rep.mean2 / rep.y, 2.0 + 1.0 / rep.y, rtol=1e-9)
    assert rep.C == 0.0 and rep.lower_uniform and rep.upper_uniform


def test_transformed_check_power_half():
    model = PowerDriftChain(0.25, 0.5, 1.0)
    rep = check_drift_transformed(model, make_engine(model.drift()), [1e2, 1e3, 1e4], 10**6)
    assert np.isfinite(rep.C) and np.isfinite(rep.D)
    assert np.all(rep.mean >= -rep.C - 1e-12)
    assert np.all(rep.mean2 <= rep.D * rep.y + 1e-9)
    assert rep.lower_uniform and rep.upper_uniform
    d = rep.to_dict()
    assert set(d) >= {"C", "D", "G", "mean_sq", "verdict"}


def test_transformed_check_bessel_tabulated():
    model = BesselLikeWalk(-0.5)
    x = np.geomspace(1.0, 1e4, 40)
    engine = make_engine(DriftSpec.tabulated(x, model.g(x)))
    rep = check_drift_transformed(model, engine, [1e2, 1e3, 1e4], 10**6)
    assert rep.lower_uniform and rep.upper_uniform


def test_locate_threshold():
    x = locate_drift_threshold(PowerDriftChain(0.25, 0.0, 1.0), decades=(1, 2, 3), samples=10**6)
    assert x in (10.0, 100.0, 1000.0)
    assert locate_drift_threshold(PowerDriftChain(1.0, 0.0, 0.0)) is None


def test_gwi_hitting_times_reproducible_across_threads():
    model = CriticalGWI(0.5)
    cfg = TrajectoryConfig(50, 5, 3000, seed=0)
    assert np.array_equal(hitting_times(model, cfg, 3000, 1), hitting_times(model, cfg, 3000, 2))
