import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import poisson

from slowrec.errors import CapError, ConfigError, SchemaError
from slowrec.models import (BesselLikeWalk, CriticalGWI, NonMarkovR, PowerDriftLattice,
                            StateDepGW, base_law)
from slowrec.oracle import (TruncatedKernel, birth_death_kernel, build_kernel,
                            exact_survival, from_dense, invariant_measure, tv_decay)


def _dense_row(kernel, x):
    out = np.zeros(kernel.cap + 1)
    for j, p in kernel.row(x).items():
        out[j] = p
    return out


# -- kernels ------------------------------------------------------------------------

def test_bessel_row_example():
    k = build_kernel(BesselLikeWalk(-0.5), cap=20)
    assert k.row(1) == pytest.approx({0: 0.375, 2: 0.625})
    assert k.row(0) == {1: 1.0}


def test_gwi_row_zero_is_immigration_law():
    k = build_kernel(CriticalGWI(0.5), cap=60)
    row = _dense_row(k, 0)
    np.testing.assert_allclose(row[:40], poisson.pmf(np.arange(40), 0.5), atol=1e-15)


def test_gwi_row_one_mass_at_zero():
    k = build_kernel(CriticalGWI(0.5), cap=60)
    assert k.row(1)[0] == pytest.approx(0.5 * np.exp(-0.5), abs=1e-12)


@pytest.mark.parametrize("offspring", ["geometric", "poisson"])
@pytest.mark.parametrize("x", [2, 7, 23])
def test_gwi_rows_match_naive_convolution(offspring, x):
    model = CriticalGWI(0.4, offspring=offspring)
    cap = 400
    k = build_kernel(model, cap=cap, needed=range(0, 30))
    pmf = model.offspring_pmf(cap + 1)
    ref = poisson.pmf(np.arange(cap + 1), 0.4)
    for _ in range(x):
        ref = np.convolve(ref, pmf)[:cap + 1]
    got = _dense_row(k, x)
    np.testing.assert_allclose(got, ref, atol=1e-12)


@pytest.mark.parametrize("x", [1, 3, 12, 80])
def test_state_dep_row_moments(x):
    model = StateDepGW(0.3, 1.2)
    k = build_kernel(model, cap=2000, needed=range(0, 100))
    row = _dense_row(k, x)
    j = np.arange(row.size)
    mean = row @ j
    var = row @ (j - mean) ** 2
    assert mean == pytest.approx(x + model.g(x), abs=1e-9)
    assert var == pytest.approx(model.variance(x), rel=1e-9)


def test_state_dep_row_small_case_by_enumeration():
    # x = 2 individuals: each has base-law children plus Bernoulli(0.15) extra
    model = StateDepGW(0.3, 1.2)
    m, p0, p1, pm = base_law(1.2)
    single = {}
    for kids, pk in ((0, p0), (1, p1), (m, pm)):
        for extra, pe in ((0, 0.85), (1, 0.15)):
            single[kids + extra] = single.get(kids + extra, 0.0) + pk * pe
    ref = {}
    for (a, pa), (b, pb) in itertools.product(single.items(), repeat=2):
        ref[a + b] = ref.get(a + b, 0.0) + pa * pb
    k = build_kernel(model, cap=50, needed=range(0, 5))
    assert k.row(2) == pytest.approx(ref, abs=1e-14)


def test_lattice_row_moments():
    model = PowerDriftLattice(0.25, 0.5, 1.0)
    for x in (5, 50, 500):
        h, up, down = model.row(x)
        assert 0 <= up and 0 <= down and up + down <= 1
        assert h * (up - down) == pytest.approx(model.g(x), rel=1e-12)
        assert h * h * (up + down) == pytest.approx(model.variance(x) + model.g(x) ** 2, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(model=st.one_of(
    st.builds(BesselLikeWalk, st.floats(-0.95, 0.0)),
    st.builds(CriticalGWI, st.floats(0.05, 3.0), st.sampled_from(["geometric", "poisson"])),
    st.builds(StateDepGW, st.floats(0.05, 2.0), st.floats(0.1, 4.0)),
    st.builds(PowerDriftLattice, st.floats(0.05, 1.0), st.floats(-0.9, 0.9), st.floats(0.2, 3.0),
              st.just(300)),
), cap=st.integers(120, 300))
def test_rows_stochastic_with_overflow(model, cap):
    try:
        k = build_kernel(model, cap=cap)
    except CapError:
        return
    assert k.row_sum_error() <= 1e-12
    assert np.all(k.overflow >= 0)


def test_build_kernel_rejects_other_families():
    with pytest.raises((TypeError, ConfigError)):
        build_kernel(NonMarkovR(4.0), cap=10)


def test_cap_too_small():
    with pytest.raises(CapError):
        build_kernel(CriticalGWI(5.0), cap=4)


def test_overflow_flagging():
    k = build_kernel(CriticalGWI(0.5), cap=200)
    assert k.overflow[-1] > 1e-9 and k.cap in k.flagged
    assert 0 not in k.flagged


def test_kernel_save_load_round_trip(tmp_path):
    k = build_kernel(CriticalGWI(0.5), cap=40).with_absorbing(2)
    k.save(tmp_path / "k.csv")
    back = TruncatedKernel.load(tmp_path / "k.csv")
    assert (back.P != k.P).nnz == 0
    np.testing.assert_array_equal(back.overflow, k.overflow)
    np.testing.assert_array_equal(back.absorbing, k.absorbing)
    head = json.loads((tmp_path / "k.json").read_text())
    head["overflow"][3] += 1e-3
    (tmp_path / "k.json").write_text(json.dumps(head))
    with pytest.raises(SchemaError):
        TruncatedKernel.load(tmp_path / "k.csv")


# -- survival ----------------------------------------------------------------------

def _enumerated_survival(n):
    alive = 0
    for signs in itertools.product((-1, 1), repeat=n):
        walk = 1 + np.cumsum(signs)
        alive += bool(np.all(walk > 0))
    return alive / 2**n


def test_exact_survival_symmetric_walk():
    k = build_kernel(BesselLikeWalk(0.0), cap=40).with_absorbing(0)
    ex = exact_survival(k, 1, 12)
    np.testing.assert_allclose(ex.surv[:4], [1.0, 0.5, 0.5, 0.375], atol=1e-15)
    for n in range(1, 13):
        assert ex.surv[n] == pytest.approx(_enumerated_survival(n), abs=1e-14)


def test_exact_survival_monotone_and_bounded():
    k = build_kernel(BesselLikeWalk(-0.5), cap=600).with_absorbing(10)
    ex = exact_survival(k, 50, 500)
    assert ex.surv[0] == 1.0
    assert np.all(np.diff(ex.surv) <= 0) and np.all(ex.surv <= 1)
    assert ex.error_bound[-1] == 0.0


def test_exact_survival_cap_error():
    k = build_kernel(BesselLikeWalk(-0.5), cap=60).with_absorbing(10)
    with pytest.raises(CapError):
        exact_survival(k, 50, 2000, accuracy=1e-6)


def test_exact_survival_input_errors():
    k = build_kernel(BesselLikeWalk(-0.5), cap=60)
    with pytest.raises(ConfigError):
        exact_survival(k, 5, 10)
    with pytest.raises(ConfigError):
        exact_survival(k.with_absorbing(10), 3, 10)


# -- stationarity and TV ----------------------------------------------------------

def test_invariant_birth_death_detailed_balance():
    cap = 80
    k = birth_death_kernel(0.3, cap)
    im = invariant_measure(k, tol=1e-12)
    ref = (3 / 7) ** np.arange(cap + 1)
    ref /= ref.sum()
    np.testing.assert_allclose(im.pi, ref, atol=1e-10)
    flow_up = im.pi[:-1] * 0.3
    flow_down = im.pi[1:] * 0.7
    np.testing.assert_allclose(flow_up, flow_down, atol=1e-10)
    assert im.residual <= 1e-12


def test_invariant_identical_rows():
    q = np.array([0.1, 0.2, 0.3, 0.4])
    k = from_dense(np.tile(q, (4, 1)))
    im = invariant_measure(k, tol=1e-14)
    np.testing.assert_allclose(im.pi, q, atol=1e-14)
    tv = tv_decay(k, im, 0, [1, 2, 5])
    np.testing.assert_allclose(tv.tv, 0.0, atol=1e-15)


def test_invariant_lattice_fixture_certificate():
    k = build_kernel(PowerDriftLattice(0.25, 0.7, 1.0, cap=10**4), cap=10**4)
    im = invariant_measure(k, tol=1e-10)
    assert im.residual <= 1e-10
    assert float(k.overflow.sum()) < 1e-6 and im.error_bound < 1e-6


def test_tv_birth_death_non_increasing():
    k = birth_death_kernel(0.3, 60)
    im = invariant_measure(k, tol=1e-12)
    tv = tv_decay(k, im, 20, [1, 5, 10, 20, 40, 80, 160])
    assert np.all(np.diff(tv.tv) <= 1e-15)
    rows = list(tv.rows())
    assert rows[0][0] == 1 and rows[0][3] is None


def test_tv_rejects_bad_grid():
    k = birth_death_kernel(0.3, 10)
    with pytest.raises(ConfigError):
        tv_decay(k, invariant_measure(k), 0, [5, 3])
