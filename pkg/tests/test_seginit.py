"""Initial segmentations: exact DP, pruned DP, binary segmentation, refits."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from iclseg.emission import EPS_RATE, EPS_VAR, DataSeries
from iclseg.oracle import brute_optimal_segmentation
from iclseg.seginit import (
    ChangePointSet,
    SegPath,
    binary_segmentation,
    dp_segment,
    params_from_changepoints,
)
from iclseg.simulate import small_design


def counts(values):
    return DataSeries(np.array(values, dtype=float))


def pois_seg_loglik(values):
    lam = max(float(np.mean(values)), EPS_RATE)
    return float(np.sum(stats.poisson.logpmf(values, lam)))


# --------------------------------------------------------- ChangePointSet


def test_changepointset_geometry():
    cps = ChangePointSet(6, (2, 5))
    assert cps.k == 3
    np.testing.assert_array_equal(cps.bounds(), [0, 2, 5, 6])
    np.testing.assert_array_equal(cps.segment_lengths(), [2, 3, 1])
    np.testing.assert_array_equal(cps.labels(), [0, 0, 1, 1, 1, 2])


def test_changepointset_validation():
    with pytest.raises(ValueError):
        ChangePointSet(0)
    with pytest.raises(ValueError):
        ChangePointSet(5, (0,))
    with pytest.raises(ValueError):
        ChangePointSet(5, (5,))
    with pytest.raises(ValueError):
        ChangePointSet(5, (3, 3))
    with pytest.raises(ValueError):
        ChangePointSet(5, (3, 2))


def test_segpath_accessors():
    path = dp_segment(counts([1, 1, 8, 8]), "poisson", 2)
    assert path.k_max == 2
    assert isinstance(path, SegPath)
    assert path.cps_for(2).k == 2
    with pytest.raises(ValueError):
        path.cps_for(0)
    with pytest.raises(ValueError):
        path.loglik_for(3)


# ----------------------------------------------------------------- exact DP


def test_dp_constant_series():
    path = dp_segment(counts([4] * 12), "poisson", 3)
    assert path.cps_for(1) == ChangePointSet(12)
    # All splits of a constant series tie; the DP keeps the lexicographically
    # smallest breakpoints, matching the brute-force oracle's convention.
    assert path.cps_for(2) == brute_optimal_segmentation(counts([4] * 12), "poisson", 2)
    assert path.cps_for(3) == brute_optimal_segmentation(counts([4] * 12), "poisson", 3)
    assert path.cps_for(2).breakpoints == (1,)
    assert path.cps_for(3).breakpoints == (1, 2)


def test_dp_k2_equals_exhaustive_split_scan():
    rng = np.random.default_rng(42)
    values = np.concatenate([rng.poisson(2.0, 6), rng.poisson(9.0, 4)]).astype(float)
    path = dp_segment(DataSeries(values), "poisson", 2)
    scan = [
        (pois_seg_loglik(values[:t]) + pois_seg_loglik(values[t:]), t)
        for t in range(1, 10)
    ]
    best_ll, best_t = max(scan, key=lambda pair: (pair[0], -pair[1]))
    assert path.cps_for(2).breakpoints == (best_t,)
    assert path.loglik_for(2) == pytest.approx(best_ll, abs=1e-9)


@settings(max_examples=50)
@given(
    st.lists(st.integers(0, 9), min_size=3, max_size=12),
    st.integers(1, 3),
)
def test_dp_matches_brute_force(values, k):
    data = counts(values)
    path = dp_segment(data, "poisson", k)
    assert path.cps_for(k) == brute_optimal_segmentation(data, "poisson", k)


def test_dp_loglik_nondecreasing_in_k():
    rng = np.random.default_rng(3)
    data = DataSeries(rng.poisson(3.0, 80).astype(float))
    for family in ("poisson", "normal"):
        path = dp_segment(data, family, 8)
        lls = [path.loglik_for(k) for k in range(1, 9)]
        assert all(b >= a - 1e-9 for a, b in zip(lls, lls[1:]))


def test_dp_recovers_small_design_breakpoints():
    truth = np.array([22, 65, 108, 219, 252, 435])
    hits = 0
    for seed in range(20):
        data, _ = small_design(9.0, seed)
        got = np.array(dp_segment(data, "poisson", 7).cps_for(7).breakpoints)
        if np.all(np.abs(got - truth) <= 2):
            hits += 1
    assert hits >= 18


# ---------------------------------------------------------------- pruned DP


def test_pruned_backend_matches_exact():
    rng = np.random.default_rng(14)
    means = np.repeat([1.0, 7.0, 3.0, 12.0], 150)
    data = DataSeries(rng.poisson(means).astype(float))
    exact = dp_segment(data, "poisson", 8, backend="exact")
    pruned = dp_segment(data, "poisson", 8, backend="pruned")
    for k in range(1, 9):
        assert pruned.cps_for(k) == exact.cps_for(k)
        assert pruned.loglik_for(k) == pytest.approx(exact.loglik_for(k), rel=1e-10)


def test_auto_backend_prunes_long_poisson_series():
    rng = np.random.default_rng(15)
    means = np.repeat([2.0, 10.0], 1_250)
    data = DataSeries(rng.poisson(means).astype(float))
    auto = dp_segment(data, "poisson", 4)
    exact = dp_segment(data, "poisson", 4, backend="exact")
    for k in range(1, 5):
        assert auto.cps_for(k) == exact.cps_for(k)


# ----------------------------------------------------- binary segmentation


def test_binseg_single_jump():
    values = [1] * 20 + [9] * 20
    path = binary_segmentation(counts(values), "poisson", 3)
    assert path.cps_for(2).breakpoints == (20,)


def test_binseg_constant_series_still_emits_every_k():
    path = binary_segmentation(counts([5] * 15), "poisson", 4)
    assert path.k_max == 4
    for k in range(1, 5):
        assert path.cps_for(k).k == k


def test_binseg_is_nested():
    rng = np.random.default_rng(23)
    data = DataSeries(rng.poisson(np.repeat([1.0, 5.0, 2.0, 8.0], 30)).astype(float))
    path = binary_segmentation(data, "poisson", 6)
    for k in range(1, 6):
        smaller = set(path.cps_for(k).breakpoints)
        bigger = set(path.cps_for(k + 1).breakpoints)
        assert smaller <= bigger


def test_binseg_k2_equals_dp_k2():
    rng = np.random.default_rng(29)
    for _ in range(10):
        data = DataSeries(rng.poisson(rng.uniform(1.0, 8.0), 40).astype(float))
        bs = binary_segmentation(data, "poisson", 2)
        dp = dp_segment(data, "poisson", 2)
        assert bs.cps_for(2) == dp.cps_for(2)


def test_dp_loglik_dominates_binseg():
    rng = np.random.default_rng(37)
    for _ in range(10):
        means = np.repeat(rng.uniform(0.5, 10.0, size=5), 24)
        data = DataSeries(rng.poisson(means).astype(float))
        dp = dp_segment(data, "poisson", 6)
        bs = binary_segmentation(data, "poisson", 6)
        for k in range(1, 7):
            assert dp.loglik_for(k) >= bs.loglik_for(k) - 1e-9


# --------------------------------------------------------------- refitting


def test_params_from_changepoints_two_level():
    data = counts([1, 1, 1, 9, 9, 9])
    spec = params_from_changepoints(data, ChangePointSet(6, (3,)), "poisson")
    np.testing.assert_allclose(spec.means, [1.0, 9.0])


def test_params_from_changepoints_k1():
    data = counts([1, 2, 3])
    spec = params_from_changepoints(data, ChangePointSet(3), "poisson")
    np.testing.assert_allclose(spec.means, [2.0])


def test_params_from_changepoints_recomputes_segment_means():
    rng = np.random.default_rng(19)
    values = rng.poisson(4.0, 30).astype(float)
    cps = ChangePointSet(30, (7, 11, 26))
    spec = params_from_changepoints(DataSeries(values), cps, "poisson")
    bounds = cps.bounds()
    for k, (a, b) in enumerate(zip(bounds, bounds[1:])):
        assert spec.means[k] == pytest.approx(max(values[a:b].mean(), EPS_RATE))


def test_params_from_changepoints_normal_shared_variance():
    rng = np.random.default_rng(20)
    values = rng.normal(0.0, 2.0, 40)
    values[20:] += 6.0
    data = DataSeries(values)
    cps = ChangePointSet(40, (20,))
    spec = params_from_changepoints(data, cps, "normal")
    assert spec.shared_variance
    assert np.all(spec.variances == spec.variances[0])
    fitted = np.where(np.arange(40) < 20, values[:20].mean(), values[20:].mean())
    want = max(float(np.mean((values - fitted) ** 2)), EPS_VAR)
    assert spec.variances[0] == pytest.approx(want)
    forced = params_from_changepoints(data, cps, "normal", variance=2.5)
    assert np.all(forced.variances == 2.5)
    per_seg = params_from_changepoints(data, cps, "normal", shared_variance=False)
    assert not per_seg.shared_variance


def test_params_from_changepoints_negbin_dispersion_passthrough():
    data = counts([0, 3, 1, 12, 9, 14])
    cps = ChangePointSet(6, (3,))
    spec = params_from_changepoints(data, cps, "negbin", dispersion=7.0)
    assert spec.dispersion == 7.0
    fitted = params_from_changepoints(data, cps, "negbin")
    assert fitted.dispersion is not None and fitted.dispersion > 0.0


def test_params_from_changepoints_length_mismatch():
    with pytest.raises(ValueError):
        params_from_changepoints(counts([1, 2]), ChangePointSet(3), "poisson")


def test_negbin_two_stage_dispersion_lands_on_path():
    rng = np.random.default_rng(41)
    phi = 2.0
    seg1 = rng.negative_binomial(phi, phi / (phi + 3.0), size=120)
    seg2 = rng.negative_binomial(phi, phi / (phi + 15.0), size=120)
    data = DataSeries(np.concatenate([seg1, seg2]).astype(float))
    path = dp_segment(data, "negbin", 4)
    assert path.dispersion is not None
    assert 0.0 < path.dispersion < 100.0
    forced = dp_segment(data, "negbin", 4, dispersion=7.0)
    assert forced.dispersion == 7.0
    bs = binary_segmentation(data, "negbin", 4)
    assert bs.dispersion is not None and bs.dispersion > 0.0


# -------------------------------------------------------------- validation


def test_init_argument_validation():
    data = counts([1, 2, 3, 4])
    with pytest.raises(ValueError):
        dp_segment(data, "poisson", 0)
    with pytest.raises(ValueError):
        dp_segment(data, "poisson", 5)
    with pytest.raises(ValueError):
        dp_segment(data, "gamma", 2)
    with pytest.raises(ValueError):
        dp_segment(data, "poisson", 2, backend="gpu")
    with pytest.raises(ValueError):
        binary_segmentation(data, "poisson", 9)
    with pytest.raises(ValueError):
        dp_segment(DataSeries(np.array([1.5, 2.0])), "poisson", 1)
