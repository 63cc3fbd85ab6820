"""Entropy of the segmentation posterior and selection of K by the criterion."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iclseg.check import random_instance
from iclseg.chmm import ChmmSpec, NumericalError, forward_backward, posteriors
from iclseg.emission import DataSeries, EmissionSpec
from iclseg.icl import IclTable, entropy, icl_for_k, select_k
from iclseg.oracle import brute_posterior, log_binom
from iclseg.seginit import dp_segment, params_from_changepoints
from iclseg.simulate import small_design


def counts(values):
    return DataSeries(np.array(values, dtype=float))


def posterior_for(values, rates, eta=0.5):
    data = counts(values)
    emission = EmissionSpec("poisson", np.array(rates, dtype=float))
    spec = ChmmSpec(n=data.n, k=emission.k, eta=eta, emission=emission)
    return posteriors(forward_backward(spec, data))


# ----------------------------------------------------------------- entropy


def test_entropy_zero_for_k1():
    assert entropy(posterior_for([3, 0, 2, 4], (2.0,))) == 0.0


def test_entropy_identical_parameters_hits_log_count():
    post = posterior_for([1, 4, 0, 2, 3, 1], (2.0, 2.0, 2.0))
    assert entropy(post) == pytest.approx(math.log(10.0), abs=1e-8)


def test_entropy_matches_enumeration():
    rng = np.random.default_rng(51)
    values = rng.poisson(np.repeat([1.0, 7.0, 2.0], [3, 4, 3])).astype(float)
    emission = EmissionSpec("poisson", np.array([1.0, 7.0, 2.0]))
    post = posterior_for(values, (1.0, 7.0, 2.0))
    ref = brute_posterior(DataSeries(values), emission, 3)
    assert entropy(post) == pytest.approx(ref.entropy, abs=1e-9)


@settings(max_examples=60)
@given(st.randoms(use_true_random=False))
def test_entropy_bounds(pyrandom):
    rng = np.random.default_rng(pyrandom.getrandbits(32))
    data, _, spec, k = random_instance(rng)
    cspec = ChmmSpec(n=data.n, k=k, eta=0.5, emission=spec)
    h = entropy(posteriors(forward_backward(cspec, data)))
    assert 0.0 <= h <= log_binom(data.n - 1, k - 1) + 1e-10


# --------------------------------------------------------------- icl_for_k


def test_icl_for_k_constant_k1():
    data = counts([2] * 10)
    init = dp_segment(data, "poisson", 1)
    rec = icl_for_k(data, 1, init, "poisson", log_prior_k=-math.log(4.0))
    assert rec.entropy == 0.0
    emission = params_from_changepoints(data, init.cps_for(1), "poisson")
    loglik = float(
        np.sum(data.values * math.log(emission.means[0]) - emission.means[0])
        - np.sum([math.lgamma(v + 1) for v in data.values])
    )
    assert rec.icl == pytest.approx(-loglik + math.log(4.0), abs=1e-10)
    assert rec.k == 1
    assert rec.map_cps.breakpoints == ()
    assert rec.init_method == "dp"
    assert rec.seconds >= 0.0


def test_sharp_two_level_prefers_k2():
    rng = np.random.default_rng(44)
    values = np.concatenate([rng.poisson(1.0, 30), rng.poisson(9.0, 30)])
    data = DataSeries(values.astype(float))
    init = dp_segment(data, "poisson", 3)
    recs = {k: icl_for_k(data, k, init, "poisson") for k in (1, 2, 3)}
    assert recs[2].icl < recs[3].icl
    assert recs[2].icl < recs[1].icl


def test_icl_matches_oracle_for_every_k():
    rng = np.random.default_rng(46)
    for _ in range(10):
        n = int(rng.integers(6, 13))
        values = rng.poisson(rng.uniform(0.5, 8.0), n).astype(float)
        data = DataSeries(values)
        k_max = 3
        table = select_k(data, k_max, family="poisson", init_method="dp")
        init = dp_segment(data, "poisson", k_max)
        log_prior_k = -math.log(k_max)
        for k in range(1, k_max + 1):
            emission = params_from_changepoints(data, init.cps_for(k), "poisson")
            ref = brute_posterior(data, emission, k, log_prior_k=log_prior_k)
            want_icl = ref.entropy - ref.log_joint
            rec = table.record_for(k)
            assert rec.icl == pytest.approx(want_icl, abs=1e-8)
            assert rec.entropy == pytest.approx(ref.entropy, abs=1e-8)
            assert rec.log_joint == pytest.approx(ref.log_joint, abs=1e-8)
        want_khat = min(range(1, k_max + 1), key=lambda k: table.record_for(k).icl)
        assert table.k_hat == want_khat


# ------------------------------------------------------------------ select_k


def test_select_k_table_shape():
    data = counts([1, 1, 1, 8, 8, 8, 8, 1, 1])
    table = select_k(data, 4, family="poisson")
    assert isinstance(table, IclTable)
    assert [rec.k for rec in table.records] == [1, 2, 3, 4]
    assert 1 <= table.k_hat <= 4
    with pytest.raises(ValueError):
        table.record_for(5)


def test_select_k_exact_tie_prefers_smaller_k():
    data = counts([3, 3])
    table = select_k(data, 2, family="poisson", eta=0.5)
    assert table.record_for(1).icl == table.record_for(2).icl
    assert table.k_hat == 1


def test_select_k_flat_design_picks_k1():
    for seed in range(5):
        data, _ = small_design(0.0, seed)
        table = select_k(data, 5, family="poisson")
        assert table.k_hat == 1


def test_select_k_strong_signal_picks_truth():
    data, design = small_design(9.0, 123)
    table = select_k(data, 10, family="poisson")
    assert table.k_hat == design.true_cps.k == 7


def test_select_k_validation():
    data = counts([1, 2, 3])
    with pytest.raises(ValueError):
        select_k(data, 0)
    with pytest.raises(ValueError):
        select_k(data, 4)
    with pytest.raises(ValueError):
        select_k(data, 2, init_method="genetic")


def test_overflowing_values_fail_as_numerical_error():
    data = DataSeries(np.array([0.0, 1e200, 0.0, 1.0]))
    with np.errstate(over="ignore"):
        with pytest.raises(NumericalError) as err:
            select_k(data, 2, family="normal")
    assert err.value.position == 1


def test_numerical_failure_carries_k_context(monkeypatch):
    def underflow(spec, data):
        raise NumericalError("synthetic underflow", position=3)

    monkeypatch.setattr("iclseg.icl.forward_backward", underflow)
    data = counts([1, 1, 9, 9, 1, 1])
    init = dp_segment(data, "poisson", 2)
    with pytest.raises(NumericalError) as err:
        icl_for_k(data, 2, init, "poisson")
    assert err.value.k == 2
    assert err.value.position == 3
