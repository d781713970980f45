import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from recurrent_pvar.errors import InputFormatError
from recurrent_pvar.estimators import mu_ipcw_censored
from recurrent_pvar.process import Sample
from recurrent_pvar.pseudo import conditional_unbiasedness_check, pseudo_values
from recurrent_pvar.sim import draw_latent, rng_for
from recurrent_pvar.truth import TruthSpec

from conftest import dataset_a, dataset_b
from test_estimators import samples


def test_dataset_a_by_hand():
    # leaving out subject 1 leaves subject 2 (event at 2, C=2, K=1): mu = 1;
    # leaving out subject 2 leaves subject 1 (event at 1, C=4): mu = 1
    ps = pseudo_values(dataset_a(), 2.0, "ipcw_observed")
    assert ps.full_estimate == 1.0
    np.testing.assert_array_equal(ps.values, [2 * 1.0 - 1.0, 2 * 1.0 - 1.0])
    assert ps.ids == ("1", "2")


def test_dataset_b_censored_kind():
    b = dataset_b()
    ps = pseudo_values(b, 1.5, "ipcw_censored")
    loo = []
    for i in range(3):
        loo.append(mu_ipcw_censored(b.drop(i), 1.5, [1.5]).mu_grid[0])
    np.testing.assert_allclose(ps.values, 3 * (5 / 6) - 2 * np.array(loo), rtol=1e-12)


@given(samples("censored"), st.sampled_from([0.5, 1.0, 2.0, 3.0]))
def test_property_uncensored_kind_returns_outcomes(sample, t):
    if sample.n < 2:
        return
    ps = pseudo_values(sample, t, "uncensored")
    # n mu - (n - 1) mu_loo: two rounded divisions, so within 2 ulp of n mu
    tol = 2 * np.finfo(float).eps * sample.n * max(ps.full_estimate, 1e-300)
    np.testing.assert_allclose(ps.values, sample.counts_at(t), rtol=0, atol=tol)
    assert np.mean(ps.values) == pytest.approx(ps.full_estimate, rel=1e-15, abs=1e-15)


def test_observed_kind_without_early_followup_equals_uncensored(rng):
    latent = draw_latent(TruthSpec(1.0), 40, rng)
    sample = Sample("observed", np.full(40, 6.0), latent.event_owner, latent.event_time)
    a = pseudo_values(sample, 2.0, "ipcw_observed")
    b = pseudo_values(sample, 2.0, "uncensored")
    np.testing.assert_array_equal(a.values, b.values)
    c = pseudo_values(sample.with_design("censored"), 2.0, "ipcw_censored")
    np.testing.assert_array_equal(c.values, b.values)


def test_errors(sample_a):
    with pytest.raises(InputFormatError):
        pseudo_values(sample_a, 2.0, "jackknife")
    with pytest.raises(InputFormatError):
        pseudo_values(Sample("observed", [1.0], [], []), 0.5, "ipcw_observed")
    with pytest.raises(InputFormatError, match="covariate"):
        conditional_unbiasedness_check(sample_a, 2.0, "ipcw_observed", TruthSpec(1.0))


def test_uncensored_groups_match_outcome_means():
    truth = TruthSpec(1.0, 0.0, 0.3, 5.0, z_prob=0.5, z_multiplier=2.0)
    latent = draw_latent(truth, 300, rng_for(2, 21))
    sample = latent.observe("censored")
    rep = conditional_unbiasedness_check(sample, 2.0, "ipcw_censored", truth)
    n2 = sample.counts_at(2.0)
    for g in rep.groups:
        assert g.mean == pytest.approx(n2[sample.z == g.z].mean(), rel=1e-12)


def test_symmetric_scenario_has_equal_group_truths():
    truth = TruthSpec(1.0, 0.5, 0.3, 5.0, z_prob=0.5, z_multiplier=1.0)
    sample = draw_latent(truth, 200, rng_for(2, 22)).observe("censored")
    rep = conditional_unbiasedness_check(sample, 2.0, "ipcw_censored", truth)
    assert rep.groups[0].truth == rep.groups[1].truth
