import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from recurrent_pvar.errors import InputFormatError, RiskSetError
from recurrent_pvar.estimators import (
    asymptotic_variance_oracle,
    censoring_hazard_and_khat,
    estimate,
    influence_at_truth,
    k_hat_observed,
    mean_uncensored,
    mu_functional,
    mu_ipcw_censored,
    mu_ipcw_observed,
)
from recurrent_pvar.process import CountingPath, Sample
from recurrent_pvar.sim import draw_latent, rng_for
from recurrent_pvar.truth import TruthSpec

from conftest import dataset_a, dataset_b


@st.composite
def samples(draw, design="censored", max_n=7):
    """Small samples on a coarse time lattice so ties are common."""
    n = draw(st.integers(1, max_n))
    lattice = st.sampled_from([0.5, 1.0, 1.5, 2.0, 2.5, 3.0])
    follow = [draw(lattice) for _ in range(n)]
    status = [draw(st.integers(0, 1)) if design == "censored" else 1 for _ in range(n)]
    owner, times = [], []
    for i, c in enumerate(follow):
        for _ in range(draw(st.integers(0, 3))):
            owner.append(i)
            times.append(draw(st.sampled_from([t for t in (0.5, 1.0, 1.5, 2.0, 2.5, 3.0) if t <= c])))
    return Sample(design, follow, owner, times, status)


def column_sums_ok(curve):
    return np.all(np.abs(curve.influence.sum(axis=0)) <= 1e-10 * curve.n)


# -- fixtures ------------------------------------------------------------------------


def test_dataset_a_fixture():
    a = dataset_a()
    assert [k_hat_observed(a, s) for s in (1.0, 2.0, 3.0)] == [1.0, 1.0, 0.5]
    curve = mu_ipcw_observed(a, 3.0)
    assert list(curve.grid) == [1.0, 2.0, 3.0]
    assert curve.mu_at(1.0) == 0.5 and curve.mu_at(2.0) == 1.0
    assert list(curve.k_hat_at(np.array([1.0, 2.0, 3.0]))) == [1.0, 1.0, 0.5]
    assert column_sums_ok(curve)
    np.testing.assert_allclose(curve.variance, np.mean(curve.influence**2, axis=0), rtol=0, atol=0)


def test_dataset_b_fixture():
    b = dataset_b()
    lam, k_hat = censoring_hazard_and_khat(b, 3.5)
    assert list(lam.times) == [1.0, 3.0]
    np.testing.assert_allclose(lam.jumps, [1 / 3, 1.0], rtol=1e-12)
    np.testing.assert_allclose([k_hat(2.0), k_hat(3.0), k_hat(3.5)], [2 / 3, 2 / 3, 0.0], rtol=1e-12, atol=1e-12)
    curve = mu_ipcw_censored(b, 2.5)
    np.testing.assert_allclose(curve.mu_at(np.array([0.5, 1.5])), [1 / 3, 5 / 6], rtol=1e-12)
    np.testing.assert_allclose(curve.k_hat_at(np.array([1.0, 2.0])), [1.0, 2 / 3], rtol=1e-12)
    assert column_sums_ok(curve)


def test_mean_uncensored_fixtures():
    curve = mean_uncensored([CountingPath((1.0, 3.0)), CountingPath((2.0,))], 3.0)
    assert curve.mu_at(2.0) == 1.0
    np.testing.assert_array_equal(curve.k_hat_at(curve.grid), 1.0)
    assert column_sums_ok(curve)
    single = mean_uncensored([CountingPath((0.5, 1.0))], 2.0)
    np.testing.assert_array_equal(single.variance, 0.0)


def test_design_and_grid_checks(sample_a, sample_b):
    with pytest.raises(InputFormatError):
        mu_ipcw_censored(sample_a, 3.0)
    with pytest.raises(InputFormatError):
        mu_ipcw_observed(sample_b, 3.0)
    for grid in ([], [1.0, 0.5], [4.0]):
        with pytest.raises(ValueError):
            mu_ipcw_observed(sample_a, 3.0, grid)
    with pytest.raises(ValueError):
        mu_ipcw_observed(sample_a, math.inf)


def test_risk_set_guard():
    # unreachable from validated data; bypass validation to exercise the guard
    bad = Sample("censored", [1.0, 1.0], [0], [2.0], status=[1, 1], validate=False)
    with pytest.raises(RiskSetError, match="insufficient follow-up"):
        mu_ipcw_censored(bad, 3.0)


# -- reductions and structural properties -----------------------------------------------


@given(samples("observed"), st.sampled_from([1.0, 2.0, 3.0]))
def test_property_censored_with_all_d_one_equals_observed(sample, horizon):
    obs = mu_ipcw_observed(sample, horizon)
    cen = mu_ipcw_censored(sample.with_design("censored"), horizon)
    np.testing.assert_array_equal(obs.grid, cen.grid)
    np.testing.assert_allclose(cen.mu_grid, obs.mu_grid, rtol=1e-12, atol=0)
    np.testing.assert_allclose(cen.influence, obs.influence, rtol=1e-9, atol=1e-12)


def test_reductions_exact(rng):
    for _ in range(50):
        latent = draw_latent(TruthSpec(1.0, 0.5), 30, rng)
        obs = latent.observe("observed")
        cen = obs.with_design("censored")
        a, b = mu_ipcw_observed(obs, 2.0), mu_ipcw_censored(cen, 2.0)
        # product-limit and empirical-count survivors agree up to rounding
        np.testing.assert_allclose(b.mu_grid, a.mu_grid, rtol=1e-14, atol=0)
        late = Sample("observed", np.maximum(obs.followup, 5.0), latent.event_owner,
                      latent.event_time, validate=True)
        full = Sample("uncensored", np.full(30, math.inf), latent.event_owner, latent.event_time)
        np.testing.assert_array_equal(mu_ipcw_observed(late, 5.0).mu_grid, mean_uncensored(full, 5.0).mu_grid)


@given(samples("observed"))
def test_property_khat_equivalence(sample):
    cen = sample.with_design("censored")
    _, k_km = censoring_hazard_and_khat(cen, 3.0)
    s = np.linspace(0.0, 3.0, 31)
    np.testing.assert_allclose(k_km(s), k_hat_observed(sample, s), rtol=1e-12, atol=1e-15)


@given(samples("censored"), st.sampled_from([1.0, 2.0, 3.0]))
def test_property_censored_structure(sample, horizon):
    curve = mu_ipcw_censored(sample, horizon)
    assert np.all(np.diff(curve.mu_grid) >= 0) and curve.mu_at(0.0) == 0.0
    assert np.all((curve.lambda_hat.jumps > 0) & (curve.lambda_hat.jumps <= 1))
    k = curve.k_hat_at(np.linspace(0, horizon, 50))
    assert np.all((k >= 0) & (k <= 1)) and np.all(np.diff(k) <= 0) and k[0] == 1.0
    assert column_sums_ok(curve)
    np.testing.assert_allclose(curve.variance, np.mean(curve.influence**2, axis=0), rtol=1e-15)


@given(samples("observed"), st.sampled_from([1.0, 2.0, 3.0]))
def test_property_observed_centering(sample, horizon):
    assert column_sums_ok(mu_ipcw_observed(sample, horizon))


def _fd_influence(sample, horizon, grid, eps=1e-6):
    n = sample.n
    out = np.empty((n, grid.size))
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        up = mu_functional(sample, (1 - eps) / n + eps * e, horizon, grid)
        down = mu_functional(sample, (1 + eps) / n - eps * e, horizon, grid)
        out[i] = (up - down) / (2 * eps)
    return out


@given(samples("censored"))
def test_property_influence_matches_finite_differences_censored(sample):
    curve = mu_ipcw_censored(sample, 3.0)
    np.testing.assert_allclose(curve.influence, _fd_influence(sample, 3.0, curve.grid), rtol=1e-5, atol=1e-6)


@given(samples("observed"))
def test_property_influence_matches_finite_differences_observed(sample):
    curve = mu_ipcw_observed(sample, 3.0)
    np.testing.assert_allclose(curve.influence, _fd_influence(sample, 3.0, curve.grid), rtol=1e-5, atol=1e-6)


def test_influence_matches_finite_differences_simulated(rng):
    truth = TruthSpec(1.0, 0.5, 0.3, 5.0)
    latent = draw_latent(truth, 25, rng)
    for design in ("observed", "censored"):
        sample = latent.observe(design)
        grid = np.array([0.5, 1.0, 2.0, 3.0])
        curve = estimate(sample, 3.0, grid)
        np.testing.assert_allclose(curve.influence, _fd_influence(sample, 3.0, grid), rtol=1e-5, atol=1e-6)


# -- truth side ----------------------------------------------------------------------


def test_influence_at_truth_trivial_cases():
    truth = TruthSpec(1.0, 0.0, 0.0, 5.0)
    latent = draw_latent(truth, 200, rng_for(1, 9))
    for design in ("observed", "censored"):
        np.testing.assert_allclose(influence_at_truth(latent, truth, 2.0, design), latent.counts_at(2.0) - 2.0)
    censored = TruthSpec(1.0, 0.5, 0.3, 5.0)
    latent = draw_latent(censored, 200, rng_for(1, 10))
    for design in ("observed", "censored"):
        np.testing.assert_array_equal(influence_at_truth(latent, censored, 0.0, design), 0.0)
    with pytest.raises(InputFormatError, match="latent"):
        influence_at_truth(latent.observe("censored"), censored, 1.0, "censored")


@pytest.mark.parametrize("terminal", [0.0, 0.3])
@pytest.mark.parametrize("design", ["observed", "censored"])
def test_influence_latent_and_observed_forms_agree(design, terminal):
    truth = TruthSpec(1.3, 0.6, terminal, 4.0)
    latent = draw_latent(truth, 2000, rng_for(3, 11))
    for s in (0.3, 1.0, 2.5, 4.0):
        a = influence_at_truth(latent, truth, s, design)
        b = influence_at_truth(latent, truth, s, design, form="observed")
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("design", ["observed", "censored"])
def test_influence_mean_zero_and_variance_matches_oracle(design):
    truth = TruthSpec(1.0, 0.5, 0.3, 5.0)
    x = influence_at_truth(draw_latent(truth, 10_000, rng_for(5, 12)), truth, 2.0, design)
    assert abs(x.mean()) <= 3 * x.std(ddof=1) / math.sqrt(x.size)
    big = influence_at_truth(draw_latent(truth, 100_000, rng_for(5, 13)), truth, 2.0, design)
    sq = (big - big.mean()) ** 2
    assert abs(big.var(ddof=1) - asymptotic_variance_oracle(truth, 2.0, design)) <= 3 * sq.std(ddof=1) / math.sqrt(big.size)


def test_oracle_matches_monte_carlo_without_terminal():
    truth = TruthSpec(1.0, 0.5, 0.0, 5.0)
    x = influence_at_truth(draw_latent(truth, 100_000, rng_for(6, 14)), truth, 1.0, "observed")
    sq = (x - x.mean()) ** 2
    assert abs(x.var(ddof=1) - asymptotic_variance_oracle(truth, 1.0, "observed")) <= 3 * sq.std(ddof=1) / math.sqrt(x.size)


def test_oracle_closed_form_without_terminal():
    lam, c, s = 1.7, 0.4, 2.2
    truth = TruthSpec(lam, c, 0.0, 5.0)
    closed = lam * s + lam * (math.expm1(c * s) - c * s) / c
    assert asymptotic_variance_oracle(truth, s, "observed") == pytest.approx(closed, rel=1e-10)
    assert asymptotic_variance_oracle(truth, s, "censored") == pytest.approx(closed, rel=1e-10)


def test_oracle_limits_and_ordering():
    base = TruthSpec(1.0, 1e-9, 0.5, 5.0)
    for design in ("observed", "censored"):
        assert asymptotic_variance_oracle(base, 2.0, design) == pytest.approx(float(base.var_N(2.0)), rel=1e-7)
    truth = TruthSpec(1.0, 0.4, 0.5, 5.0)
    for s in np.linspace(0.1, 5.0, 15):
        assert asymptotic_variance_oracle(truth, s, "censored") <= asymptotic_variance_oracle(truth, s, "observed")


def test_var_n_closed_forms_match_simulation():
    truth = TruthSpec(1.0, 0.0, 1.0, 5.0)
    latent = draw_latent(truth, 100_000, rng_for(7, 15))
    n1 = latent.counts_at(1.0)
    assert truth.mean(1.0) == pytest.approx(1 - math.exp(-1), rel=1e-12)
    assert abs(n1.mean() - truth.mean(1.0)) <= 3 * n1.std() / math.sqrt(n1.size)
    sq = (n1 - n1.mean()) ** 2
    assert abs(n1.var(ddof=1) - truth.var_N(1.0)) <= 3 * sq.std() / math.sqrt(n1.size)
    inc = latent.counts_at(2.0) - n1
    sq = (inc - inc.mean()) ** 2
    assert abs(inc.var(ddof=1) - truth.var_increment(1.0, 2.0)) <= 3 * sq.std() / math.sqrt(n1.size)
