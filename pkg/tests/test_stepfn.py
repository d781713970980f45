import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from recurrent_pvar.stepfn import (
    StepFunction,
    evaluate,
    product_integral,
    pvar,
    pvar_bruteforce,
    pvar_distance_to_truth,
    sequence_pvar,
    stieltjes_integral,
)

P_VALUES = (1.0, 1.2, 1.5, 1.9)


@st.composite
def step_functions(draw, max_breaks=12, lo=-2.0, hi=2.0):
    m = draw(st.integers(0, max_breaks))
    times = np.cumsum(draw(st.lists(st.floats(0.01, 3.0), min_size=m, max_size=m))) if m else np.zeros(0)
    values = np.array(draw(st.lists(st.floats(lo, hi), min_size=m + 1, max_size=m + 1)))
    return StepFunction.from_levels(times, values[1:], values[0])


ps = st.floats(1.0, 1.99)


def random_step(rng, m, lo=-2.0, hi=2.0):
    times = np.cumsum(rng.uniform(0.05, 1.0, m))
    values = rng.uniform(lo, hi, m + 1)
    return StepFunction.from_levels(times, values[1:], values[0])


# -- construction and evaluation ------------------------------------------------


def test_evaluate_right_and_left():
    f = StepFunction([1.0], [1.0])
    assert evaluate(f, 1.0, "right") == 1.0
    assert evaluate(f, 1.0, "left") == 0.0
    g = StepFunction([1.0, 2.0], [0.5, 0.5])
    assert g(1.5) == 0.5
    assert g.left_limit(0.0) == 0.0


def test_ties_merge_and_zero_jumps_drop():
    f = StepFunction([2.0, 1.0, 2.0, 3.0], [0.5, 1.0, 0.25, 0.0])
    assert list(f.times) == [1.0, 2.0]
    assert list(f.jumps) == [1.0, 0.75]
    g = StepFunction([1.0, 1.0], [1.0, -1.0])
    assert len(g) == 0


@pytest.mark.parametrize("times", [[0.0], [-1.0], [math.inf]])
def test_bad_breakpoints_rejected(times):
    with pytest.raises(ValueError):
        StepFunction(times, [1.0])


def test_arithmetic():
    f = StepFunction([1.0, 2.0], [1.0, -0.5], 0.25)
    g = StepFunction([2.0, 3.0], [0.5, 2.0])
    h = f + g
    assert h(2.5) == f(2.5) + g(2.5)
    assert list(h.times) == [1.0, 3.0]  # the jumps at 2 cancel
    assert (f - f) == StepFunction.constant(0.0)
    assert (2 * f)(1.5) == 2 * f(1.5)


# -- p-variation fixtures ---------------------------------------------------------


def test_monotone_fixture():
    f = StepFunction([1.0, 2.0], [0.5, 0.5])
    for r in (pvar(f, 1.5), pvar_bruteforce(f, 1.5)):
        assert r.v_p == pytest.approx(1.0, rel=1e-12)
        assert r.partition == (0.0, 2.0)


def test_alternating_fixture():
    f = StepFunction([1.0, 2.0, 3.0], [1.0, -1.0, 1.0])
    assert pvar(f, 1.5).v_p == pytest.approx(3.0, rel=1e-12)
    assert pvar_bruteforce(f, 1.5).v_p == pytest.approx(3.0, rel=1e-12)


def test_overshoot_fixture():
    f = StepFunction([1.0, 2.0], [2.0, -1.0])
    expected = 2.0**1.5 + 1.0
    assert pvar(f, 1.5).v_p == pytest.approx(expected, rel=1e-12)
    assert pvar_bruteforce(f, 1.5).v_p == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(3.8284271, abs=1e-7)


def test_constant_has_zero_variation():
    f = StepFunction.constant(1.7)
    r = pvar(f, 1.3)
    assert r.v_p == 0.0 and r.seminorm_p == 0.0 and r.sup_norm == 1.7 and r.norm_p == 1.7
    assert pvar_bruteforce(f, 1.3).v_p == 0.0


def test_p_below_one_rejected():
    with pytest.raises(ValueError):
        pvar(StepFunction([1.0], [1.0]), 0.9)


def test_bruteforce_guard():
    f = StepFunction(np.arange(1.0, 23.0), np.resize([1.0, -1.0], 22))
    with pytest.raises(ValueError):
        pvar_bruteforce(f, 1.5)


def test_dp_matches_bruteforce_random(rng):
    for _ in range(300):
        f = random_step(rng, int(rng.integers(0, 13)))
        for p in P_VALUES:
            a, b = pvar(f, p), pvar_bruteforce(f, p)
            assert a.v_p == pytest.approx(b.v_p, rel=1e-12, abs=1e-300)


def test_dp_handles_long_sequences(rng):
    # random walk with many alternations; the DP must stay exact against a plain O(m^2) recursion
    v = np.cumsum(rng.normal(size=400))
    p = 1.5
    best = np.zeros(v.size)
    for j in range(1, v.size):
        best[j] = np.max(best[:j] + np.abs(v[j] - v[:j]) ** p)
    value, idx = sequence_pvar(v, p)
    assert value == pytest.approx(best.max(), rel=1e-12)
    assert np.sum(np.abs(np.diff(v[idx])) ** p) == pytest.approx(value, rel=1e-12)


# -- distance to a continuous truth ---------------------------------------------


def test_distance_zero_truth():
    F_n = StepFunction([1.0], [1.0])
    r = pvar_distance_to_truth(F_n, lambda t: np.zeros_like(np.asarray(t, dtype=float)), 1.5, 3.0)
    assert r.norm_p == pytest.approx(2.0, rel=1e-12)
    z = pvar_distance_to_truth(StepFunction.constant(0.0), lambda t: 0.0 * np.asarray(t), 1.5, 3.0)
    assert z.norm_p == 0.0


def test_distance_linear_truth_fixture():
    F_n = StepFunction([1.0], [1.0])
    r = pvar_distance_to_truth(F_n, lambda t: np.asarray(t) / 2.0, 1.0, 2.0)
    assert r.v_p == pytest.approx(2.0, rel=1e-12)
    assert r.sup_norm == pytest.approx(0.5, rel=1e-12)
    assert r.norm_p == pytest.approx(2.5, rel=1e-12)


def test_distance_matches_dense_grid(rng):
    # F_n - F with a linear F is monotone between jumps: a fine grid cannot beat the exact value
    F_n = StepFunction(np.sort(rng.uniform(0, 2, 6)), np.full(6, 1 / 6))
    F = lambda t: np.asarray(t, dtype=float) / 2.0  # noqa: E731
    exact = pvar_distance_to_truth(F_n, F, 1.5, 2.0)
    grid = np.linspace(0, 2, 4001)
    dense, _ = sequence_pvar(F_n(grid) - F(grid), 1.5)
    assert dense <= exact.v_p * (1 + 1e-12)
    assert dense >= 0.98 * exact.v_p


def test_distance_rejects_bad_truth():
    F_n = StepFunction([1.0], [1.0])
    with pytest.raises(ValueError):
        pvar_distance_to_truth(F_n, lambda t: np.full(np.shape(t), np.nan), 1.5, 2.0)


# -- properties ---------------------------------------------------------------------


@given(step_functions(), ps)
def test_property_dp_equals_bruteforce(f, p):
    assert pvar(f, p).v_p == pytest.approx(pvar_bruteforce(f, p).v_p, rel=1e-12, abs=1e-300)


@given(st.lists(st.floats(0.0, 2.0), min_size=0, max_size=12), st.floats(0.0, 1.0), st.floats(1.0, 3.0))
def test_property_monotone_seminorm_is_range(jumps, start, p):
    times = np.arange(1.0, len(jumps) + 1.0)
    f = StepFunction(times, jumps, start)
    rng_ = f.final_value - f.initial_value
    assert pvar(f, p).seminorm_p == pytest.approx(rng_, rel=1e-12, abs=1e-15)


@given(step_functions(), ps, st.floats(0.0, 1.0))
def test_property_seminorm_nonincreasing_in_p(f, p, dq):
    q = p + dq
    assert pvar(f, q).seminorm_p <= pvar(f, p).seminorm_p * (1 + 1e-12) + 1e-15


@given(step_functions(), ps, st.data())
def test_property_lower_bound(f, p, data):
    seq = f.value_sequence
    i = data.draw(st.integers(0, seq.size - 1))
    j = data.draw(st.integers(0, seq.size - 1))
    assert pvar(f, p).v_p >= abs(seq[j] - seq[i]) ** p * (1 - 1e-12)


@given(step_functions(), step_functions(), ps)
def test_property_triangle(f, g, p):
    lhs = pvar(f + g, p).seminorm_p
    rhs = pvar(f, p).seminorm_p + pvar(g, p).seminorm_p
    assert lhs <= rhs * (1 + 1e-12) + 1e-12


@given(step_functions(), ps)
def test_property_partition_recompute(f, p):
    r = pvar(f, p)
    assert r.recompute() == pytest.approx(r.v_p, rel=1e-12, abs=1e-300)
    assert r.norm_p == r.seminorm_p + r.sup_norm
    assert [f(t) for t in r.partition] == list(r.partition_values)


# -- integrals ----------------------------------------------------------------------


def test_stieltjes_fixtures():
    f = StepFunction([1.0, 2.0], [0.5, 0.5])
    g = lambda u: np.asarray(u, dtype=float)  # noqa: E731
    assert stieltjes_integral(g, f, 2.0, "closed") == 1.5
    assert stieltjes_integral(g, f, 2.0, "open") == 0.5


@given(step_functions())
def test_property_stieltjes_telescopes(f):
    one = lambda u: np.ones_like(np.asarray(u, dtype=float))  # noqa: E731
    total = stieltjes_integral(one, f)
    assert total == pytest.approx(f.final_value - f.initial_value, rel=1e-12, abs=1e-12)


@given(step_functions(), step_functions(), st.floats(-2, 2), st.floats(0.0, 40.0))
def test_property_stieltjes_linear(f, h, a, s):
    g1 = lambda u: np.sin(np.asarray(u, dtype=float))  # noqa: E731
    g2 = lambda u: np.asarray(u, dtype=float) ** 2  # noqa: E731
    both = lambda u: g1(u) + a * g2(u)  # noqa: E731
    lhs = stieltjes_integral(both, f, s)
    rhs = stieltjes_integral(g1, f, s) + a * stieltjes_integral(g2, f, s)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)
    lhs = stieltjes_integral(g1, f + h, s)
    rhs = stieltjes_integral(g1, f, s) + stieltjes_integral(g1, h, s)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


@given(step_functions(), st.data())
def test_property_closed_minus_open_is_jump(f, data):
    if len(f) == 0:
        return
    s = f.times[data.draw(st.integers(0, len(f) - 1))]
    g = lambda u: np.cos(np.asarray(u, dtype=float))  # noqa: E731
    gap = stieltjes_integral(g, f, s, "closed") - stieltjes_integral(g, f, s, "open")
    assert gap == pytest.approx(math.cos(s) * (f(s) - f.left_limit(s)), rel=1e-9, abs=1e-12)


def test_product_integral_fixtures():
    lam = StepFunction([1.0, 3.0], [1 / 3, 1.0])
    assert product_integral(lam, 2.0) == pytest.approx(2 / 3, rel=1e-12)
    assert product_integral(lam, 3.0) == pytest.approx(2 / 3, rel=1e-12)
    assert product_integral(lam, 3.5) == 0.0
    assert product_integral(lam, 1.0) == 1.0
    assert product_integral(StepFunction.constant(0.0), 7.0) == 1.0
    assert product_integral(StepFunction([1.0], [1.0]), 1.5) == 0.0


def test_product_integral_rejects_super_unit_jump():
    with pytest.raises(ValueError):
        product_integral(StepFunction([1.0], [1.5]), 2.0)


@given(step_functions(lo=0.0, hi=1.0), st.lists(st.floats(0.0, 40.0), min_size=2, max_size=8))
def test_property_product_integral_range_and_monotone(cum, ss):
    # turn arbitrary levels into hazard jumps in [0, 1]
    lam = StepFunction(cum.times, np.abs(cum.jumps).clip(max=1.0))
    ss = np.sort(ss)
    k = np.asarray(product_integral(lam, ss))
    assert np.all((k >= 0) & (k <= 1))
    assert np.all(np.diff(k) <= 0)
    for t in lam.times:
        assert product_integral(lam, t) == pytest.approx(product_integral(lam, np.nextafter(t, 0)), rel=1e-12)
