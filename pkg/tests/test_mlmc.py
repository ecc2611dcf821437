import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from truncmlmc import (EstimateRecord, LevelSchedule, analytic_profile,
                       check_level_budget_bound, estimate_mlmc,
                       estimate_mlmc_fixed, geometric_coefficients,
                       level_variance_estimates, make_additive, make_product,
                       new_stream, optimal_allocation, predicted_variance,
                       replicate, samples_needed, standard_mc, summarize,
                       total_budget, truncation_schedule,
                       work_normalized_variance)


def test_schedule_examples():
    s8 = truncation_schedule(8)
    assert s8.m == (0, 1, 3, 8)
    assert s8.n == (2, 1, 1)
    s2 = truncation_schedule(2)
    assert s2.m == (0, 2)
    assert s2.n == (1,)
    s1000 = truncation_schedule(1000)
    assert s1000.levels == 10
    assert s1000.m[1] == 1 and s1000.m[9] == 511 and s1000.m[10] == 1000
    assert s1000.n[0] == 50


def test_schedule_rejects_one_dimension():
    with pytest.raises(ValueError):
        truncation_schedule(1)


@given(st.integers(min_value=2, max_value=5000))
@settings(max_examples=80, deadline=None)
def test_schedule_shape_properties(d):
    s = truncation_schedule(d)
    assert s.m[0] == 0 and s.m[-1] == d
    assert all(b > a for a, b in zip(s.m, s.m[1:]))
    assert all(nl >= 1 for nl in s.n)
    assert s.levels == math.ceil(math.log2(d))
    assert all(s.m[l] == 2 ** l - 1 for l in range(1, s.levels))
    # exact integer ceiling of (d / L) 2^-l
    for l, nl in enumerate(s.n, start=1):
        assert nl == math.ceil(d / (s.levels * 2 ** l))


def test_level_schedule_validation():
    with pytest.raises(ValueError):
        LevelSchedule(m=(1, 2), n=(1,))
    with pytest.raises(ValueError):
        LevelSchedule(m=(0, 2, 2), n=(1, 1))
    with pytest.raises(ValueError):
        LevelSchedule(m=(0, 2), n=(1, 1))
    with pytest.raises(ValueError):
        LevelSchedule(m=(0, 2), n=(0,))


@pytest.mark.parametrize("d", [2, 4, 16, 100, 256])
def test_mlmc_draw_cost_is_exact_and_bounded(d):
    f = make_additive(geometric_coefficients(d))
    schedule = truncation_schedule(d)
    rec = estimate_mlmc(f, schedule, new_stream(13))
    expected_draws = d + sum(nl * ml for nl, ml in zip(schedule.n, schedule.m[1:]))
    assert rec.draw_units == expected_draws
    assert rec.draw_units <= 9 * d
    expected_evals = 1 + schedule.n[0] + 2 * sum(schedule.n[1:])
    assert rec.eval_units == expected_evals
    assert rec.cost_units == rec.draw_units + rec.eval_units


def test_mlmc_fixed_cost_excludes_base_point():
    d = 16
    f = make_additive(geometric_coefficients(d))
    schedule = truncation_schedule(d)
    rec = estimate_mlmc_fixed(f, np.full(d, 0.5), schedule, new_stream(13))
    assert rec.draw_units == sum(nl * ml for nl, ml in zip(schedule.n, schedule.m[1:]))
    assert rec.eval_units == schedule.n[0] + 2 * sum(schedule.n[1:])


def test_single_level_schedule_averages_full_evaluations():
    # with one level the estimator is a plain average and the base point is unused
    f = make_product([1.0, 1.0])
    schedule = truncation_schedule(2)
    a = estimate_mlmc_fixed(f, [0.0, 0.0], schedule, new_stream(5))
    b = estimate_mlmc_fixed(f, [0.9, 0.9], schedule, new_stream(5))
    assert a.value == b.value


def test_level_telescoping_degeneracy():
    # integrand ignores everything past the first coordinate: all increments
    # with a nonempty coarse prefix vanish identically
    d = 8
    f = make_additive([1.0] + [0.0] * (d - 1))
    rec = estimate_mlmc(f, truncation_schedule(d), new_stream(17))
    for stats in rec.per_level[1:]:
        assert stats.total == 0.0
        assert stats.total_sq == 0.0


def test_mlmc_mean_unbiased_quick():
    f = make_additive([1.0, 1.0])
    schedule = truncation_schedule(2)
    summary = replicate(lambda s: estimate_mlmc(f, schedule, s), 4000, new_stream(23))
    se = math.sqrt(summary.sample_variance / summary.replications)
    assert abs(summary.mean - 0.0) < 4 * se


def test_mlmc_fixed_mean_unbiased_for_corner_base_point():
    f = make_product([1.0, 1.0])
    schedule = truncation_schedule(2)
    summary = replicate(
        lambda s: estimate_mlmc_fixed(f, [0.0, 0.0], schedule, s), 4000, new_stream(29))
    se = math.sqrt(summary.sample_variance / summary.replications)
    assert abs(summary.mean - 1.0) < 4 * se


def test_midpoint_base_point_zeroes_additive_suffix():
    d = 8
    f = make_additive(geometric_coefficients(d))
    schedule = truncation_schedule(d)
    rec = estimate_mlmc_fixed(f, np.full(d, 0.5), schedule, new_stream(31))
    # each increment only sees its fresh prefix coordinates; value is a sum of
    # centered prefix averages, so a few thousand replications center on 0
    summary = replicate(
        lambda s: estimate_mlmc_fixed(f, np.full(d, 0.5), schedule, s), 3000,
        new_stream(37))
    se = math.sqrt(summary.sample_variance / summary.replications)
    assert abs(summary.mean) < 4 * se
    assert rec.per_level is not None


def test_standard_mc_single_sample():
    f = make_additive([1.0, 1.0])
    stream = new_stream(41)
    rec = standard_mc(f, 1, stream)
    assert rec.cost_units == 2 + 1
    assert rec.draw_units == 2
    check = new_stream(41)
    assert rec.value == f.eval(check.draw(2))


def test_standard_mc_mean_and_variance():
    f = make_additive([1.0, 1.0])  # variance 1/6
    rec = standard_mc(f, 10_000, new_stream(43))
    assert abs(rec.value) < 4 * math.sqrt((1 / 6) / 10_000)
    summary = replicate(lambda s: standard_mc(f, 1, s), 4000, new_stream(47))
    se = (1 / 6) * math.sqrt(2 / (summary.replications - 1))
    assert abs(summary.sample_variance - 1 / 6) < 4 * se


def test_replicate_constant_closure():
    rec = EstimateRecord(value=3.0, cost_units=5, draw_units=5, step_units=0,
                         eval_units=0)
    summary = replicate(lambda s: rec, 2, new_stream(1))
    assert summary.mean == 3.0
    assert summary.sample_variance == 0.0
    assert summary.mean_cost == 5.0


def test_summary_mean_matches_recorded_values():
    f = make_product([0.5, 0.5, 0.5])
    schedule = truncation_schedule(3)
    root = new_stream(53)
    records = [estimate_mlmc(f, schedule, root.fork(j)) for j in range(100)]
    summary = summarize(records)
    values = np.array([r.value for r in records])
    assert summary.mean == pytest.approx(values.mean(), rel=1e-12)
    assert summary.sample_variance == pytest.approx(values.var(ddof=1), rel=1e-12)


def test_replicate_requires_two():
    with pytest.raises(ValueError):
        replicate(lambda s: EstimateRecord(1.0, 1, 1, 0, 0), 1, new_stream(1))


def test_fixed_base_levels_satisfy_variance_identity():
    # independent levels: replicated variance equals sum V_l / n_l
    d = 16
    f = make_additive(geometric_coefficients(d))
    schedule = truncation_schedule(d)
    summary = replicate(
        lambda s: estimate_mlmc_fixed(f, np.full(d, 0.5), schedule, s), 6000,
        new_stream(59))
    predicted = predicted_variance(summary, schedule)
    se = summary.sample_variance * math.sqrt(2 / (summary.replications - 1))
    assert abs(summary.sample_variance - predicted) < 4 * se


def test_samples_needed_cases():
    assert samples_needed(1.0, 0.1) == 100
    assert samples_needed(0.025, 0.1) == 3
    assert samples_needed(1e-6, 1.0) == 1
    with pytest.raises(ValueError):
        samples_needed(0.0, 0.1)
    with pytest.raises(ValueError):
        samples_needed(1.0, 0.0)


def test_work_normalized_variance_and_budget():
    summary = summarize([EstimateRecord(3.0, 10, 10, 0, 0),
                         EstimateRecord(4.0, 10, 10, 0, 0)])
    assert summary.sample_variance == pytest.approx(0.5)
    assert work_normalized_variance(summary) == pytest.approx(5.0)
    # variance 0.5, cost 10: eps 0.1 needs 50 replications
    assert total_budget(summary, 0.1) == pytest.approx(500.0)
    # huge eps: a single replication suffices
    assert total_budget(summary, 100.0) == pytest.approx(10.0)


def test_work_normalized_variance_invariant_to_averaging():
    f = make_additive([1.0, 1.0])
    one = replicate(lambda s: standard_mc(f, 1, s), 4000, new_stream(61))
    two = replicate(lambda s: standard_mc(f, 2, s), 4000, new_stream(61))
    a, b = work_normalized_variance(one), work_normalized_variance(two)
    assert abs(a - b) / a < 0.2


@given(st.floats(min_value=1e-6, max_value=1e3),
       st.floats(min_value=1e-3, max_value=1e3),
       st.floats(min_value=1e-3, max_value=1e3))
@settings(max_examples=60, deadline=None)
def test_total_budget_sandwich(variance, eps, cost):
    summary = summarize([EstimateRecord(0.0, 1, 1, 0, 0),
                         EstimateRecord(1.0, 1, 1, 0, 0)])
    budget = samples_needed(variance, eps) * cost
    lower = (cost + cost * variance / eps ** 2) / 2
    upper = cost + cost * variance / eps ** 2
    assert lower <= budget * (1 + 1e-12)
    assert budget <= upper * (1 + 1e-12)


def test_optimal_allocation_cases():
    assert np.array_equal(optimal_allocation([1.0], [1.0], 0.01), [100])
    n = optimal_allocation([4.0, 1.0], [1.0, 4.0], 0.001)
    assert n[0] == 4 * n[1]
    assert np.array_equal(optimal_allocation([0.0, 0.0], [1.0, 1.0], 0.1), [1, 1])
    n = optimal_allocation([0.0, 1.0], [1.0, 1.0], 0.5)
    assert n[0] == 1


@given(st.lists(st.floats(min_value=0.0, max_value=50.0), min_size=1, max_size=6),
       st.data())
@settings(max_examples=60, deadline=None)
def test_optimal_allocation_meets_target(V, data):
    t = [data.draw(st.floats(min_value=0.1, max_value=20.0)) for _ in V]
    target = data.draw(st.floats(min_value=1e-3, max_value=10.0))
    n = optimal_allocation(V, t, target)
    assert np.all(n >= 1)
    assert float(np.sum(np.asarray(V) / n)) <= target * (1 + 1e-9)


def test_level_budget_bound_single_level_equality():
    rep = check_level_budget_bound(m=[0, 1], V=[0.4], nu=[0.4, 0.0])
    assert rep.lhs == pytest.approx(rep.rhs)
    assert rep.passed


def test_level_budget_bound_zero_nu_always_passes():
    rep = check_level_budget_bound(m=[0, 1, 4], V=[0.3, 0.1], nu=[0.0] * 5)
    assert rep.passed


def test_level_budget_bound_validation():
    with pytest.raises(ValueError):
        check_level_budget_bound(m=[0, 2], V=[1.0], nu=[0.1, 0.2, 0.0])
    with pytest.raises(ValueError):
        check_level_budget_bound(m=[0, 2], V=[1.0], nu=[0.2, 0.1, 0.3])
    with pytest.raises(ValueError):
        check_level_budget_bound(m=[1, 2], V=[1.0], nu=[0.2, 0.1])


def test_level_budget_bound_holds_with_measured_variances():
    d = 8
    f = make_additive(geometric_coefficients(d))
    schedule = truncation_schedule(d)
    summary = replicate(
        lambda s: estimate_mlmc_fixed(f, np.full(d, 0.5), schedule, s), 4000,
        new_stream(67))
    V = level_variance_estimates(summary.per_level)
    nu = analytic_profile(f).D
    rep = check_level_budget_bound(schedule.m, V, nu)
    assert rep.passed
