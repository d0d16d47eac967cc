import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qpq.bounds import (
    IMPOSSIBILITY_THRESHOLD,
    BoundRecord,
    bound_table,
    clamp_probability,
    extraction_success_bound,
    gentle_bounds,
    impossibility_verdict,
    query_distinguishability_bound,
    step_failure_bound,
    superposition_dephasing_bound,
    two_entry_success_lower,
    union_failure_sum,
)

eps_small = st.floats(0.0, IMPOSSIBILITY_THRESHOLD)


@pytest.mark.parametrize("d,value", [(1, 0.0), (2, 0.5), (3, 2 / 3), (4, 0.75), (8, 0.875)])
def test_dephasing_bound_values(d, value):
    assert superposition_dephasing_bound(d) == pytest.approx(value)


def test_query_bound_uses_larger_set():
    assert query_distinguishability_bound(2, 4) == pytest.approx(0.75)
    assert query_distinguishability_bound(1, 1) == 0.0


@pytest.mark.parametrize("bad", [-0.1, 1.1])
def test_epsilon_domain(bad):
    with pytest.raises(ValueError):
        step_failure_bound(1, bad)
    with pytest.raises(ValueError):
        gentle_bounds(bad)


def test_zero_epsilon_is_perfect():
    assert extraction_success_bound(5, 0.0) == 1.0
    assert step_failure_bound(3, 0.0) == 0.0
    assert gentle_bounds(0.0) == (0.0, 0.0, 0.0, 0.0)


def test_extraction_bound_is_clamped_at_zero():
    assert extraction_success_bound(10, 0.5) == 0.0
    assert clamp_probability(1.7) == 1.0 and clamp_probability(-0.2) == 0.0


@given(st.integers(2, 10), eps_small)
def test_summed_step_failures_fit_success_budget(m, eps):
    # per-step budgets summed over l = 1..m, minus the step-1 term that needs no rotation
    explicit = sum(step_failure_bound(l, eps) for l in range(1, m + 1)) - 3 * math.sqrt(eps)
    assert union_failure_sum(m, eps) == pytest.approx(explicit, abs=1e-12)
    assert union_failure_sum(m, eps) <= 2 * m * m * math.sqrt(eps) + 1e-12


@given(st.floats(0.0, IMPOSSIBILITY_THRESHOLD, exclude_max=True))
def test_two_entry_success_beats_guessing(eps):
    assert two_entry_success_lower(eps) > 0.5 + eps


def test_union_sum_closed_form():
    eps, m = 0.0004, 4
    r = math.sqrt(eps)
    assert union_failure_sum(m, eps) == pytest.approx(0.5 * (3 * r + eps) * 20 - 3 * r)


@given(eps_small, st.integers(2, 6))
def test_gentle_bounds_ordering(eps, m):
    single, cq, uhl, step = gentle_bounds(eps)
    assert single <= cq <= step and uhl <= step
    assert step_failure_bound(m, eps) == pytest.approx(m * step)


def test_verdict_flips_at_threshold():
    grid = np.linspace(0, 2 * IMPOSSIBILITY_THRESHOLD, 1001)
    status = [impossibility_verdict(float(e), 2, [2, 2]).status for e in grid]
    flips = [k for k in range(1, len(status)) if status[k] != status[k - 1]]
    assert len(flips) == 1
    assert grid[flips[0] - 1] <= IMPOSSIBILITY_THRESHOLD < grid[flips[0]]


@pytest.mark.parametrize(
    "n,mults,expected",
    [(1, [2], "not-covered"), (3, [1, 1, 2], "not-covered"), (3, [1, 2, 2], "impossible"), (2, [3, 5], "impossible")],
)
def test_verdict_needs_two_ambiguous_entries(n, mults, expected):
    assert impossibility_verdict(0.001, n, mults).status == expected


def test_verdict_checks_length():
    with pytest.raises(ValueError):
        impossibility_verdict(0.0, 3, [2, 2])


def test_bound_table_contents():
    recs = bound_table(0.01, 3, [2, 4])
    names = [r.name for r in recs]
    assert names.count("step_failure") == 3
    assert "extraction_success" in names and "query_distinguishability" in names
    assert all(isinstance(r, BoundRecord) and r.source for r in recs)
    with pytest.raises(ValueError):
        BoundRecord("x", {}, float("nan"), "s")
