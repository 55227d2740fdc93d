import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minegames.bounds import (
    ThresholdSearch,
    bound_catalog,
    catalog_checks,
    find_threshold,
    fixed_strategy_checks,
    fixed_strategy_gain_d3,
    h0_lower_radical,
    polynomial_threshold,
    potential_property_checks,
    r_absorbing_chain,
    r_infinity,
    reproduce_table,
    rinf_checks,
    verify_lemma_bounds,
)
from minegames.core import GameParams
from minegames.errors import NonMonotoneError
from minegames.immediate import solve


def by_name(checks):
    return {c.name: c for c in checks}


def test_r_infinity_examples():
    assert r_infinity(0.25, 1, 1) == pytest.approx(1 / 3, abs=1e-15)
    assert r_infinity(0.3, 0, 2) == pytest.approx((3 / 7) ** 3, abs=1e-15)
    assert r_infinity(0.1, 4, 3) == 1.0
    assert r_infinity(0.0, 0, 0) == 0.0
    with pytest.raises(ValueError):
        r_infinity(0.5, 0, 0)
    with pytest.raises(ValueError):
        r_infinity(0.3, 5, 1)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.45), st.integers(0, 30))
def test_r_infinity_matches_chain(p, deficit):
    chain = r_absorbing_chain(p, [deficit], n_max=400)[0]
    assert r_infinity(p, 0, deficit - 1) == pytest.approx(chain, abs=1e-11)


def test_rinf_checks_pass():
    assert all(c.status == "pass" for c in rinf_checks())


def test_catalog_values():
    cat = bound_catalog()
    assert cat.h0_lower == pytest.approx(0.3611, abs=5e-4)
    assert cat.strategic_lower == pytest.approx(0.308, abs=5e-4)
    assert cat.golden == pytest.approx((3 - math.sqrt(5)) / 2, abs=1e-14)
    assert cat.h0_upper_witness == 0.455
    assert abs(h0_lower_radical() - cat.h0_lower) < 1e-10
    assert all(c.status == "pass" for c in catalog_checks())
    with pytest.raises(ValueError):
        polynomial_threshold("nope")


def test_fixed_strategy_closed_form():
    assert fixed_strategy_gain_d3(0.0) == 0.0
    assert fixed_strategy_gain_d3(0.455) == pytest.approx(0.45513, abs=1e-5)
    assert fixed_strategy_gain_d3(0.455) > 0.455
    assert all(c.status == "pass" for c in fixed_strategy_checks())


def test_lemma_checks_low_power():
    checks = by_name(verify_lemma_bounds(solve(GameParams("immediate", 0.3, 30))))
    assert all(c.status == "pass" for c in checks.values())


def test_lemma_checks_gate_above_thresholds():
    checks = by_name(verify_lemma_bounds(solve(GameParams("immediate", 0.455, 3))))
    assert checks["(0,2) is not a mining state"].status == "skipped"
    assert checks["phi(1,2) upper bound"].status == "pass"


def test_lemma_zero_two_capitulates_near_bound():
    rep = solve(GameParams("immediate", 0.36, 30))
    c = by_name(verify_lemma_bounds(rep))["(0,2) is not a mining state"]
    assert c.status == "pass" and c.margin > 0
    assert rep.policy[(0, 2)].kind != 0


@pytest.mark.parametrize("p", [0.1, 0.25, 0.4, 0.45])
def test_potential_properties(p):
    checks = potential_property_checks(solve(GameParams("immediate", p, 20)))
    assert [c.name for c in checks if c.status != "pass"] == []


def test_threshold_small_depths():
    assert find_threshold("immediate", 2).p_hat == pytest.approx(0.5, abs=2e-3)
    res = find_threshold("immediate", 3)
    assert 0.452 <= res.p_hat <= 0.456
    lo, hi = res.bracket
    assert hi - lo <= 1e-5
    assert solve(GameParams("immediate", lo, 3)).g_star - lo <= 1e-7
    assert res.gap_at_bracket > 1e-7


def test_threshold_rejects_bad_bracket():
    with pytest.raises(NonMonotoneError):
        find_threshold("immediate", 3, bracket=(0.46, 0.6))
    with pytest.raises(NonMonotoneError):
        find_threshold("immediate", 3, bracket=(0.30, 0.40))
    with pytest.raises(ValueError):
        find_threshold("immediate", 3, p_tol=1e-7)


def test_table_is_non_increasing():
    rows = reproduce_table([2, 3, 5, 10])
    vals = [r.p_hat for r in rows]
    assert vals == sorted(vals, reverse=True)


def test_threshold_search_estimator():
    est = ThresholdSearch(d=3).fit()
    assert est.predict([0.40, 0.46]).tolist() == [0, 1]
    assert est.bracket_[0] <= est.threshold_ <= est.bracket_[1]
