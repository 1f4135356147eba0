import math

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from henonlab.constants import (
    EIGHT_PI_E,
    FOUR_PI_E,
    PUBLISHED_GAMMA,
    ConfigurationError,
    ProblemParams,
    case1_threshold,
    case2_threshold,
    default_constants,
    lane_emden_dirichlet_limit,
    max_nodal_regions,
    multiplicity_lower_bound,
    predict_cases,
    radial_energy_limit,
    solve_tbar,
    threshold_table,
)


@pytest.fixture(scope="module")
def oracle():
    """Constants recomputed in 40-digit arithmetic with mpmath's root finder."""
    mpmath.mp.dps = 40
    se = mpmath.sqrt(mpmath.e)
    t = mpmath.findroot(lambda x: 2 * se * mpmath.log(x) + x, 0.8)
    kap = 1 + 2 * se / t
    gam = mpmath.exp(-se / (t + se)) * (mpmath.e / t**2 + 1 + 2 * se / t)
    return float(t), float(kap), float(gam)


def test_tbar_matches_high_precision_root(oracle):
    c = default_constants()
    assert abs(c.tbar - oracle[0]) < 1e-14
    assert abs(2 * math.sqrt(math.e) * math.log(c.tbar) + c.tbar) <= 1e-12


def test_kappa_and_gamma_match_oracle(oracle):
    c = default_constants()
    assert c.kappa == pytest.approx(oracle[1], rel=1e-14)
    assert c.gamma == pytest.approx(oracle[2], rel=1e-14)


def test_frozen_constant_values():
    c = default_constants()
    assert c.tbar == pytest.approx(0.7875447920300181, abs=1e-15)
    assert c.kappa == pytest.approx(5.186990473139426, rel=1e-14)
    assert c.gamma == pytest.approx(4.864004818089159, rel=1e-14)


def test_gamma_discrepancy_is_reported():
    c = default_constants()
    assert c.published_gamma == PUBLISHED_GAMMA
    assert c.gamma_discrepancy == pytest.approx((c.gamma - 4.859) / 4.859)
    assert 0 < c.gamma_discrepancy < 5e-3
    assert "gamma_relative_discrepancy" in c.as_dict()


def test_solve_tbar_rejects_bad_tolerance():
    with pytest.raises(ConfigurationError):
        solve_tbar(0.0)


def test_threshold_integers_at_alpha_zero():
    assert multiplicity_lower_bound(0) == 5
    assert case1_threshold(0) == 2
    assert case2_threshold(0) == 3
    assert max_nodal_regions(0) == 4
    row = threshold_table([0.0])[0]
    assert row["guaranteed_quasiradial"] == 2


@pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0, 2.0, 3.7, 10.0])
def test_thresholds_against_independent_formulas(alpha, oracle):
    _, kap, gam = oracle
    a2 = 2 + alpha
    assert multiplicity_lower_bound(alpha) == math.ceil(a2 * kap / 2 - 1)
    assert max_nodal_regions(alpha) == math.floor(a2 * gam / 2)
    assert case1_threshold(alpha) == math.floor(a2 * gam / 4)
    assert case2_threshold(alpha) == math.floor(a2 * gam / 2 - 1)


def test_energy_targets():
    g = default_constants().gamma
    assert radial_energy_limit(0) == pytest.approx(4 * g * math.pi * math.e)
    assert radial_energy_limit(0, PUBLISHED_GAMMA) == pytest.approx(166.0, abs=0.05)
    assert radial_energy_limit(2) == pytest.approx(332.298, abs=1e-3)
    assert lane_emden_dirichlet_limit() == pytest.approx(8 * math.pi * g * math.e)
    assert EIGHT_PI_E == pytest.approx(2 * FOUR_PI_E)


@pytest.mark.parametrize("n, expected", [
    (1, {"case1", "case2", "case3"}),
    (2, {"case1", "case2", "case3"}),
    (3, {"case2", "case3"}),
    (4, {"case3"}),
    (5, {"case3"}),
    (6, {"case3", "radial"}),
])
def test_admissible_sets_at_alpha_zero(n, expected):
    pred = predict_cases(ProblemParams(alpha=0.0, p=50.0, n=n))
    assert set(pred.admissible) == expected
    assert pred.case3_forced == (n >= 4)


def test_problem_params_validation():
    with pytest.raises(ConfigurationError):
        ProblemParams(alpha=-1.0)
    with pytest.raises(ConfigurationError):
        ProblemParams(p=1.0)
    with pytest.raises(ConfigurationError):
        ProblemParams(n=0)
    with pytest.raises(ConfigurationError):
        ProblemParams(n=1.5)
    assert ProblemParams(alpha=1, p=3, n=2.0).n == 2


def test_negative_alpha_rejected_by_thresholds():
    with pytest.raises(ConfigurationError):
        threshold_table([-1.0])


@given(st.floats(0, 50), st.floats(0, 50))
def test_thresholds_monotone_in_alpha(a, b):
    lo, hi = min(a, b), max(a, b)
    for f in (multiplicity_lower_bound, max_nodal_regions, case1_threshold, case2_threshold):
        assert f(lo) <= f(hi)


@given(st.floats(0, 100))
def test_threshold_ordering(alpha):
    assert case1_threshold(alpha) <= case2_threshold(alpha) < max_nodal_regions(alpha)
    assert 2 * case1_threshold(alpha) <= max_nodal_regions(alpha)


@settings(max_examples=50)
@given(st.floats(0, 20), st.integers(1, 40))
def test_case3_always_admissible(alpha, n):
    pred = predict_cases(ProblemParams(alpha=alpha, p=10.0, n=n))
    assert "case3" in pred.admissible
    assert ("case1" in pred.admissible) == (n <= case1_threshold(alpha))
    assert ("radial" in pred.admissible) == (n > multiplicity_lower_bound(alpha))
