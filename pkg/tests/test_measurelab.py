import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shrinktarget.errors import BudgetError
from shrinktarget.measurelab import (
    JointSpec,
    cov,
    fourfold,
    joint_cases,
    joint_measure_periods,
    joint_measure_sweep,
    cov_bound,
    mc_joint,
    preimage,
    random_sigma_case,
    sigma,
    sigma_closed_form,
    sigma_values,
    triple,
    variance,
    wilson_interval,
)
from shrinktarget.sequences import GrowthSequence, TargetScheme
from shrinktarget.torus import IntervalUnion

F = Fraction


def pairs(A):
    return [(F(lo, A.den), F(hi, A.den)) for lo, hi, _, _ in A.raw_pieces]


def grid_fraction(us, targets, G=200_000):
    """Share of midpoints x = (k + 1/2)/G with {u x} in every target (float oracle)."""
    x = (np.arange(G) + 0.5) / G
    ok = np.ones(G, dtype=bool)
    for u, T in zip(us, targets):
        v = np.mod(float(u) * x, 1.0)
        inside = np.zeros(G, dtype=bool)
        for lo, hi in pairs(T):
            inside |= (v >= float(lo)) & (v < float(hi))
        ok &= inside
    return ok.mean()


# -- preimages and sigma ----------------------------------------------------

def test_preimage_of_half_under_tripling():
    P = preimage(3, IntervalUnion.from_pairs([(F(1, 2), 1)]))
    assert pairs(P) == [(F(1, 6), F(1, 3)), (F(1, 2), F(2, 3)), (F(5, 6), 1)]
    assert P.measure.value == F(1, 2)


def test_preimage_with_partial_period():
    # u = 5/2: two full copies of [0, 1/4) plus the start of a third
    P = preimage(F(5, 2), IntervalUnion.from_pairs([(0, F(1, 4))]))
    assert pairs(P) == [(0, F(1, 10)), (F(2, 5), F(1, 2)), (F(4, 5), F(9, 10))]
    assert sigma_closed_form(F(5, 2), IntervalUnion.from_pairs([(0, F(1, 4))])).value == F(3, 10)


def test_preimage_budget():
    with pytest.raises(BudgetError):
        preimage(10**6, IntervalUnion.from_pairs([(0, F(1, 2))]), budget=1000)


@given(st.integers(1000, 10**6), st.integers(0, 10**6), st.integers(1, 10**6))
@settings(max_examples=60)
def test_closed_form_equals_preimage_measure(u1000, lo, length):
    u = F(u1000, 1000)
    lo = F(lo, 10**6)
    I = IntervalUnion.from_pairs([(lo, lo + F(min(length, 10**6 - 1), 10**6))])
    assert sigma_closed_form(u, I).value == preimage(u, I).measure.value


def test_sigma_matches_grid_oracle():
    rng = random.Random(7)
    for _ in range(30):
        u, n, t = random_sigma_case(rng, u_max=200)
        T = t.target(n)
        got = float(sigma_closed_form(u, T).value)
        assert abs(got - grid_fraction([u], [T])) < 2e-3


def test_sigma_values_agree_with_certified_sigma():
    s, t = GrowthSequence.geometric(3), TargetScheme(F(3, 10), placement="split", ell=2, seed=4)
    ns = np.arange(1, 60)
    fast = sigma_values(s, t, ns)
    for n, f in zip(ns, fast):
        assert abs(f - float(sigma(s, t, int(n)).value)) < 1e-12


def test_irrational_u_brackets_sigma():
    s, t = GrowthSequence.stretched(2, F(1, 2)), TargetScheme(F(1, 3))
    for n in (2, 7, 30):
        sg = sigma(s, t, n)
        assert sg.err > 0 and sg.err < F(1, 2**60)
        assert abs(float(sg.value) - grid_fraction([2 ** math.sqrt(n)], [t.target(n)])) < 2e-3


# -- joint measures ---------------------------------------------------------

def test_sweep_equals_periods_on_random_cases():
    for un, um, n, m, t in joint_cases(40, seed=1, u_max=2000):
        In, Im = t.target(n), t.target(m)
        pre_n = preimage(un, In)
        sweep = joint_measure_sweep([pre_n, preimage(um, Im)])
        periods = joint_measure_periods(pre_n, um, Im)
        assert sweep.value == periods.value


def test_sweep_equals_periods_for_doubling():
    s, t = GrowthSequence.geometric(2), TargetScheme(F(3, 10), placement="seeded_random", seed=2)
    for n, m in [(2, 5), (3, 7), (7, 9)]:
        assert cov(s, t, n, m, method="periods").exact.value == cov(s, t, n, m, method="sweep").exact.value


def test_joint_measure_matches_grid_oracle():
    s, t = GrowthSequence.geometric(3), TargetScheme(F(1, 2))
    for n, m in [(1, 3), (2, 4), (3, 5)]:
        joint = cov(s, t, n, m).extra["joint"]
        us = [3**n, 3**m]
        assert abs(float(joint.value) - grid_fraction(us, [t.target(n), t.target(m)], 10**6)) < 1e-3


def test_full_target_joint_is_other_sigma():
    s, t = GrowthSequence.geometric(2), TargetScheme(F(1, 2))
    rep = cov(s, t, 1, 6)
    assert rep.extra["joint"].value == rep.extra["sigma"][1].value
    assert rep.exact.value == 0


def test_variance_is_bernoulli():
    s, t = GrowthSequence.geometric(2), TargetScheme(F(1, 2))
    sg = sigma(s, t, 9)
    assert variance(s, t, 9).value == sg.value * (1 - sg.value)


def test_cov_within_lemma_bound():
    s, t = GrowthSequence.geometric(2), TargetScheme(F(3, 10))
    rep = cov(s, t, 3, 10)
    assert abs(float(rep.exact.value)) <= 4 * cov_bound(s, t, 3, 10)


def test_cov_rejects_unordered():
    with pytest.raises(ValueError):
        cov(GrowthSequence.geometric(2), TargetScheme(F(1, 2)), 5, 5)


def test_fourfold_vanishes_with_full_target():
    s, t = GrowthSequence.geometric(2), TargetScheme(F(1, 2))
    assert fourfold(s, t, (1, 3, 5, 8)).exact.value == 0


def test_fourfold_of_independent_digits_vanishes():
    # dyadic targets under doubling depend on disjoint binary digits
    s = GrowthSequence.geometric(2)
    t = TargetScheme(F(1, 2), scale_c=F(1, 2), n0=1)
    assert t.target(4).measure.value == F(1, 4)
    assert fourfold(s, t, (4, 7, 10, 13)).exact.value == 0


def test_triple_reports_against_bound():
    s, t = GrowthSequence.geometric(2), TargetScheme(F(3, 10))
    rep = triple(s, t, (2, 5, 9))
    assert rep.paper_bound > 0
    assert abs(float(rep.exact.value)) <= 10 * rep.paper_bound


def test_joint_spec_validation():
    s, t = GrowthSequence.geometric(2), TargetScheme(F(1, 2))
    with pytest.raises(ValueError):
        JointSpec((3, 2), s, t)
    with pytest.raises(ValueError):
        JointSpec((1, 2, 3, 4, 5), s, t)


# -- Monte Carlo ------------------------------------------------------------

def test_mc_full_target_is_one():
    est, lo, hi = mc_joint(JointSpec((1,), GrowthSequence.geometric(2), TargetScheme(F(1, 2))), 2000, 0)
    assert est == 1.0 and hi == pytest.approx(1.0)


def test_mc_interval_contains_exact_joint():
    s, t = GrowthSequence.geometric(2), TargetScheme(F(1, 2))
    rep = cov(s, t, 4, 9, mc_samples=20000, seed=3)
    lo, hi = rep.mc_ci95
    assert lo <= float(rep.extra["joint"].value) <= hi


def test_mc_handles_dyadic_boundary_ties():
    s, t = GrowthSequence.geometric(2), TargetScheme(F(1, 2), scale_c=F(1, 2), n0=1)
    est, lo, hi = mc_joint(JointSpec((40,), s, t), 5000, 11)
    assert lo <= float(sigma(s, t, 40).value) <= hi


def test_wilson_interval():
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi and hi - lo == pytest.approx(0.19, abs=0.01)
    assert wilson_interval(0, 100)[0] == 0.0
