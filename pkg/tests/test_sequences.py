import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shrinktarget.sequences import (
    ARC_SLACK,
    GrowthSequence,
    IntegerSet,
    TargetScheme,
    default_delta,
    fit_sublacunarity_c,
    sublacunarity_check,
)

F = Fraction


def trial_division_primes(N):
    return [n for n in range(2, N + 1) if all(n % p for p in range(2, math.isqrt(n) + 1))]


# -- sequence values --------------------------------------------------------

def test_exact_values():
    assert GrowthSequence.geometric(2).exact_value(10) == 1024
    assert GrowthSequence.polynomial(2).exact_value(7) == 49
    v = GrowthSequence.stretched(2, F(1, 2)).value(100, 128)
    assert v.value == 1024 and v.is_exact


@pytest.mark.parametrize("n", [3, 17, 250, 999])
def test_stretched_value_matches_mpmath(n):
    s = GrowthSequence.stretched(3, F(1, 3))
    v = s.value(n, 160)
    with mpmath.workprec(400):
        ref = mpmath.mpf(3) ** (mpmath.mpf(n) ** (mpmath.mpf(1) / 3))
        rel = abs((mpmath.mpf(v.value.numerator) / v.value.denominator - ref) / ref)
    assert rel <= mpmath.mpf(2) ** -150
    assert v.err <= v.value * F(1, 2**160)


def test_geometric_rational_alpha_is_exact():
    v = GrowthSequence.geometric(F(3, 2)).value(40, 64)
    assert v.is_exact and v.value == F(3, 2) ** 40


def test_invalid_specs_rejected():
    with pytest.raises(ValueError):
        GrowthSequence.geometric(1)
    with pytest.raises(ValueError):
        GrowthSequence.stretched(2, F(3, 2))
    with pytest.raises(ValueError):
        GrowthSequence.explicit([1, 3, 2])


@given(st.integers(1, 60))
def test_geometric_strictly_increasing(n):
    s = GrowthSequence.geometric(F(5, 4))
    assert s.exact_value(n + 1) > s.exact_value(n) >= 1


# -- sublacunarity ----------------------------------------------------------

def test_geometric_is_zero_sublacunary():
    rep = sublacunarity_check(GrowthSequence.geometric(2), 0, 1, 1000)
    assert rep.passed and rep.min_margin == pytest.approx(1.0)


def test_stretched_is_one_minus_b_sublacunary():
    s = GrowthSequence.stretched(2, F(1, 2))
    delta = default_delta(s)
    assert delta == F(1, 2)
    c = fit_sublacunarity_c(s, delta)
    rep = sublacunarity_check(s, delta, c, 10**5)
    assert rep.passed and rep.beta_hat > 1


def test_linear_sequence_is_not_lacunary():
    rep = sublacunarity_check(GrowthSequence.polynomial(1), 0, F(1, 100), 1000)
    assert not rep.passed
    assert rep.diagnostics


# -- targets ----------------------------------------------------------------

def test_anchored_target():
    I = TargetScheme(F(1, 2)).target(4)
    assert [(F(lo, I.den), F(hi, I.den)) for lo, hi, _, _ in I.raw_pieces] == [(0, F(1, 2))]


def test_symmetric_target_and_degenerate_case():
    t = TargetScheme(F(1, 2), placement="symmetric", scale_c=2)
    with pytest.raises(ValueError):
        t.target(4)
    I = t.target(16)
    assert [(F(lo, I.den), F(hi, I.den)) for lo, hi, _, _ in I.raw_pieces] == \
        [(0, F(1, 4)), (F(3, 4), 1)]
    assert I.measure.value == F(1, 2)


def test_split_target_measure():
    t = TargetScheme(F(3, 10), ell=3, placement="split", seed=5)
    I = t.target(10)
    assert len(I) == 3
    assert abs(float(I.measure.value) - 10 ** -0.3) < 2.0**-40


def test_target_measure_above_one_rejected():
    with pytest.raises(ValueError):
        TargetScheme(F(1, 2), scale_c=3).target(4)


@given(st.integers(1, 10**6), st.sampled_from(["anchored", "seeded_random", "split"]))
def test_target_measure_matches_and_is_monotone(n, placement):
    t = TargetScheme(F(2, 5), ell=2, placement=placement, seed=9)
    m1, m2 = t.target(n).measure, t.target(n + 1).measure
    assert abs(float(m1.value) - n ** -0.4) <= 1e-12 + float(m1.err)
    assert m2.value <= m1.value + m1.err + m2.err
    assert len(t.target(n)) <= 2 * t.arcs


def test_arcs64_agree_with_exact_targets():
    t = TargetScheme(F(3, 10), ell=2, placement="split", seed=3)
    ns = np.arange(1, 200)
    lo, length, full = t.arcs64(ns)
    assert full[0] and not full[1:].any()
    for i, n in enumerate(ns):
        if full[i]:
            continue
        I = t.target(int(n))
        exact = float(I.measure.value)
        assert abs(int(length[i].sum(dtype=object)) / 2.0**64 - exact) < 2 * ARC_SLACK / 2.0**64
        for j in range(t.arcs):
            assert any(abs(int(lo[i, j]) / 2.0**64 - float(F(p[0], I.den))) < 1e-12 for p in I.raw_pieces)


# -- integer sets -----------------------------------------------------------

def test_enumeration_examples():
    assert IntegerSet.all().enumerate(5).tolist() == [1, 2, 3, 4, 5]
    assert IntegerSet.power(2).enumerate(30).tolist() == [1, 4, 9, 16, 25]
    assert IntegerSet.primes().count(100) == 25


def test_primes_match_trial_division():
    assert IntegerSet.primes().enumerate(5000).tolist() == trial_division_primes(5000)


@given(st.integers(1, 10**12), st.integers(1, 4))
def test_power_count_is_integer_root(N, d):
    k = IntegerSet.power(d).count(N)
    assert k**d <= N < (k + 1) ** d


def test_random_density_count_within_four_sd():
    A = IntegerSet.random_density(F(1, 2), seed=11)
    n = np.arange(1, 10**6 + 1, dtype=float)
    p = np.minimum(1, n ** -0.5)
    mean, sd = p.sum(), math.sqrt((p * (1 - p)).sum())
    assert abs(A.count(10**6) - mean) <= 4 * sd


def test_random_density_is_chunk_independent():
    a = IntegerSet("random_density", gamma=F(1, 2), seed=4, chunk=1000).enumerate(50000)
    b = IntegerSet("random_density", gamma=F(1, 2), seed=4, chunk=7919).enumerate(50000)
    assert np.array_equal(a, b)


def test_iter_chunks_from_offset():
    A = IntegerSet.power(2)
    got = np.concatenate(list(A.iter_chunks(10**4, 50)))
    assert got.tolist() == [k * k for k in range(8, 101)]


def test_polynomial_needs_delta_one():
    s = GrowthSequence.polynomial(2)
    assert default_delta(s) == 1
    assert sublacunarity_check(s, 1, 1, 10**4).passed
