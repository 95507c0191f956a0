from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shrinktarget.errors import PrecisionError, UncertainOrderError
from shrinktarget.torus import (
    CircleInterval,
    HPScalar,
    IntervalUnion,
    Membership,
    Verdict,
    iu_complement,
    iu_contains,
    iu_intersect,
    iu_normalize,
    iu_union,
    mpfr_power_fraction,
)

F = Fraction


def grid_count(A: IntervalUnion, G: int) -> float:
    """Fraction of midpoints (k + 1/2)/G inside A, decided from the float endpoints."""
    x = (np.arange(G) + 0.5) / G
    inside = np.zeros(G, dtype=bool)
    for lo, hi, _, _ in A.raw_pieces:
        inside |= (x >= lo / A.den) & (x < hi / A.den)
    return inside.mean()


def pairs(A):
    return [(F(lo, A.den), F(hi, A.den)) for lo, hi, _, _ in A.raw_pieces]


# -- HPScalar ---------------------------------------------------------------

def test_exact_arithmetic_stays_exact():
    x = HPScalar.exact(F(1, 3)) * 3 - 1
    assert x.value == 0 and x.is_exact


def test_compare_is_three_valued():
    x = HPScalar(F(1, 2), F(1, 1000))
    assert x.compare(F(1, 2) + F(1, 10000)) is Verdict.UNCERTAIN
    assert x.compare(F(1, 4)) is Verdict.ABOVE
    assert x.compare(F(3, 4)) is Verdict.BELOW
    assert HPScalar.exact(F(1, 2)).compare(F(1, 2)) is Verdict.EQUAL


def test_floor_near_integer_raises():
    with pytest.raises(PrecisionError):
        HPScalar(F(3), F(1, 10**6)).floor()
    assert HPScalar(F(7, 2), F(1, 10)).floor() == 3


@given(st.fractions(-10, 10), st.fractions(0, F(1, 100)), st.fractions(-10, 10), st.fractions(0, F(1, 100)))
def test_error_propagation_contains_true_result(a, ea, b, eb):
    x, y = HPScalar(a, ea), HPScalar(b, eb)
    for op in (lambda p, q: p + q, lambda p, q: p - q, lambda p, q: p * q):
        r = op(x, y)
        for s in (-1, 1):
            for t in (-1, 1):
                true = op(a + s * ea, b + t * eb)
                assert r.lower <= true <= r.upper


def test_mpfr_power_exact_and_irrational():
    assert mpfr_power_fraction(4, F(1, 2), 128).value == 2
    v = mpfr_power_fraction(10, F(-3, 10), 128)
    assert abs(float(v.value) - 10 ** -0.3) < 1e-15
    assert v.err < F(1, 2**120)


# -- normalize --------------------------------------------------------------

def test_overlapping_pieces_merge():
    A = IntervalUnion.from_pairs([(F(2, 10), F(5, 10)), (F(4, 10), F(7, 10))])
    assert pairs(A) == [(F(2, 10), F(7, 10))]
    assert A.measure.value == F(1, 2)


def test_wraparound_splits():
    A = IntervalUnion.from_pairs([(F(9, 10), F(13, 10))])
    assert pairs(A) == [(F(0), F(3, 10)), (F(9, 10), F(1))]
    assert A.measure.value == F(2, 5)


def test_uncertain_ordering_rejected():
    e = F(1, 10**3)
    piece = CircleInterval(HPScalar(F(1, 2), e), HPScalar(F(1, 2) + e / 2, e))
    with pytest.raises(UncertainOrderError):
        iu_normalize([piece])


def test_random_pieces_match_grid_oracle():
    rng = np.random.default_rng(20)
    raw = []
    for _ in range(1000):
        lo = F(int(rng.integers(0, 10**6)), 10**6)
        raw.append(CircleInterval.of(lo, lo + F(int(rng.integers(1, 2000)), 10**6)))
    A = iu_normalize(raw)
    assert abs(float(A.measure.value) - grid_count(A, 10**6)) <= 2e-3


def test_json_round_trip():
    A = IntervalUnion.from_pairs([(F(1, 7), F(2, 7)), (F(1, 2), F(3, 4))])
    B = IntervalUnion.from_json(A.to_json())
    assert abs(B.measure.value - A.measure.value) < F(1, 2**100)


# -- set operations ---------------------------------------------------------

def test_intersection_example():
    A = IntervalUnion.from_pairs([(0, F(1, 2))])
    B = IntervalUnion.from_pairs([(F(1, 4), F(3, 4))])
    C = iu_intersect(A, B)
    assert pairs(C) == [(F(1, 4), F(1, 2))] and C.measure.value == F(1, 4)


def test_complement_examples():
    assert IntervalUnion.empty().is_empty
    assert iu_complement(IntervalUnion.empty()).measure.value == 1
    C = iu_complement(IntervalUnion.from_pairs([(F(1, 4), F(1, 2))]))
    assert pairs(C) == [(0, F(1, 4)), (F(1, 2), 1)]
    assert C.measure.value == F(3, 4)


unions = st.lists(
    st.tuples(st.integers(0, 999), st.integers(1, 400)).map(lambda t: (F(t[0], 1000), F(t[0] + t[1], 1000))),
    min_size=0, max_size=8).map(IntervalUnion.from_pairs)


@given(unions)
def test_a_cap_complement_is_empty(A):
    assert iu_intersect(A, iu_complement(A)).measure.value == 0


@given(unions)
def test_double_complement_round_trip(A):
    assert iu_complement(iu_complement(A)) == A


@given(unions, unions)
def test_inclusion_exclusion(A, B):
    lhs = iu_intersect(A, B).measure.value + iu_union(A, B).measure.value
    assert lhs == A.measure.value + B.measure.value


@given(unions, unions, unions)
@settings(max_examples=50)
def test_intersection_commutes_and_associates(A, B, C):
    assert iu_intersect(A, B) == iu_intersect(B, A)
    assert iu_intersect(iu_intersect(A, B), C) == iu_intersect(A, iu_intersect(B, C))


@given(unions, unions)
@settings(max_examples=30)
def test_intersection_matches_grid_oracle(A, B):
    G = 20000
    C = iu_intersect(A, B)
    assert len(C) <= len(A) + len(B)
    assert abs(float(C.measure.value) - grid_count(C, G)) <= max(len(C), 1) / G


# -- membership -------------------------------------------------------------

def test_half_open_boundaries():
    A = IntervalUnion.from_pairs([(0, F(1, 10))])
    assert iu_contains(A, HPScalar.exact(0)) is Membership.MEMBER
    assert iu_contains(A, HPScalar.exact(F(1, 10))) is Membership.NON_MEMBER


def test_uncertain_near_endpoint():
    A = IntervalUnion.from_pairs([(0, F(1, 10))])
    x = HPScalar(F(1, 10) - F(1, 10**4), F(1, 10**3))
    assert iu_contains(A, x) is Membership.UNCERTAIN


@given(unions, st.integers(0, 10**6 - 1))
def test_contains_agrees_with_exact_position(A, k):
    x = F(2 * k + 1, 2 * 10**6)
    expected = any(lo <= x < hi for lo, hi in pairs(A))
    assert (iu_contains(A, HPScalar.exact(x)) is Membership.MEMBER) == expected


def test_exact_endpoint_decides_despite_inexact_partner():
    e = F(1, 2**60)
    hi = F(1, 3) + F(1, 2**100)
    A = iu_normalize([CircleInterval(HPScalar.exact(0), HPScalar(hi, e))])
    assert iu_contains(A, HPScalar.exact(0)) is Membership.MEMBER
    assert iu_contains(A, HPScalar.exact(hi)) is Membership.UNCERTAIN
    B = iu_complement(A)
    assert iu_contains(B, HPScalar.exact(0)) is Membership.NON_MEMBER
