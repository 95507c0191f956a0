"""Certified scalars and exact arithmetic on finite unions of arcs of [0, 1).

``HPScalar`` carries a real number as an exact rational ``value`` together with a
rigorous absolute error bound ``err``.  Arithmetic between exact operands stays
exact (rational fast path); anything else is rounded to ``prec`` significant bits
and the rounding error is folded into ``err``.

``IntervalUnion`` stores its pieces as integer numerators over one common
denominator, so sweeps, complements and measures are exact integer arithmetic.
Endpoints that came from irrational quantities carry a uniform error ``eps`` (in
units of ``1/den``); ``merr`` bounds the measure of the symmetric difference
between the stored set and the true set.
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Iterable, Sequence

import gmpy2

from .errors import PrecisionError, UncertainOrderError

DEFAULT_WORK_BITS = 128
DEFAULT_GUARD_BITS = 40

Number = int | Fraction


class Verdict(enum.Enum):
    BELOW = "below"
    EQUAL = "equal"  # only reachable when both sides are exact
    ABOVE = "above"
    UNCERTAIN = "uncertain"


class Membership(enum.Enum):
    MEMBER = "member"
    NON_MEMBER = "non_member"
    UNCERTAIN = "uncertain"


def _ceil_dyadic(x: Fraction, bits: int = 32) -> Fraction:
    """Smallest dyadic with ``bits`` significant bits that is >= x (x >= 0)."""
    if x <= 0:
        return Fraction(0)
    num, den = x.numerator, x.denominator
    e = num.bit_length() - den.bit_length() - bits
    if e >= 0:
        m = -(-num // (den << e))
        return Fraction(m << e)
    m = -(-(num << -e) // den)
    return Fraction(m, 1 << -e)


def _round_sig(x: Fraction, prec: int) -> Fraction:
    """Round x to ``prec`` significant bits (round half up on magnitude)."""
    if x == 0:
        return x
    num, den = x.numerator, x.denominator
    sign = -1 if num < 0 else 1
    num = abs(num)
    e = num.bit_length() - den.bit_length() - prec
    if e >= 0:
        d = den << e
        m = (2 * num + d) // (2 * d)
        return Fraction(sign * (m << e))
    n2 = num << -e
    m = (2 * n2 + den) // (2 * den)
    return Fraction(sign * m, 1 << -e)


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(Decimal(x))
    if isinstance(x, Decimal):
        return Fraction(x)
    if type(x).__name__ == "mpfr":
        n, d = x.as_integer_ratio()
        return Fraction(int(n), int(d))
    if type(x).__name__ in ("mpz", "mpq"):
        return Fraction(int(x.numerator), int(x.denominator))
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


@dataclass(frozen=True, slots=True)
class HPScalar:
    """A real number known to lie in ``[value - err, value + err]``."""

    value: Fraction
    err: Fraction = Fraction(0)
    prec: int = DEFAULT_WORK_BITS

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", _as_fraction(self.value))
        if not isinstance(self.err, Fraction):
            object.__setattr__(self, "err", _as_fraction(self.err))
        if self.err < 0:
            raise ValueError("err must be nonnegative")

    # -- construction -----------------------------------------------------
    @classmethod
    def exact(cls, x, prec: int = DEFAULT_WORK_BITS) -> HPScalar:
        return cls(_as_fraction(x), Fraction(0), prec)

    @classmethod
    def from_mpfr(cls, x, ulps: int = 1, prec: int | None = None) -> HPScalar:
        """Wrap an mpfr result whose true value is within ``ulps`` ulps of x."""
        p = prec if prec is not None else x.precision
        value = _as_fraction(x)
        if value == 0:
            return cls(value, Fraction(0), p)
        _, exp = gmpy2.frexp(x)
        ulp = Fraction(2) ** (int(exp) - x.precision)
        return cls(value, ulps * ulp, p)

    def coerce(self, other) -> HPScalar:
        if isinstance(other, HPScalar):
            return other
        return HPScalar(_as_fraction(other), Fraction(0), self.prec)

    @property
    def is_exact(self) -> bool:
        return self.err == 0

    def _finish(self, value: Fraction, err: Fraction, prec: int) -> HPScalar:
        if err == 0:
            return HPScalar(value, err, prec)
        rounded = _round_sig(value, prec)
        err = _ceil_dyadic(err + abs(value - rounded))
        return HPScalar(rounded, err, prec)

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other) -> HPScalar:
        o = self.coerce(other)
        return self._finish(self.value + o.value, self.err + o.err, max(self.prec, o.prec))

    __radd__ = __add__

    def __sub__(self, other) -> HPScalar:
        o = self.coerce(other)
        return self._finish(self.value - o.value, self.err + o.err, max(self.prec, o.prec))

    def __rsub__(self, other) -> HPScalar:
        return self.coerce(other) - self

    def __neg__(self) -> HPScalar:
        return HPScalar(-self.value, self.err, self.prec)

    def __abs__(self) -> HPScalar:
        return HPScalar(abs(self.value), self.err, self.prec)

    def __mul__(self, other) -> HPScalar:
        o = self.coerce(other)
        err = abs(self.value) * o.err + abs(o.value) * self.err + self.err * o.err
        return self._finish(self.value * o.value, err, max(self.prec, o.prec))

    __rmul__ = __mul__

    def __truediv__(self, other) -> HPScalar:
        o = self.coerce(other)
        margin = abs(o.value) - o.err
        if margin <= 0:
            raise PrecisionError("division by a quantity whose error straddles zero")
        q = self.value / o.value
        err = (self.err + abs(q) * o.err) / margin if (self.err or o.err) else Fraction(0)
        return self._finish(q, err, max(self.prec, o.prec))

    def __rtruediv__(self, other) -> HPScalar:
        return self.coerce(other) / self

    # -- comparisons ------------------------------------------------------
    def compare(self, t) -> Verdict:
        """Three-valued comparison; EQUAL is only returned for exact ties."""
        o = self.coerce(t)
        d = self.value - o.value
        tol = self.err + o.err
        if tol == 0:
            if d == 0:
                return Verdict.EQUAL
            return Verdict.BELOW if d < 0 else Verdict.ABOVE
        if abs(d) <= tol:
            return Verdict.UNCERTAIN
        return Verdict.BELOW if d < 0 else Verdict.ABOVE

    @property
    def lower(self) -> Fraction:
        return self.value - self.err

    @property
    def upper(self) -> Fraction:
        return self.value + self.err

    def floor(self) -> int:
        lo, hi = math.floor(self.lower), math.floor(self.upper)
        if self.err and (lo != hi or self.upper == hi):
            raise PrecisionError("floor undecidable: value within err of an integer")
        return math.floor(self.value)

    def frac(self) -> HPScalar:
        """Fractional part as a circle point in [0, 1) (value reduced mod 1)."""
        v = self.value - math.floor(self.value)
        return HPScalar(v, self.err, self.prec)

    def __float__(self) -> float:
        return float(self.value)

    def log2_upper(self) -> int:
        """An integer >= log2(|value| + err), used for precision planning."""
        x = abs(self.value) + self.err
        if x == 0:
            return 0
        return max(0, x.numerator.bit_length() - x.denominator.bit_length() + 1)

    def to_decimal(self, digits: int | None = None) -> str:
        digits = digits or max(20, math.ceil(self.prec * math.log10(2)) + 2)
        return fraction_to_decimal(self.value, digits)

    def __repr__(self) -> str:
        if self.err == 0:
            return f"HPScalar({self.value})"
        return f"HPScalar({float(self.value)!r} ± {float(self.err):.3g})"


def fraction_to_decimal(x: Fraction, digits: int) -> str:
    with localcontext() as ctx:
        ctx.prec = digits
        d = Decimal(x.numerator) / Decimal(x.denominator)
    s = format(d, "f") if abs(d) >= Decimal("1e-6") or d == 0 else format(d, "e")
    return s


def mpfr_power_fraction(base: int | Fraction, exponent: Fraction, prec: int) -> HPScalar:
    """base**exponent for rational inputs, exact when the result is rational.

    The inexact path evaluates exp2(exponent * log2(base)) in mpfr at ``prec`` +
    guard bits; the error bound accounts for the rounding of each operation and
    its amplification through exp2.
    """
    base = _as_fraction(base)
    exponent = _as_fraction(exponent)
    if base <= 0:
        raise ValueError("base must be positive")
    exact = _exact_rational_power(base, exponent)
    if exact is not None:
        return HPScalar(exact, Fraction(0), prec)
    t_mag = abs(exponent) * max(1, abs(math.log2(base)) + 1)
    extra = 16 + int(t_mag).bit_length()
    work = prec + extra
    with gmpy2.context(gmpy2.get_context(), precision=work):
        b = gmpy2.mpq(base.numerator, base.denominator)
        e = gmpy2.mpq(exponent.numerator, exponent.denominator)
        lb = gmpy2.log2(gmpy2.mpfr(b))
        t = gmpy2.mpfr(e) * lb
        r = gmpy2.exp2(t)
    # relative error: t carries <= 3 ulp relative => abs err <= 3|t| 2^-work,
    # exp2 amplifies by ln 2, plus one final rounding.
    rel = Fraction(3 * (int(abs(t)) + 1) + 2, 1 << work)
    value = _as_fraction(r)
    return HPScalar(value, _ceil_dyadic(value * rel), prec)


def _exact_rational_power(base: Fraction, exponent: Fraction) -> Fraction | None:
    if exponent == 0:
        return Fraction(1)
    if base == 1:
        return Fraction(1)
    p, q = exponent.numerator, exponent.denominator
    roots = []
    for part in (base.numerator, base.denominator):
        r, ok = gmpy2.iroot(gmpy2.mpz(part), q)
        if not ok:
            return None
        roots.append(int(r))
    root = Fraction(roots[0], roots[1])
    if abs(p) * max(root.numerator.bit_length(), root.denominator.bit_length()) > 1 << 22:
        return None
    return root**p


# ---------------------------------------------------------------------------
# intervals


@dataclass(frozen=True, slots=True)
class CircleInterval:
    lo: HPScalar
    hi: HPScalar
    closed_lo: bool = True
    closed_hi: bool = False

    @classmethod
    def of(cls, lo, hi, closed_lo: bool = True, closed_hi: bool = False) -> CircleInterval:
        lo = lo if isinstance(lo, HPScalar) else HPScalar.exact(lo)
        hi = hi if isinstance(hi, HPScalar) else HPScalar.exact(hi)
        return cls(lo, hi, closed_lo, closed_hi)

    @property
    def length(self) -> HPScalar:
        return self.hi - self.lo


Piece = tuple  # (lo:int, hi:int, closed_lo:bool, closed_hi:bool)


def _merge_sorted(pieces: Iterable[Piece]) -> list[Piece]:
    out: list[list] = []
    for lo, hi, cl, ch in pieces:
        if out:
            cur = out[-1]
            if lo < cur[1] or (lo == cur[1] and (cur[3] or cl)):
                if lo == cur[0]:
                    cur[2] = cur[2] or cl
                if hi > cur[1]:
                    cur[1], cur[3] = hi, ch
                elif hi == cur[1]:
                    cur[3] = cur[3] or ch
                continue
        out.append([lo, hi, cl, ch])
    return [tuple(p) for p in out]


class IntervalUnion:
    """Finite disjoint union of arcs of [0, 1), sorted by left endpoint."""

    __slots__ = ("den", "_pieces", "eps", "merr", "prec", "exact_pts")

    def __init__(self, den: int, pieces: Sequence[Piece], eps: int = 0, merr: int = 0,
                 prec: int = DEFAULT_WORK_BITS, exact_pts=frozenset()):
        self.den = int(den)
        self._pieces = tuple(pieces)
        self.eps = int(eps)
        self.merr = int(merr)
        self.prec = prec
        # boundary numerators (mod den) known with zero error; eps does not widen them
        self.exact_pts = frozenset(exact_pts)

    # -- constructors -----------------------------------------------------
    @classmethod
    def empty(cls, prec: int = DEFAULT_WORK_BITS) -> IntervalUnion:
        return cls(1, (), 0, 0, prec)

    @classmethod
    def full(cls, prec: int = DEFAULT_WORK_BITS) -> IntervalUnion:
        return cls(1, ((0, 1, True, False),), 0, 0, prec)

    @classmethod
    def from_pairs(cls, pairs, prec: int = DEFAULT_WORK_BITS) -> IntervalUnion:
        """Convenience: half-open pieces from (lo, hi) numbers."""
        return iu_normalize([CircleInterval.of(lo, hi) for lo, hi in pairs], prec=prec)

    # -- views ------------------------------------------------------------
    def __len__(self) -> int:
        return len(self._pieces)

    @property
    def raw_pieces(self) -> tuple:
        return self._pieces

    @property
    def endpoint_err(self) -> Fraction:
        return Fraction(self.eps, self.den)

    @property
    def pieces(self) -> tuple[CircleInterval, ...]:
        e = Fraction(self.eps, self.den)
        return tuple(
            CircleInterval(HPScalar(Fraction(lo, self.den), e, self.prec),
                           HPScalar(Fraction(hi, self.den), e, self.prec), cl, ch)
            for lo, hi, cl, ch in self._pieces)

    @property
    def measure_numerator(self) -> int:
        return sum(hi - lo for lo, hi, _, _ in self._pieces)

    @property
    def measure(self) -> HPScalar:
        return HPScalar(Fraction(self.measure_numerator, self.den), Fraction(self.merr, self.den),
                        self.prec)

    @property
    def is_empty(self) -> bool:
        return not self._pieces

    @property
    def is_full(self) -> bool:
        return len(self._pieces) == 1 and self._pieces[0][:3] == (0, self.den, True)

    def rescaled(self, den: int) -> IntervalUnion:
        if den == self.den:
            return self
        k, r = divmod(den, self.den)
        if r:
            raise ValueError("new denominator must be a multiple of the old one")
        return IntervalUnion(den, [(lo * k, hi * k, cl, ch) for lo, hi, cl, ch in self._pieces],
                             self.eps * k, self.merr * k, self.prec,
                             {p * k for p in self.exact_pts})

    def rounded(self, bits: int) -> IntervalUnion:
        """Re-express endpoints as dyadics k/2**bits (adds one ulp of endpoint error)."""
        scale = 1 << bits
        den = self.den
        pieces = []
        for lo, hi, cl, ch in self._pieces:
            a = (lo * scale) // den
            b = -((-hi * scale) // den)
            if hi == den:
                b = scale
            pieces.append((a, b, cl, ch))
        eps = -((-self.eps * scale) // den) + 1
        merr = -((-self.merr * scale) // den) + 2 * len(pieces)
        return IntervalUnion(scale, _merge_sorted(pieces), eps, merr, self.prec)

    def __eq__(self, other) -> bool:
        if not isinstance(other, IntervalUnion):
            return NotImplemented
        L = math.lcm(self.den, other.den)
        a, b = self.rescaled(L), other.rescaled(L)
        return a._pieces == b._pieces

    def __hash__(self):
        return hash((self.den, self._pieces))

    def __repr__(self) -> str:
        parts = []
        for lo, hi, cl, ch in self._pieces[:6]:
            parts.append(f"{'[' if cl else '('}{lo / self.den:.6g},{hi / self.den:.6g}{']' if ch else ')'}")
        more = "" if len(self._pieces) <= 6 else f" ... ({len(self._pieces)} pieces)"
        return f"IntervalUnion({' U '.join(parts) or 'empty'}{more})"

    # -- serialization ----------------------------------------------------
    def to_json(self) -> dict:
        digits = max(20, math.ceil(self.prec * math.log10(2)) + 2)
        m = self.measure
        return {
            "pieces": [
                {"lo": fraction_to_decimal(Fraction(lo, self.den), digits),
                 "hi": fraction_to_decimal(Fraction(hi, self.den), digits),
                 "closed_lo": cl, "closed_hi": ch}
                for lo, hi, cl, ch in self._pieces
            ],
            "measure": fraction_to_decimal(m.value, digits),
            "err": fraction_to_decimal(m.err + Fraction(self.eps, self.den), 8),
        }

    @classmethod
    def from_json(cls, data: dict, prec: int = DEFAULT_WORK_BITS) -> IntervalUnion:
        err = Fraction(Decimal(data.get("err", "0")))
        raw = [CircleInterval(HPScalar(Fraction(Decimal(p["lo"])), err, prec),
                              HPScalar(Fraction(Decimal(p["hi"])), err, prec),
                              bool(p.get("closed_lo", True)), bool(p.get("closed_hi", False)))
               for p in data["pieces"]]
        return iu_normalize(raw, prec=prec)


# ---------------------------------------------------------------------------
# operations


def iu_normalize(raw: Sequence[CircleInterval], prec: int = DEFAULT_WORK_BITS,
                 den_cap_bits: int | None = None) -> IntervalUnion:
    """Wrap raw arcs mod 1, sort, and merge overlapping or touching pieces.

    Endpoints may lie in [-1, 2].  A piece whose endpoints cannot be ordered
    within their error bounds raises ``UncertainOrderError``.  Degenerate
    pieces (single points) are dropped: they carry no measure.
    """
    if not raw:
        return IntervalUnion.empty(prec)
    den_cap_bits = den_cap_bits or 4 * prec + 64
    values = []
    max_err = Fraction(0)
    for piece in raw:
        for end in (piece.lo, piece.hi):
            if not (-1 <= end.value <= 2):
                raise ValueError(f"endpoint {float(end.value)} outside [-1, 2]")
            max_err = max(max_err, end.err)
        values.append((piece.lo.value, piece.hi.value, piece.closed_lo, piece.closed_hi,
                       piece.lo.err + piece.hi.err))
    den = 1
    for lo, hi, *_ in values:
        den = math.lcm(den, lo.denominator, hi.denominator)
        if den.bit_length() > den_cap_bits:
            break
    extra_ulps = 0
    if den.bit_length() > den_cap_bits:
        den = 1 << prec
        extra_ulps = 1
    scaled = []
    exact_pts = set()
    for piece, (lo, hi, cl, ch, e) in zip(raw, values):
        a, b = lo * den, hi * den
        if extra_ulps:
            a, b = math.floor(a), math.ceil(b)
        else:
            exact_pts.update(int(v) % den for v, end in ((a, piece.lo), (b, piece.hi)) if not end.err)
        scaled.append((int(a), int(b), cl, ch, e))
    eps = math.ceil(max_err * den) + extra_ulps
    pieces: list[Piece] = []
    zero_included = False
    for (a, b, cl, ch, e), orig in zip(scaled, values):
        if eps and abs(b - a) <= 2 * eps:
            raise UncertainOrderError(
                f"piece [{float(orig[0])}, {float(orig[1])}] has endpoints within their error bound")
        if b < a:
            raise ValueError(f"piece with lo > hi: [{float(orig[0])}, {float(orig[1])}]")
        if b == a:
            continue
        if b - a >= den:
            return IntervalUnion(den, [(0, den, True, False)], eps, 2 * len(raw) * eps, prec,
                                 exact_pts)
        k = a // den
        a -= k * den
        b -= k * den
        if b <= den:
            if b == den and ch:
                zero_included = True
                ch = False
            pieces.append((a, b, cl, ch if b < den else False))
        else:
            pieces.append((a, den, cl, False))
            pieces.append((0, b - den, True, ch))
    pieces.sort(key=lambda p: (p[0], not p[2]))
    merged = _merge_sorted(pieces)
    if zero_included and merged and merged[0][0] == 0:
        lo, hi, _, ch = merged[0]
        merged[0] = (lo, hi, True, ch)
    return IntervalUnion(den, merged, eps, 2 * len(pieces) * eps, prec, exact_pts)


def _common(a: IntervalUnion, b: IntervalUnion) -> tuple[IntervalUnion, IntervalUnion]:
    L = math.lcm(a.den, b.den)
    return a.rescaled(L), b.rescaled(L)


def iu_intersect(A: IntervalUnion, B: IntervalUnion) -> IntervalUnion:
    """Exact intersection by a linear sweep over both sorted piece lists."""
    prec = max(A.prec, B.prec)
    if A.is_empty or B.is_empty:
        return IntervalUnion(1, (), 0, 0, prec)
    A, B = _common(A, B)
    pa, pb = A._pieces, B._pieces
    out = []
    i = j = 0
    while i < len(pa) and j < len(pb):
        alo, ahi, acl, ach = pa[i]
        blo, bhi, bcl, bch = pb[j]
        if alo > blo:
            lo, cl = alo, acl
        elif blo > alo:
            lo, cl = blo, bcl
        else:
            lo, cl = alo, acl and bcl
        if ahi < bhi:
            hi, ch = ahi, ach
            i += 1
        elif bhi < ahi:
            hi, ch = bhi, bch
            j += 1
        else:
            hi, ch = ahi, ach and bch
            i += 1
            j += 1
        if lo < hi:
            out.append((lo, hi, cl, ch))
    return IntervalUnion(A.den, out, max(A.eps, B.eps), A.merr + B.merr, prec,
                         A.exact_pts & B.exact_pts)


def iu_union(A: IntervalUnion, B: IntervalUnion) -> IntervalUnion:
    prec = max(A.prec, B.prec)
    A, B = _common(A, B)
    merged = sorted(A._pieces + B._pieces, key=lambda p: (p[0], not p[2]))
    return IntervalUnion(A.den, _merge_sorted(merged), max(A.eps, B.eps), A.merr + B.merr, prec,
                         A.exact_pts & B.exact_pts)


def iu_complement(A: IntervalUnion) -> IntervalUnion:
    """Complement in [0, 1).  Isolated boundary points are dropped (measure zero)."""
    den = A.den
    if A.is_empty:
        return IntervalUnion(1, ((0, 1, True, False),), 0, 0, A.prec)
    out = []
    cursor, cursor_closed = 0, True
    for lo, hi, cl, ch in A._pieces:
        if lo > cursor:
            out.append((cursor, lo, cursor_closed, not cl))
        cursor, cursor_closed = hi, not ch
    if cursor < den:
        out.append((cursor, den, cursor_closed, False))
    return IntervalUnion(den, out, A.eps, A.merr, A.prec, A.exact_pts)


def _boundaries(A: IntervalUnion) -> list[int]:
    """Endpoints that are genuine boundaries on the circle (glued 0 ~ 1 excluded)."""
    if A.is_full:
        return []
    pts = []
    for lo, hi, _, _ in A._pieces:
        pts.append(lo)
        pts.append(hi)
    den = A.den
    first, last = A._pieces[0], A._pieces[-1]
    if first[0] == 0 and first[2] and last[1] == den:
        pts = [p for p in pts if p not in (0, den)]
    return sorted(set(p % den for p in pts))


def iu_contains(A: IntervalUnion, x: HPScalar) -> Membership:
    """Membership of a circle point, honoring closed flags for exact ties.

    Returns UNCERTAIN whenever the error ball of x (widened by the endpoint
    error of A) meets a boundary point of A on the circle.
    """
    if not isinstance(x, HPScalar):
        x = HPScalar.exact(x)
    v = x.value - math.floor(x.value)
    den = A.den
    if A.is_empty:
        return Membership.NON_MEMBER
    if A.is_full:
        return Membership.MEMBER
    tol = x.err + Fraction(A.eps, den)
    if tol:
        bnd = _boundaries(A)
        if bnd:
            pos = v * den
            k = bisect.bisect_left(bnd, pos)
            for idx in (k - 1, k, 0, len(bnd) - 1):
                if 0 <= idx < len(bnd):
                    d = abs(pos - bnd[idx])
                    d = min(d, den - d)
                    r = x.err if bnd[idx] in A.exact_pts else tol
                    if r and d <= r * den:
                        return Membership.UNCERTAIN
    pos = v * den
    los = [p[0] for p in A._pieces]
    k = bisect.bisect_right(los, pos) - 1
    if k < 0:
        return Membership.NON_MEMBER
    lo, hi, cl, ch = A._pieces[k]
    if pos == lo:
        return Membership.MEMBER if cl else Membership.NON_MEMBER
    if pos < hi:
        return Membership.MEMBER
    if pos == hi and ch:
        return Membership.MEMBER
    return Membership.NON_MEMBER


def iu_measure_of_prefix(A: IntervalUnion, x_num: int) -> int:
    """Numerator of measure(A ∩ [0, x_num/den]) for 0 <= x_num <= den."""
    total = 0
    for lo, hi, _, _ in A._pieces:
        if lo >= x_num:
            break
        total += min(hi, x_num) - lo
    return total
