"""Certified fractional parts {u_n y} and hitting sets Lambda_y = {n : {u_n y} in I_n}.

Two routes compute the same verdicts:

* ``frac`` + ``iu_contains`` work one n at a time with HPScalar values and exact
  target unions.  Rational y stays exact.
* ``WindowEngine`` produces W = floor(2**64 {u_n y}) for many n and many seeds at
  once (digit shifts, incremental p**n Y mod 2**M, fixed-point products), and
  ``classify`` decides membership on uint64 arcs.

Both declare the error of a computed fractional part as 2**-g (g = guard bits);
the kernels actually achieve about 2**-(g+8).
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import PrecisionError
from .oracle import MASK64, FractionalOracle
from .sequences import (
    ARC_SLACK,
    DEFAULT_BIT_CAP,
    GrowthSequence,
    IntegerSet,
    TargetScheme,
    stretched_mpfr,
)
from .torus import HPScalar, Membership, iu_contains

EXTRA_BITS = 10
DENSE_BIT_LIMIT = 1 << 26
MEMBER, NON_MEMBER, UNCERTAIN = 1, 0, -1


def _ceil_log2(x: Fraction) -> int:
    if x <= 1:
        return 0
    return max(0, x.numerator.bit_length() - x.denominator.bit_length() + 1)


def _power_of_two_exponent(q: int) -> int | None:
    return q.bit_length() - 1 if q > 0 and q & (q - 1) == 0 else None


def frac(y: FractionalOracle, s: GrowthSequence, n: int, guard_bits: int | None = None,
         bit_cap: int = DEFAULT_BIT_CAP) -> HPScalar:
    """{u_n y} with err <= 2**-g (exact when y and u_n are rational)."""
    g = guard_bits or y.guard_bits
    u = s.exact_value(n)
    if y.is_exact:
        yv = y.exact_value
        if u is not None:
            v = u * yv
            return HPScalar(v - math.floor(v))
        prec = math.ceil(s.log2_value(n)) + g + 16
        uh = s.value(n, prec, bit_cap)
        return (uh * yv).frac()
    W = _window_single(y, s, n, g, bit_cap)
    return HPScalar(Fraction(W, 1 << 64), Fraction(1, 1 << g), 64 + g)


def _window_single(y: FractionalOracle, s: GrowthSequence, n: int, g: int, bit_cap: int) -> int:
    u = s.exact_value(n)
    if u is not None:
        if u.numerator & (u.numerator - 1) == 0 and u.denominator == 1:
            return y.window64(u.numerator.bit_length() - 1)
        return _rational_window(u.numerator, u.denominator, y, _y_bits(u, g), g)
    F = g + EXTRA_BITS + 2
    log2u = s.log2_value(n)
    U = _stretched_fixed(s, n, F, log2u, bit_cap)
    K = math.ceil(log2u) + g + EXTRA_BITS
    Y = gmpy2.mpz(y.prefix(K))
    return int(((U * Y) >> (F + K - 64)) & MASK64)


def _y_bits(u: Fraction, g: int) -> int:
    return max(64, _ceil_log2(u) + g + EXTRA_BITS)


def _rational_window(p: int, q: int, y: FractionalOracle, K: int, g: int) -> int:
    Y = gmpy2.mpz(y.prefix(K))
    mod = gmpy2.mpz(q) << K
    X = (gmpy2.mpz(p) * Y) % mod
    return int((X << 64) // mod)


def _stretched_fixed(s: GrowthSequence, n: int, F: int, log2u: float, bit_cap: int):
    """floor(u_n 2**F) with |U 2**-F - u_n| <= 2**-(F-1)."""
    prec = math.ceil(log2u) + F + 4
    u, _, _ = stretched_mpfr(s.alpha, s.b, n, prec, bit_cap)
    return gmpy2.mpz(gmpy2.floor(gmpy2.mul_2exp(u, F)))


# ---------------------------------------------------------------------------
# ensemble kernels


class WindowEngine:
    """W[s, i] = floor(2**64 {u_{n_i} y_s}) for increasing chunks of n.

    Chunks must be passed in increasing order; the incremental geometric path
    keeps p**n Y mod 2**M per seed between calls.
    """

    def __init__(self, oracles, s: GrowthSequence, nmax: int, guard_bits: int = 40,
                 bit_cap: int = DEFAULT_BIT_CAP, dense: bool | None = None):
        self.oracles = list(oracles)
        if any(o.is_exact for o in self.oracles):
            raise ValueError("window kernels take bitstream oracles; use frac() for rational y")
        self.s, self.nmax, self.g, self.bit_cap = s, int(nmax), guard_bits, bit_cap
        self.precision_failures: list[int] = []
        self.mode = self._pick_mode(dense)
        self._last_n = 0

    def _pick_mode(self, dense) -> str:
        s = self.s
        if s.family == "geometric" and s.alpha.denominator == 1 and \
                _power_of_two_exponent(s.alpha.numerator):
            self.k = _power_of_two_exponent(s.alpha.numerator)
            span = self.k * self.nmax + 64
            if dense is None:
                dense = span <= DENSE_BIT_LIMIT
            if dense:
                self._bytes = [o.byte_array(span // 8 + 16) for o in self.oracles]
                return "shift-dense"
            return "shift-sparse"
        if s.family == "geometric" and _power_of_two_exponent(s.alpha.denominator) is not None:
            self.k = _power_of_two_exponent(s.alpha.denominator)
            self.p = s.alpha.numerator
            self.B = max(64, math.ceil(self.nmax * math.log2(s.alpha))) + self.g + EXTRA_BITS
            self.M = self.k * self.nmax + self.B
            if self.B > self.bit_cap:
                raise PrecisionError(f"geometric kernel needs {self.B} bits of y",
                                     required_bits=self.B)
            self._mask = (gmpy2.mpz(1) << self.M) - 1
            self._Z = [gmpy2.mpz(o.prefix(self.B)) for o in self.oracles]
            self._n = 0
            return "incremental"
        self.B = max(64, math.ceil(self._log2u_max())) + self.g + EXTRA_BITS
        self._Y = [gmpy2.mpz(o.prefix(min(self.B, self.bit_cap))) for o in self.oracles]
        return "per-n"

    def _log2u_max(self) -> float:
        return self.s.log2_value(self.nmax)

    def windows(self, ns: np.ndarray) -> np.ndarray:
        ns = np.asarray(ns, dtype=np.int64)
        if ns.size == 0:
            return np.zeros((len(self.oracles), 0), dtype=np.uint64)
        if int(ns[0]) <= self._last_n or np.any(np.diff(ns) <= 0):
            raise ValueError("chunks must be strictly increasing across calls")
        if int(ns[-1]) > self.nmax:
            raise ValueError("n beyond the engine horizon")
        self._last_n = int(ns[-1])
        return getattr(self, "_w_" + self.mode.replace("-", "_"))(ns)

    def _w_shift_dense(self, ns):
        pos = ns * self.k
        q, r = pos // 8, (pos % 8).astype(np.uint64)
        out = np.empty((len(self.oracles), ns.size), dtype=np.uint64)
        for i, B in enumerate(self._bytes):
            hi = sliding_window_view(B, 8)[q]
            hi = np.ascontiguousarray(hi).view(">u8").reshape(-1).astype(np.uint64)
            lo = B[q + 8].astype(np.uint64)
            with np.errstate(over="ignore"):
                out[i] = (hi << r) | (lo >> (np.uint64(8) - r))
        return out

    def _w_shift_sparse(self, ns):
        out = np.empty((len(self.oracles), ns.size), dtype=np.uint64)
        for i, o in enumerate(self.oracles):
            out[i] = np.array([o.window64(self.k * int(n)) for n in ns], dtype=np.uint64)
        return out

    def _w_incremental(self, ns):
        out = np.empty((len(self.oracles), ns.size), dtype=np.uint64)
        targets = [int(n) for n in ns]
        p, k, B, mask = self.p, self.k, self.B, self._mask
        Z = self._Z
        n = self._n
        j = 0
        while j < len(targets):
            n += 1
            for i in range(len(Z)):
                Z[i] = (Z[i] * p) & mask
            if n == targets[j]:
                shift = k * n + B - 64
                for i in range(len(Z)):
                    out[i, j] = int((Z[i] >> shift) & MASK64)
                j += 1
        self._n = n
        return out

    def _w_per_n(self, ns):
        out = np.zeros((len(self.oracles), ns.size), dtype=np.uint64)
        s, g = self.s, self.g
        F = g + EXTRA_BITS + 2
        for j, n in enumerate(ns):
            n = int(n)
            log2u = s.log2_value(n)
            need = math.ceil(log2u) + g + EXTRA_BITS
            if need > self.B or need > self.bit_cap:
                self.precision_failures.append(n)
                continue
            B = self.B
            try:
                u = s.exact_value(n) if s.family != "stretched" else None
                if u is None:
                    U = _stretched_fixed(s, n, F, log2u, self.bit_cap)
                    sh = F + B - 64
                    for i, Y in enumerate(self._Y):
                        out[i, j] = int(((U * Y) >> sh) & MASK64)
                elif u.denominator == 1:
                    un = gmpy2.mpz(u.numerator)
                    for i, Y in enumerate(self._Y):
                        out[i, j] = int(((un * Y) >> (B - 64)) & MASK64)
                else:
                    un, mod = gmpy2.mpz(u.numerator), gmpy2.mpz(u.denominator) << B
                    for i, Y in enumerate(self._Y):
                        out[i, j] = int((((un * Y) % mod) << 64) // mod)
            except PrecisionError:
                self.precision_failures.append(n)
        return out


def classify(W: np.ndarray, lo: np.ndarray, length: np.ndarray, full: np.ndarray,
             tol: int) -> np.ndarray:
    """Membership verdicts (1 member, 0 non-member, -1 uncertain) on uint64 arcs.

    W has shape (seeds, n); lo/length have shape (n, arcs).  A point is uncertain
    when its circular distance to any arc boundary is at most ``tol``.
    """
    W = np.atleast_2d(W)
    member = np.zeros(W.shape, dtype=bool)
    near = np.zeros(W.shape, dtype=bool)
    t = np.uint64(tol)
    with np.errstate(over="ignore"):
        for j in range(lo.shape[1]):
            d = W - lo[:, j]
            member |= d < length[:, j]
            near |= (d <= t) | ((np.uint64(0) - d) <= t)
            e = W - (lo[:, j] + length[:, j])
            near |= (e <= t) | ((np.uint64(0) - e) <= t)
    verdict = np.where(member, MEMBER, NON_MEMBER).astype(np.int8)
    verdict[near] = UNCERTAIN
    verdict[:, full] = MEMBER
    return verdict


def kernel_tolerance(guard_bits: int) -> int:
    return (1 << (64 - guard_bits)) + ARC_SLACK


# ---------------------------------------------------------------------------
# hitting sets


@dataclass
class HittingSet:
    ns: np.ndarray
    horizon: int
    uncertain: np.ndarray
    params: dict = field(default_factory=dict)
    precision_failures: tuple = ()

    @property
    def uncertain_count(self) -> int:
        return int(self.uncertain.size)

    def __len__(self) -> int:
        return int(self.ns.size)

    def count_upto(self, N) -> np.ndarray | int:
        c = np.searchsorted(self.ns, N, side="right")
        return int(c) if np.ndim(c) == 0 else c.astype(np.int64)

    def prefix(self, N: int) -> HittingSet:
        return HittingSet(self.ns[self.ns <= N], N, self.uncertain[self.uncertain <= N],
                          dict(self.params), tuple(n for n in self.precision_failures if n <= N))

    def to_json(self) -> dict:
        return {"params": self.params, "horizon": self.horizon,
                "ns": self.ns.tolist(), "uncertain": self.uncertain.tolist()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n"])
        w.writerows([[int(n)] for n in self.ns])
        return buf.getvalue()

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def _params(s, t, restrict, y=None) -> dict:
    out = {"u": s.to_json(), "target": t.to_json(), "A": restrict.to_json()}
    if y is not None:
        out["y"] = y.to_json()
    return out


def _candidates(restrict: IntegerSet, N: int, chunk: int):
    if restrict.kind == "all":
        for start in range(1, N + 1, chunk):
            yield np.arange(start, min(N, start + chunk - 1) + 1, dtype=np.int64)
        return
    for arr in restrict.iter_chunks(N):
        for i in range(0, arr.size, chunk):
            yield arr[i:i + chunk]


def hitting_set_exact(y: FractionalOracle, s: GrowthSequence, t: TargetScheme, N: int,
                      restrict: IntegerSet | None = None, guard_bits: int | None = None,
                      bit_cap: int = DEFAULT_BIT_CAP) -> HittingSet:
    """One n at a time through HPScalar fractional parts and exact target unions."""
    restrict = restrict or IntegerSet.all()
    hits, unc, failures = [], [], []
    for arr in _candidates(restrict, N, 1 << 16):
        for n in arr:
            n = int(n)
            try:
                x = frac(y, s, n, guard_bits, bit_cap)
            except PrecisionError:
                unc.append(n)
                failures.append(n)
                continue
            v = iu_contains(t.target(n), x)
            if v is Membership.MEMBER:
                hits.append(n)
            elif v is Membership.UNCERTAIN:
                unc.append(n)
    return HittingSet(np.array(hits, dtype=np.int64), N, np.array(unc, dtype=np.int64),
                      _params(s, t, restrict, y), tuple(failures))


def hitting_ensemble(oracles, s: GrowthSequence, t: TargetScheme, N: int,
                     restrict: IntegerSet | None = None, guard_bits: int = 40,
                     bit_cap: int = DEFAULT_BIT_CAP, chunk: int = 1 << 16,
                     workers: int = 1) -> list[HittingSet]:
    """Hitting sets for many bitstream oracles sharing u_n and targets."""
    oracles = list(oracles)
    restrict = restrict or IntegerSet.all()
    if workers > 1 and len(oracles) > 1:
        groups = [oracles[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_ensemble_worker, [(g, s, t, N, restrict, guard_bits, bit_cap,
                                                    chunk) for g in groups]))
        by_seed = {}
        for g, res in zip(groups, parts):
            for o, h in zip(g, res):
                by_seed[id(o)] = h
        return [by_seed[id(o)] for o in oracles]
    if s.horizon is not None:
        N = min(N, s.horizon)
    engine = WindowEngine(oracles, s, N, guard_bits, bit_cap)
    tol = kernel_tolerance(guard_bits)
    hits = [[] for _ in oracles]
    unc = [[] for _ in oracles]
    for ns in _candidates(restrict, N, chunk):
        if ns.size == 0:
            continue
        W = engine.windows(ns)
        lo, length, full = t.arcs64(ns)
        V = classify(W, lo, length, full, tol)
        if engine.precision_failures:
            bad = np.isin(ns, engine.precision_failures)
            V[:, bad] = UNCERTAIN
        for i in range(len(oracles)):
            hits[i].append(ns[V[i] == MEMBER])
            unc[i].append(ns[V[i] == UNCERTAIN])
    empty = np.zeros(0, dtype=np.int64)
    return [HittingSet(np.concatenate(h) if h else empty, N,
                       np.concatenate(u) if u else empty, _params(s, t, restrict, o),
                       tuple(engine.precision_failures))
            for o, h, u in zip(oracles, hits, unc)]


def _ensemble_worker(args):
    oracles, s, t, N, restrict, g, cap, chunk = args
    return hitting_ensemble(oracles, s, t, N, restrict, g, cap, chunk)


def hitting_set(y: FractionalOracle, s: GrowthSequence, t: TargetScheme, N: int,
                restrict: IntegerSet | None = None, guard_bits: int | None = None,
                bit_cap: int = DEFAULT_BIT_CAP, method: str = "auto") -> HittingSet:
    """Lambda_y restricted to ``restrict`` and [1, N].

    Rational y always goes through the exact route; bitstream y uses the window
    kernels unless ``method="exact"``.
    """
    g = guard_bits or y.guard_bits
    if y.is_exact or method == "exact":
        return hitting_set_exact(y, s, t, N, restrict, g, bit_cap)
    return hitting_ensemble([y], s, t, N, restrict, g, bit_cap)[0]


# ---------------------------------------------------------------------------
# law of large numbers


def geometric_grid(n_min: float, n_max: float, eta: float = 10 ** 0.25) -> np.ndarray:
    if eta <= 1:
        raise ValueError("grid ratio must exceed 1")
    k = int(math.floor(math.log(n_max / n_min) / math.log(eta) + 1e-9))
    grid = np.unique(np.round(n_min * eta ** np.arange(k + 1)).astype(np.int64))
    return grid


def counting_ratio(hits: HittingSet, s: GrowthSequence, t: TargetScheme, N_grid) -> list[dict]:
    """Rows (N, count, uncertain, count/N^(1-a), sum sigma, count/sum sigma, (1-a) count/N^(1-a))."""
    from .measurelab import sigma_values

    grid = np.asarray(N_grid, dtype=np.int64)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("N grid must be strictly increasing")
    a = float(t.a)
    sig = np.cumsum(sigma_values(s, t, np.arange(1, int(grid[-1]) + 1)))
    rows = []
    for N in grid:
        N = int(N)
        count = hits.count_upto(N)
        unc = int(np.searchsorted(hits.uncertain, N, side="right"))
        norm = N ** (1 - a)
        ssum = float(sig[N - 1])
        rows.append({"N": N, "count": count, "uncertain": unc, "ratio": count / norm,
                     "sigma_sum": ssum, "ratio_sigma": count / ssum if ssum else math.nan,
                     "ratio_scaled": (1 - a) * count / norm})
    return rows
