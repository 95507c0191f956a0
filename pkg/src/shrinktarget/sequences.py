"""Growth sequences u_n, shrinking target schemes I_n, and integer test sets A."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import gmpy2
import numpy as np

from .errors import PrecisionError
from .seeding import counter_uniforms, uniform64
from .torus import (
    DEFAULT_WORK_BITS,
    CircleInterval,
    HPScalar,
    IntervalUnion,
    _as_fraction,
    _ceil_dyadic,
    _exact_rational_power,
    iu_normalize,
    mpfr_power_fraction,
)

DEFAULT_BIT_CAP = 1 << 22
FAMILIES = ("geometric", "stretched", "polynomial", "explicit")


def _frac_or_none(x):
    return None if x is None else _as_fraction(x)


@dataclass(frozen=True)
class GrowthSequence:
    family: str
    alpha: Fraction | None = None
    b: Fraction | None = None
    m: int | None = None
    values: tuple | None = None
    declared_delta: Fraction | None = None
    declared_c: Fraction | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        for name in ("alpha", "b", "declared_delta", "declared_c"):
            object.__setattr__(self, name, _frac_or_none(getattr(self, name)))
        if self.family in ("geometric", "stretched"):
            if self.alpha is None or self.alpha <= 1:
                raise ValueError("alpha must be > 1")
        if self.family == "stretched" and (self.b is None or not 0 < self.b <= 1):
            raise ValueError("b must lie in (0, 1]")
        if self.family == "polynomial" and (self.m is None or int(self.m) < 1):
            raise ValueError("m must be an integer >= 1")
        if self.family == "explicit":
            vals = tuple(_as_fraction(v) for v in (self.values or ()))
            if not vals:
                raise ValueError("explicit sequence needs values")
            if vals[0] < 1 or any(b <= a for a, b in zip(vals, vals[1:])):
                raise ValueError("explicit values must be strictly increasing with u_1 >= 1")
            object.__setattr__(self, "values", vals)
        if self.declared_delta is not None and self.declared_delta < 0:
            raise ValueError("declared_delta must be >= 0")
        if self.declared_c is not None and self.declared_c <= 0:
            raise ValueError("declared_c must be > 0")

    # -- constructors -----------------------------------------------------
    @classmethod
    def geometric(cls, alpha, **kw) -> GrowthSequence:
        return cls("geometric", alpha=alpha, **kw)

    @classmethod
    def stretched(cls, alpha, b, **kw) -> GrowthSequence:
        return cls("stretched", alpha=alpha, b=b, **kw)

    @classmethod
    def polynomial(cls, m: int, **kw) -> GrowthSequence:
        return cls("polynomial", m=int(m), **kw)

    @classmethod
    def explicit(cls, values, **kw) -> GrowthSequence:
        return cls("explicit", values=tuple(values), **kw)

    # -- evaluation -------------------------------------------------------
    @property
    def horizon(self) -> int | None:
        return len(self.values) if self.family == "explicit" else None

    @property
    def is_integer_valued(self) -> bool:
        if self.family == "polynomial":
            return True
        if self.family == "geometric":
            return self.alpha.denominator == 1
        if self.family == "explicit":
            return all(v.denominator == 1 for v in self.values)
        return False

    def log2_value(self, n: int) -> float:
        """Floating approximation of log2(u_n), for precision planning only."""
        if self.family == "geometric":
            return n * math.log2(self.alpha)
        if self.family == "stretched":
            return n ** float(self.b) * math.log2(self.alpha)
        if self.family == "polynomial":
            return self.m * math.log2(n)
        return math.log2(self.values[n - 1])

    def log_values(self, ns: np.ndarray) -> np.ndarray:
        ns = np.asarray(ns, dtype=np.float64)
        if self.family == "geometric":
            return ns * math.log(self.alpha)
        if self.family == "stretched":
            return ns ** float(self.b) * math.log(self.alpha)
        if self.family == "polynomial":
            return self.m * np.log(ns)
        vals = np.array([float(v) for v in self.values])
        return np.log(vals[ns.astype(np.int64) - 1])

    def exact_value(self, n: int) -> Fraction | None:
        """u_n as an exact rational when it is one, else None."""
        self._check_n(n)
        if self.family == "geometric":
            return self.alpha**n
        if self.family == "polynomial":
            return Fraction(n**self.m)
        if self.family == "explicit":
            return self.values[n - 1]
        t = _exact_rational_power(Fraction(n), self.b)
        if t is None:
            return None
        return _exact_rational_power(self.alpha, t)

    def value(self, n: int, precision: int = DEFAULT_WORK_BITS,
              bit_cap: int = DEFAULT_BIT_CAP) -> HPScalar:
        """u_n with relative error at most 2**-precision."""
        exact = self.exact_value(n)
        if exact is not None:
            return HPScalar(exact, Fraction(0), precision)
        return _stretched_value(self.alpha, self.b, n, precision, bit_cap)

    def _check_n(self, n: int):
        if n < 1:
            raise ValueError("n must be >= 1")
        if self.family == "explicit" and n > len(self.values):
            raise ValueError(f"explicit sequence has only {len(self.values)} terms")

    def to_json(self) -> dict:
        out = {"family": self.family}
        if self.alpha is not None:
            out["alpha"] = str(self.alpha)
        if self.b is not None:
            out["b"] = str(self.b)
        if self.m is not None:
            out["m"] = self.m
        if self.values is not None:
            out["values"] = [str(v) for v in self.values]
        if self.declared_delta is not None:
            out["delta"] = str(self.declared_delta)
        if self.declared_c is not None:
            out["c"] = str(self.declared_c)
        return out


def stretched_mpfr(alpha: Fraction, b: Fraction, n: int, precision: int,
                   bit_cap: int = DEFAULT_BIT_CAP):
    """alpha ** (n ** b) as an MPFR float plus a certified relative error bound.

    With every MPFR operation correctly rounded at w bits, the relative error
    of L = n**b * log2(alpha) is at most (4 P + 5) 2**-w where P = b ln n, and
    exp2 multiplies it by ln 2 * L.  We size w so the total is <= 2**-precision.
    Returns (u, K, w) meaning |u - true| <= u * K * 2**-w.
    """
    log2_u = n ** float(b) * math.log2(alpha)
    P = float(b) * math.log(n)
    K = (int(log2_u) + 2) * (int(4 * P) + 6) + 1
    w = precision + K.bit_length() + 2
    if w > bit_cap:
        raise PrecisionError(f"u_{n} needs {w} bits, above the cap {bit_cap}", required_bits=w)
    with gmpy2.context(gmpy2.get_context(), precision=w):
        bq = gmpy2.mpfr(gmpy2.mpq(b.numerator, b.denominator))
        t = gmpy2.exp(bq * gmpy2.log(gmpy2.mpfr(n)))
        la = gmpy2.log2(gmpy2.mpfr(gmpy2.mpq(alpha.numerator, alpha.denominator)))
        u = gmpy2.exp2(t * la)
    return u, K, w


def _stretched_value(alpha: Fraction, b: Fraction, n: int, precision: int,
                     bit_cap: int) -> HPScalar:
    u, K, w = stretched_mpfr(alpha, b, n, precision, bit_cap)
    value = _as_fraction(u)
    return HPScalar(value, _ceil_dyadic(value * Fraction(K, 1 << w)), precision)


# ---------------------------------------------------------------------------
# sublacunarity


@dataclass(frozen=True)
class SublacunarityReport:
    checked_N: int
    delta: float
    c: float
    min_margin: float
    argmin: int
    beta_hat: float
    beta_lemma: float
    passed: bool
    diagnostics: tuple = ()

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__} | {
            "diagnostics": list(self.diagnostics)}


def _log_ratios(s: GrowthSequence, N: int) -> np.ndarray:
    """rho_n = ln(u_{n+1}/u_n) for n = 1..N-1, computed without cancellation."""
    n = np.arange(1, N, dtype=np.float64)
    if s.family == "geometric":
        return np.full(N - 1, math.log(s.alpha))
    if s.family == "polynomial":
        return s.m * np.log1p(1.0 / n)
    if s.family == "stretched":
        b = float(s.b)
        return math.log(s.alpha) * n**b * np.expm1(b * np.log1p(1.0 / n))
    vals = np.array([float(v) for v in s.values[:N]])
    return np.log(vals[1:] / vals[:-1])


def _exact_margin(s: GrowthSequence, n: int, delta: Fraction, prec: int = 256) -> HPScalar:
    r = s.value(n + 1, prec) / s.value(n, prec)
    return (r - 1) * mpfr_power_fraction(n, delta, prec)


def sublacunarity_check(s: GrowthSequence, delta, c, N: int) -> SublacunarityReport:
    """Check u_{n+1}/u_n >= 1 + c n**-delta for all n < N and estimate beta.

    beta_hat is the minimum of (u_{n+d}/u_n)**((n+d)**delta / d) over a
    logarithmic (n, d) grid; it is the largest beta for which the power-type
    gap bound holds on every sampled pair.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    if s.horizon is not None:
        N = min(N, s.horizon)
    delta_q, c_q = _as_fraction(delta), _as_fraction(c)
    d_f, c_f = float(delta_q), float(c_q)
    rho = _log_ratios(s, N)
    n = np.arange(1, N, dtype=np.float64)
    margins = np.expm1(rho) * n**d_f
    k = int(np.argmin(margins))
    min_margin = float(margins[k])
    diagnostics = []
    passed = bool(np.all(rho > 0)) and min_margin >= c_f
    # near ties are re-decided with certified arithmetic
    close = np.nonzero(np.abs(margins - c_f) <= 1e-9 * max(c_f, 1.0))[0]
    for idx in close[:64]:
        verdict = _exact_margin(s, int(idx) + 1, delta_q).compare(c_q)
        if verdict.name == "UNCERTAIN":
            passed = False
            diagnostics.append(f"precision: margin at n={int(idx) + 1} is within error of c")
        elif verdict.name == "BELOW":
            passed = False
    if not passed and not diagnostics:
        diagnostics.append(f"ratio condition fails at n={k + 1}: margin {min_margin:.6g} < c={c_f:.6g}")
    cum = np.concatenate([[0.0], np.cumsum(rho)])
    ns = np.unique(np.geomspace(1, N - 1, num=min(40, N - 1)).astype(np.int64))
    log_beta = math.inf
    for n0 in ns:
        ds = np.unique(np.geomspace(1, N - n0, num=min(40, N - n0)).astype(np.int64))
        ds = ds[n0 + ds <= N]
        if ds.size == 0:
            continue
        gap = cum[n0 + ds - 1] - cum[n0 - 1]
        vals = gap * (n0 + ds).astype(np.float64) ** d_f / ds
        log_beta = min(log_beta, float(vals.min()))
    return SublacunarityReport(N, d_f, c_f, min_margin, k + 1, math.exp(log_beta),
                               math.exp(c_f / 2), passed, tuple(diagnostics))


def fit_sublacunarity_c(s: GrowthSequence, delta, count: int = 1000) -> float:
    """Largest c certified by the first ``count`` ratios (rounded down slightly)."""
    rho = _log_ratios(s, count + 1)
    n = np.arange(1, count + 1, dtype=np.float64)
    return float(np.min(np.expm1(rho) * n ** float(_as_fraction(delta)))) * (1 - 1e-9)


def default_delta(s: GrowthSequence) -> Fraction:
    if s.declared_delta is not None:
        return s.declared_delta
    if s.family == "stretched":
        return 1 - s.b
    if s.family == "polynomial":
        # u_{n+1}/u_n - 1 ~ m/n
        return Fraction(1)
    return Fraction(0)


# ---------------------------------------------------------------------------
# targets

PLACEMENTS = ("anchored", "symmetric", "seeded_random", "split")


@dataclass(frozen=True)
class TargetScheme:
    """Targets I_n of measure scale_c * n**-a built from at most ``ell`` circle arcs.

    Below the threshold n0 the measure is clipped to 1 (full circle); from n0 on a
    measure above 1 is an error.  An arc crossing 0 is stored as two pieces.
    """

    a: Fraction
    ell: int = 1
    placement: str = "anchored"
    seed: int = 0
    scale_c: Fraction = Fraction(1)
    n0: int = 1
    prec: int = DEFAULT_WORK_BITS

    def __post_init__(self):
        object.__setattr__(self, "a", _as_fraction(self.a))
        object.__setattr__(self, "scale_c", _as_fraction(self.scale_c))
        if not 0 <= self.a < 1:
            raise ValueError("a must lie in [0, 1)")
        if self.scale_c <= 0:
            raise ValueError("scale_c must be > 0")
        if self.placement not in PLACEMENTS:
            raise ValueError(f"unknown placement {self.placement!r}")
        if self.ell < 1:
            raise ValueError("ell must be >= 1")
        if self.placement == "symmetric" and self.ell < 1:
            raise ValueError("symmetric placement needs ell >= 1")

    @property
    def arcs(self) -> int:
        return self.ell if self.placement == "split" else 1

    def nominal_measure(self, n: int) -> HPScalar:
        """scale_c * n**-a, unclipped."""
        return mpfr_power_fraction(n, -self.a, self.prec) * self.scale_c

    def measure(self, n: int) -> HPScalar:
        m = self.nominal_measure(n)
        if n < self.n0:
            if m.compare(1).name != "BELOW":
                return HPScalar(Fraction(1), Fraction(0), self.prec)
            return m
        v = m.compare(1)
        if v.name == "ABOVE":
            raise ValueError(f"target measure c*n^-a = {float(m.value):.6g} > 1 at n={n}")
        if v.name == "UNCERTAIN":
            raise PrecisionError(f"cannot decide whether the target measure at n={n} exceeds 1")
        return m

    def _is_full(self, n: int, m: HPScalar) -> bool:
        if m.is_exact and m.value == 1:
            if n >= self.n0 and self.placement == "symmetric":
                raise ValueError(f"symmetric target at n={n} degenerates to the full circle")
            return True
        return False

    def target(self, n: int) -> IntervalUnion:
        if n < 1:
            raise ValueError("n must be >= 1")
        m = self.measure(n)
        if self._is_full(n, m):
            return IntervalUnion.full(self.prec)
        if self.placement == "anchored":
            raw = [CircleInterval(HPScalar.exact(0, self.prec), m)]
        elif self.placement == "symmetric":
            half = m * Fraction(1, 2)
            raw = [CircleInterval(-half, half)]
        elif self.placement == "seeded_random":
            lo = HPScalar.exact(Fraction(uniform64(self.seed, "target-position", n), 1 << 64), self.prec)
            raw = [CircleInterval(lo, lo + m)]
        else:
            piece = m * Fraction(1, self.ell)
            raw = []
            for j in range(self.ell):
                r = Fraction(uniform64(self.seed, f"target-split:{j}", n), 1 << 64)
                lo = (HPScalar.exact(1, self.prec) - m) * (r / self.ell) + Fraction(j, self.ell)
                raw.append(CircleInterval(lo, lo + piece))
        return iu_normalize(raw, prec=self.prec)

    def arcs64(self, ns: np.ndarray):
        """Fixed-point (2**-64 units) arcs for vectorized membership tests.

        Returns (lo, length, full) with lo/length of shape (len(ns), arcs) as
        uint64 and full a bool mask.  Endpoints agree with ``target`` to within
        ``ARC_SLACK`` units.
        """
        ns = np.asarray(ns, dtype=np.int64)
        m = float(self.scale_c) * np.power(ns.astype(np.float64), -float(self.a))
        full = m >= 1.0
        if np.any(full & (ns >= self.n0)):
            bad = ns[full & (ns >= self.n0)]
            over = m[full & (ns >= self.n0)] > 1.0 + 1e-12
            if np.any(over) or self.placement == "symmetric":
                # certified decision on the first offender
                self.target(int(bad[0]))
        m = np.minimum(m, 1.0)
        two64 = float(1 << 64)
        k = self.arcs
        lo = np.zeros((ns.size, k), dtype=np.uint64)
        length = np.zeros((ns.size, k), dtype=np.uint64)
        mm = np.where(full, 0.5, m)
        if self.placement == "anchored":
            length[:, 0] = (mm * two64).astype(np.uint64)
        elif self.placement == "symmetric":
            half = (mm * (two64 / 2)).astype(np.uint64)
            lo[:, 0] = np.uint64(0) - half
            length[:, 0] = half * np.uint64(2)
        elif self.placement == "seeded_random":
            lo[:, 0] = np.array([uniform64(self.seed, "target-position", int(n)) for n in ns],
                                dtype=np.uint64)
            length[:, 0] = (mm * two64).astype(np.uint64)
        else:
            ell = self.ell
            for j in range(ell):
                r = np.array([uniform64(self.seed, f"target-split:{j}", int(n)) for n in ns],
                             dtype=np.float64) / two64
                start = (j + (1.0 - mm) * r) / ell
                lo[:, j] = np.floor(start * two64).astype(np.uint64)
                length[:, j] = (mm / ell * two64).astype(np.uint64)
        return lo, length, full

    def to_json(self) -> dict:
        out = {"a": str(self.a), "ell": self.ell, "placement": self.placement,
               "c": str(self.scale_c), "n0": self.n0}
        if self.placement in ("seeded_random", "split"):
            out["seed"] = self.seed
        return out


ARC_SLACK = 1 << 16


# ---------------------------------------------------------------------------
# integer sets

ISET_KINDS = ("all", "primes", "power", "explicit", "random_density")


@lru_cache(maxsize=2)
def _prime_sieve(limit: int) -> np.ndarray:
    if limit < 2:
        return np.zeros(0, dtype=np.int64)
    sieve = np.ones(limit // 2 + 1, dtype=bool)  # index i <-> 2i+1
    sieve[0] = False
    for i in range(1, (math.isqrt(limit) - 1) // 2 + 1):
        if sieve[i]:
            p = 2 * i + 1
            sieve[p * p // 2::p] = False
    odd = 2 * np.nonzero(sieve)[0] + 1
    odd = odd[odd <= limit]
    return np.concatenate([[2], odd]).astype(np.int64)


def primes_upto(N: int) -> np.ndarray:
    # round the sieve size up so nearby requests share one cache entry
    size = 1 << max(10, (N - 1).bit_length())
    p = _prime_sieve(size)
    return p[: np.searchsorted(p, N, side="right")]


@dataclass(frozen=True)
class IntegerSet:
    kind: str
    d: int | None = None
    values: tuple | None = None
    gamma: Fraction | None = None
    seed: int = 0
    chunk: int = field(default=1 << 20, compare=False)

    def __post_init__(self):
        if self.kind not in ISET_KINDS:
            raise ValueError(f"unknown integer set kind {self.kind!r}")
        if self.kind == "power" and (self.d is None or self.d < 1):
            raise ValueError("power set needs d >= 1")
        if self.kind == "explicit":
            vals = tuple(sorted(set(int(v) for v in (self.values or ()))))
            if vals and vals[0] < 1:
                raise ValueError("explicit members must be positive")
            object.__setattr__(self, "values", vals)
        if self.kind == "random_density":
            g = _as_fraction(self.gamma) if self.gamma is not None else None
            if g is None or not 0 < g <= 1:
                raise ValueError("random_density needs gamma in (0, 1]")
            object.__setattr__(self, "gamma", g)

    @classmethod
    def all(cls) -> IntegerSet:
        return cls("all")

    @classmethod
    def primes(cls) -> IntegerSet:
        return cls("primes")

    @classmethod
    def power(cls, d: int) -> IntegerSet:
        return cls("power", d=d)

    @classmethod
    def explicit(cls, values) -> IntegerSet:
        return cls("explicit", values=tuple(values))

    @classmethod
    def random_density(cls, gamma, seed: int) -> IntegerSet:
        return cls("random_density", gamma=gamma, seed=seed)

    @property
    def is_sparse(self) -> bool:
        return self.kind in ("power", "explicit") or (
            self.kind == "random_density" and self.gamma < Fraction(1, 2))

    def _random_chunk(self, start: int, stop: int) -> np.ndarray:
        n = np.arange(start, stop, dtype=np.int64)
        p = np.minimum(1.0, n.astype(np.float64) ** (float(self.gamma) - 1.0))
        u = counter_uniforms(self.seed, "iset-coin", start, stop - start)
        return n[u < p]

    def iter_chunks(self, N: int, lo: int = 1):
        """Members of [lo, N] in increasing order, yielded as int64 arrays."""
        if self.kind not in ("all", "random_density"):
            arr = self.enumerate(N)
            yield arr[arr >= lo]
            return
        for start in range(lo, N + 1, self.chunk):
            stop = min(N + 1, start + self.chunk)
            if self.kind == "all":
                yield np.arange(start, stop, dtype=np.int64)
            else:
                yield self._random_chunk(start, stop)

    def enumerate(self, N: int) -> np.ndarray:
        if N < 1:
            return np.zeros(0, dtype=np.int64)
        if self.kind == "all":
            return np.arange(1, N + 1, dtype=np.int64)
        if self.kind == "primes":
            return primes_upto(N)
        if self.kind == "power":
            k = _iroot(N, self.d)
            return np.arange(1, k + 1, dtype=np.int64) ** self.d
        if self.kind == "explicit":
            arr = np.array(self.values, dtype=np.int64)
            return arr[arr <= N]
        return np.concatenate(list(self.iter_chunks(N))) if N else np.zeros(0, dtype=np.int64)

    def count(self, N: int) -> int:
        if N < 1:
            return 0
        if self.kind == "all":
            return N
        if self.kind == "power":
            return _iroot(N, self.d)
        return int(self.enumerate(N).size)

    def counts_at(self, grid) -> np.ndarray:
        grid = np.asarray(grid, dtype=np.int64)
        if self.kind == "all":
            return grid.copy()
        if self.kind == "power":
            return np.array([_iroot(int(g), self.d) for g in grid], dtype=np.int64)
        members = self.enumerate(int(grid.max()))
        return np.searchsorted(members, grid, side="right").astype(np.int64)

    def contains(self, n: int) -> bool:
        if n < 1:
            return False
        if self.kind == "all":
            return True
        if self.kind == "power":
            return _iroot(n, self.d) ** self.d == n
        if self.kind == "random_density":
            return bool(self._random_chunk(n, n + 1).size)
        members = self.enumerate(n)
        return bool(members.size) and int(members[-1]) == n

    def dimension_hint(self) -> float | None:
        """Known mass dimension of the model, when there is one."""
        return {"all": 1.0, "primes": 1.0}.get(self.kind) or (
            1.0 / self.d if self.kind == "power" else
            float(self.gamma) if self.kind == "random_density" else None)

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.d is not None:
            out["d"] = self.d
        if self.values is not None:
            out["values"] = list(self.values)
        if self.gamma is not None:
            out["gamma"] = str(self.gamma)
            out["seed"] = self.seed
        return out


def _iroot(N: int, d: int) -> int:
    return int(gmpy2.iroot(gmpy2.mpz(N), d)[0])
