"""A zoo of measure-preserving systems with analytic conditional expectations,
ergodic averages along hitting times, and the lagged-correlation statistic V'_N."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2
import numpy as np

from .errors import PrecisionError
from .hitting import HittingSet, WindowEngine, classify, kernel_tolerance
from .measurelab import sigma_values
from .oracle import FractionalOracle
from .sequences import GrowthSequence, TargetScheme, default_delta
from .torus import HPScalar, IntervalUnion, _as_fraction

TWO64 = float(1 << 64)
SYSTEM_KINDS = ("identity", "cyclic", "rotation", "times_p", "disjoint_union")
NAMED_ANGLES = ("golden", "sqrt2")


def angle_value(theta, prec: int) -> HPScalar:
    """A rotation angle mod 1 at ``prec`` bits: rationals exactly, named irrationals via MPFR."""
    if isinstance(theta, HPScalar):
        return theta
    if isinstance(theta, str) and theta in NAMED_ANGLES:
        with gmpy2.context(gmpy2.get_context(), precision=prec + 8):
            v = (gmpy2.sqrt(5) - 1) / 2 if theta == "golden" else gmpy2.sqrt(2) - 1
        return HPScalar.from_mpfr(v, ulps=2, prec=prec)
    return HPScalar.exact(_as_fraction(theta) % 1, prec)


@dataclass(frozen=True)
class SystemSpec:
    """kind in identity, cyclic(k), rotation(theta), times_p(p), disjoint_union.

    disjoint_union splits [0, 1) into [0, w) and [w, 1), each carrying its own
    rotation after rescaling to the unit interval.
    """

    kind: str
    k: int | None = None
    theta: object = None
    p: int | None = None
    weight: Fraction = Fraction(1, 2)
    thetas: tuple = ()

    def __post_init__(self):
        if self.kind not in SYSTEM_KINDS:
            raise ValueError(f"unknown system kind {self.kind!r}")
        if self.kind == "cyclic" and (self.k is None or self.k < 1):
            raise ValueError("cyclic system needs k >= 1")
        if self.kind == "times_p" and (self.p is None or self.p < 2):
            raise ValueError("times_p needs an integer p >= 2")
        if self.kind == "rotation" and self.theta is None:
            raise ValueError("rotation needs theta")
        if self.kind == "disjoint_union":
            object.__setattr__(self, "weight", _as_fraction(self.weight))
            if len(self.thetas) != 2 or not 0 < self.weight < 1:
                raise ValueError("disjoint_union needs two angles and a weight in (0, 1)")

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def cyclic(cls, k: int):
        return cls("cyclic", k=k)

    @classmethod
    def rotation(cls, theta):
        return cls("rotation", theta=theta)

    @classmethod
    def times_p(cls, p: int):
        return cls("times_p", p=p)

    @classmethod
    def disjoint_union(cls, theta1, theta2, weight=Fraction(1, 2)):
        return cls("disjoint_union", thetas=(theta1, theta2), weight=weight)

    @property
    def is_finite(self) -> bool:
        return self.kind == "cyclic"

    @property
    def ergodic(self) -> bool:
        if self.kind == "identity" or self.kind == "disjoint_union":
            return False
        if self.kind == "rotation":
            return not _is_rational_angle(self.theta)
        return True

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        for name in ("k", "p"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        if self.theta is not None:
            out["theta"] = str(self.theta)
        if self.kind == "disjoint_union":
            out["thetas"] = [str(t) for t in self.thetas]
            out["weight"] = str(self.weight)
        return out


def _is_rational_angle(theta) -> bool:
    return not (isinstance(theta, str) and theta in NAMED_ANGLES) and not isinstance(theta, HPScalar)


# ---------------------------------------------------------------------------
# dynamics


def _point_value(x, prec: int) -> HPScalar:
    if isinstance(x, FractionalOracle):
        return x.value(prec)
    if isinstance(x, HPScalar):
        return x
    return HPScalar.exact(_as_fraction(x), prec)


def _rotate(theta, k: int, x, guard: int) -> HPScalar:
    prec = max(64, k.bit_length() + guard + 8)
    th = angle_value(theta, prec)
    return (_point_value(x, prec) + th * k).frac()


def apply_power(sys: SystemSpec, k: int, x, guard_bits: int = 40, bit_cap: int = 1 << 26):
    """T^k x in closed form.

    Points are Fractions, HPScalars or FractionalOracles on the circle, and
    integers for cyclic systems.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if sys.kind == "identity":
        return x
    if sys.kind == "cyclic":
        return (int(x) + k) % sys.k
    if sys.kind == "rotation":
        return _rotate(sys.theta, k, x, guard_bits)
    if sys.kind == "disjoint_union":
        w = sys.weight
        v = _point_value(x, 128)
        if v.value < w:
            z = _rotate(sys.thetas[0], k, v / w, guard_bits)
            return z * w
        z = _rotate(sys.thetas[1], k, (v - w) / (1 - w), guard_bits)
        return z * (1 - w) + w
    p = sys.p
    if isinstance(x, FractionalOracle):
        if x.is_exact:
            r, q = x.p, x.q
            return HPScalar(Fraction(r * pow(p, k, q) % q, q))
        j = p.bit_length() - 1
        if p == 1 << j:
            W = x.window64(j * k)
            return HPScalar(Fraction(W, 1 << 64), Fraction(1, 1 << guard_bits), 64 + guard_bits)
        K = math.ceil(k * math.log2(p)) + guard_bits + 10
        if K > bit_cap:
            raise PrecisionError(f"times_{p} at exponent {k} needs {K} bits of x", required_bits=K)
        X = gmpy2.mpz(x.prefix(K))
        v = (gmpy2.mpz(p) ** k * X) % (gmpy2.mpz(1) << K)
        return HPScalar(Fraction(int(v), 1 << K), Fraction(1, 1 << guard_bits), K)
    v = _point_value(x, 128)
    if v.is_exact:
        r, q = v.value.numerator, v.value.denominator
        return HPScalar(Fraction(r * pow(p, k, q) % q, q))
    if v.err * Fraction(p) ** k > Fraction(1, 1 << guard_bits):
        raise PrecisionError(f"times_{p} at exponent {k}: the point is not known precisely enough")
    return (v * p**k).frac()


def orbit_values(sys: SystemSpec, ks: np.ndarray, x) -> np.ndarray:
    """T^k x for many k as floats (or ints for cyclic), vectorized where closed forms allow.

    Rotations use 64-bit fixed-point phases, whose wrap-around multiplication is
    exact modulo 1; the angle error contributes k 2**-64.
    """
    ks = np.asarray(ks, dtype=np.int64)
    if sys.kind == "identity":
        return np.full(ks.size, x if sys.is_finite else float(_point_value(x, 64).value))
    if sys.kind == "cyclic":
        return (int(x) + ks) % sys.k
    if sys.kind == "rotation":
        return _rotation_orbit(sys.theta, ks, _point_value(x, 128).value)
    if sys.kind == "disjoint_union":
        w = sys.weight
        v = _point_value(x, 128).value
        if v < w:
            return float(w) * _rotation_orbit(sys.thetas[0], ks, v / w)
        return float(w) + float(1 - w) * _rotation_orbit(sys.thetas[1], ks, (v - w) / (1 - w))
    p = sys.p
    if isinstance(x, FractionalOracle) and not x.is_exact and p & (p - 1) == 0:
        j = p.bit_length() - 1
        span = j * int(ks.max(initial=0)) + 128
        B = x.byte_array(span // 8 + 16)
        from numpy.lib.stride_tricks import sliding_window_view

        pos = ks * j
        q, r = pos // 8, (pos % 8).astype(np.uint64)
        hi = np.ascontiguousarray(sliding_window_view(B, 8)[q]).view(">u8").reshape(-1).astype(np.uint64)
        lo = B[q + 8].astype(np.uint64)
        with np.errstate(over="ignore"):
            W = (hi << r) | (lo >> (np.uint64(8) - r))
        return W.astype(np.float64) / TWO64
    return np.array([float(apply_power(sys, int(k), x).value) for k in ks])


def _rotation_orbit(theta, ks: np.ndarray, x0: Fraction) -> np.ndarray:
    th = angle_value(theta, 128)
    T64 = np.uint64(int(th.value * (1 << 64)) & ((1 << 64) - 1))
    X64 = np.uint64(int((x0 % 1) * (1 << 64)) & ((1 << 64) - 1))
    with np.errstate(over="ignore"):
        phase = X64 + ks.astype(np.uint64) * T64
    return phase.astype(np.float64) / TWO64


# ---------------------------------------------------------------------------
# observables


@dataclass(frozen=True)
class Observable:
    """trig: c0 + sum a_k cos(2 pi k x) + b_k sin(2 pi k x), terms as (k, a_k, b_k);
    indicator: 1_I; tabulated: values on a finite space; per_component: one
    observable per block of a disjoint union."""

    kind: str
    c0: float = 0.0
    terms: tuple = ()
    interval: IntervalUnion | None = None
    values: tuple = ()
    parts: tuple = ()
    weight: Fraction = Fraction(1, 2)

    @classmethod
    def trig(cls, c0=0.0, terms=()):
        return cls("trig", c0=float(c0), terms=tuple((int(k), float(a), float(b)) for k, a, b in terms))

    @classmethod
    def cos(cls, k: int = 1):
        return cls.trig(0.0, [(k, 1.0, 0.0)])

    @classmethod
    def indicator(cls, I: IntervalUnion):
        return cls("indicator", interval=I)

    @classmethod
    def tabulated(cls, values):
        if not values:
            raise ValueError("tabulated observable needs at least one value")
        return cls("tabulated", values=tuple(float(v) for v in values))

    @classmethod
    def per_component(cls, f1, f2, weight=Fraction(1, 2)):
        if "tabulated" in (f1.kind, f2.kind):
            raise ValueError("per_component parts live on the circle; tabulated parts are not allowed")
        return cls("per_component", parts=(f1, f2), weight=_as_fraction(weight))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if self.kind == "trig":
            out = np.full(x.shape, self.c0, dtype=np.float64)
            for k, a, b in self.terms:
                ph = 2 * np.pi * np.mod(k * x, 1.0)
                out += a * np.cos(ph) + b * np.sin(ph)
            return out
        if self.kind == "indicator":
            out = np.zeros(x.shape, dtype=np.float64)
            I = self.interval
            for lo, hi, _, _ in I.raw_pieces:
                out[(x >= lo / I.den) & (x < hi / I.den)] = 1.0
            return out
        if self.kind == "tabulated":
            return np.asarray(self.values)[x.astype(np.int64)]
        w = float(self.weight)
        inner = x < w
        out = np.empty(x.shape, dtype=np.float64)
        out[inner] = self.parts[0](x[inner] / w)
        out[~inner] = self.parts[1]((x[~inner] - w) / (1 - w))
        return out

    def mean(self) -> float:
        if self.kind == "trig":
            return self.c0
        if self.kind == "indicator":
            return float(self.interval.measure.value)
        if self.kind == "tabulated":
            return float(np.mean(self.values))
        w = float(self.weight)
        return w * self.parts[0].mean() + (1 - w) * self.parts[1].mean()

    def integral(self, lo: float, hi: float) -> float:
        """Exact integral over [lo, hi] for trig and indicator observables."""
        if self.kind == "trig":
            total = self.c0 * (hi - lo)
            for k, a, b in self.terms:
                if k == 0:
                    total += a * (hi - lo)
                    continue
                w = 2 * np.pi * k
                total += a * (math.sin(w * hi) - math.sin(w * lo)) / w
                total -= b * (math.cos(w * hi) - math.cos(w * lo)) / w
            return total
        if self.kind == "indicator":
            I = self.interval
            return sum(max(0.0, min(hi, h / I.den) - max(lo, l / I.den)) for l, h, _, _ in I.raw_pieces)
        raise ValueError(f"no analytic integral for {self.kind} observables")

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "trig":
            out.update(c0=self.c0, terms=[list(t) for t in self.terms])
        elif self.kind == "indicator":
            out["interval"] = self.interval.to_json()
        elif self.kind == "tabulated":
            out["values"] = list(self.values)
        else:
            out.update(parts=[p.to_json() for p in self.parts], weight=str(self.weight))
        return out


def conditional_expectation(sys: SystemSpec, f: Observable, x) -> float:
    """E(f | invariant sets)(x), analytically."""
    if sys.kind == "identity":
        return float(f(np.array([x if sys.is_finite else float(_point_value(x, 64).value)]))[0])
    if sys.kind == "cyclic":
        return float(np.mean(f(np.arange(sys.k))))
    if sys.kind == "rotation":
        if _is_rational_angle(sys.theta):
            q = _as_fraction(sys.theta).denominator
            x0 = float(_point_value(x, 64).value)
            return float(np.mean(f(np.mod(x0 + np.arange(q) / q, 1.0))))
        return f.mean()
    if sys.kind == "times_p":
        return f.mean()
    w = sys.weight
    v = _point_value(x, 64).value
    comp = 0 if v < w else 1
    theta = sys.thetas[comp]
    lo, hi = (0.0, float(w)) if comp == 0 else (float(w), 1.0)
    if _is_rational_angle(theta):
        q = _as_fraction(theta).denominator
        z = float(v / w) if comp == 0 else float((v - w) / (1 - w))
        pts = np.mod(z + np.arange(q) / q, 1.0)
        return float(np.mean(f(lo + (hi - lo) * pts)))
    if f.kind == "per_component":
        return f.parts[comp].mean()
    return f.integral(lo, hi) / (hi - lo)


# ---------------------------------------------------------------------------
# ergodic averages


@dataclass
class AverageSeries:
    points: list = field(default_factory=list)  # (M, avg, birkhoff, target, deviation)
    regime: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        return [{"M": M, "avg": a, "birkhoff": b, "target": t, "deviation": d}
                for M, a, b, t, d in self.points]


def _exact_prefix_means(vals: np.ndarray, Ms) -> list[float]:
    """Means of vals[:M] rounded once from the exact rational sum."""
    out = []
    total = Fraction(0)
    done = 0
    for M in Ms:
        for v in vals[done:M]:
            total += Fraction(float(v))
        done = M
        out.append(float(total / M))
    return out


def regime_for(s: GrowthSequence | None, t: TargetScheme | None) -> dict:
    if s is None or t is None:
        return {}
    delta, a = float(default_delta(s)), float(t.a)
    return {"a": a, "delta": delta, "two_a_plus_delta_lt_1": 2 * a + delta < 1}


def ergodic_average(hit: HittingSet, sys: SystemSpec, f: Observable, x, M_grid,
                    s: GrowthSequence | None = None, t: TargetScheme | None = None) -> AverageSeries:
    """(1/M) sum_{n<=M} f(T^{a_n} x) along the first M hitting times, with the
    Birkhoff average over T^1..T^M and the analytic limit E(f | invariant)(x)."""
    grid = [int(M) for M in M_grid]
    if grid and grid[-1] > len(hit):
        raise ValueError(f"only {len(hit)} hitting times available, grid asks for {grid[-1]}")
    regime = regime_for(s, t)
    if regime and not regime["two_a_plus_delta_lt_1"]:
        warnings.warn("2a + delta >= 1: outside the regime where convergence is guaranteed",
                      RuntimeWarning, stacklevel=2)
    Mmax = grid[-1] if grid else 0
    times = hit.ns[:Mmax]
    try:
        sub = f(orbit_values(sys, times, x))
    except PrecisionError as exc:
        raise PrecisionError(f"apply_power failed along hitting times: {exc}") from exc
    birk = f(orbit_values(sys, np.arange(1, Mmax + 1), x))
    target = conditional_expectation(sys, f, x)
    avgs = _exact_prefix_means(sub, grid)
    birks = _exact_prefix_means(birk, grid)
    series = AverageSeries(regime=regime)
    for M, a, b in zip(grid, avgs, birks):
        series.points.append((M, a, b, target, abs(a - target)))
    return series


def measure_preservation_check(sys: SystemSpec, G: int = 10**5) -> dict:
    """Kolmogorov distance between the pushforward of a uniform grid and uniform."""
    if sys.is_finite:
        img = (np.arange(sys.k) + 1) % sys.k
        ok = np.array_equal(np.sort(img), np.arange(sys.k))
        return {"kind": sys.kind, "ks": 0.0 if ok else 1.0, "threshold": 0.0, "passed": bool(ok)}
    grid = (np.arange(G) + 0.5) / G
    if sys.kind == "identity":
        img = grid
    elif sys.kind == "rotation":
        th = float(angle_value(sys.theta, 64).value)
        img = np.mod(grid + th, 1.0)
    elif sys.kind == "times_p":
        img = np.mod(sys.p * grid, 1.0)
    else:
        w = float(sys.weight)
        th = [float(angle_value(t, 64).value) for t in sys.thetas]
        img = np.where(grid < w, w * np.mod(grid / w + th[0], 1.0),
                       w + (1 - w) * np.mod((grid - w) / (1 - w) + th[1], 1.0))
    srt = np.sort(img)
    i = np.arange(1, G + 1)
    ks = float(max(np.max(i / G - srt), np.max(srt - (i - 1) / G)))
    thr = 2 / math.sqrt(G)
    return {"kind": sys.kind, "ks": ks, "threshold": thr, "passed": ks <= thr}


# ---------------------------------------------------------------------------
# V'_N


def default_b(a: float, delta: float) -> float:
    """(1 + 2a + delta)/2 clipped into (2a + delta, 1)."""
    lo = 2 * a + delta
    b = (1 + 2 * a + delta) / 2
    if not lo < 1:
        raise ValueError("no admissible b: 2a + delta >= 1")
    return min(max(b, lo + 1e-9), 1 - 1e-9)


def predicted_epsilon(a: float, b: float, delta: float) -> float:
    return 0.5 * min(b - 2 * a, b - 2 * a - delta, 1 + b + a - 2 * (2 * a + delta))


def vprime_from_y(Y: np.ndarray, a: float, b: float, N: int) -> float:
    """N^(-1+2a-b) sum_{1<=m<=N^b} |sum_{n<=N-m} Y_{n+m} Y_n| for Y indexed from n = 1."""
    Y = np.asarray(Y[:N], dtype=np.float64)
    L = int(math.floor(N**b + 1e-12))
    total = 0.0
    for m in range(1, min(L, N - 1) + 1):
        total += abs(float(np.dot(Y[m:], Y[:-m])))
    return N ** (-1 + 2 * a - b) * total


def vprime_stat(y: FractionalOracle, s: GrowthSequence, t: TargetScheme, b: float, N: int,
                guard_bits: int = 40) -> float:
    X, sig = _indicator_and_sigma([y], s, t, N, guard_bits)
    return vprime_from_y(X[0] - sig, float(t.a), b, N)


def _indicator_and_sigma(oracles, s, t, N, guard_bits):
    engine = WindowEngine(oracles, s, N, guard_bits)
    ns = np.arange(1, N + 1, dtype=np.int64)
    W = engine.windows(ns)
    lo, length, full = t.arcs64(ns)
    V = classify(W, lo, length, full, kernel_tolerance(guard_bits))
    if np.any(V < 0):
        raise PrecisionError(f"{int(np.sum(V < 0))} uncertain memberships in the V' window")
    return (V == 1).astype(np.float64), sigma_values(s, t, ns)


def vprime_expectation(s: GrowthSequence, t: TargetScheme, N_grid, seeds, b: float | None = None,
                       guard_bits: int = 40) -> dict:
    """Ensemble mean of V'_N on a grid, its log-log slope and the predicted exponent."""
    grid = [int(N) for N in N_grid]
    a, delta = float(t.a), float(default_delta(s))
    b = default_b(a, delta) if b is None else float(b)
    if not 2 * a < b < 1:
        raise ValueError("b must lie in (2a, 1)")
    oracles = [FractionalOracle.bitstream(sd, guard_bits=guard_bits) for sd in seeds]
    X, sig = _indicator_and_sigma(oracles, s, t, grid[-1], guard_bits)
    Y = X - sig
    vals = np.array([[vprime_from_y(Y[i], a, b, N) for N in grid] for i in range(len(oracles))])
    means = vals.mean(axis=0)
    slope = float(np.polyfit(np.log(grid), np.log(means), 1)[0]) if np.all(means > 0) else math.nan
    return {"a": a, "b": b, "delta": delta, "epsilon": predicted_epsilon(a, b, delta),
            "grid": grid, "mean": means.tolist(), "slope": slope,
            "per_seed": vals.tolist(), "regime": regime_for(s, t)}


__all__ = [
    "AverageSeries", "Observable", "SystemSpec", "apply_power", "conditional_expectation",
    "default_b", "ergodic_average", "measure_preservation_check", "orbit_values",
    "predicted_epsilon", "vprime_expectation", "vprime_from_y", "vprime_stat",
]
