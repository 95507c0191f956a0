"""Exact preimage measures, joint measures and correlations of the events {u_n y in I_n}.

Two independent exact algorithms compute lambda(u_n^-1(I_n) cap u_m^-1(I_m)):

* ``joint_measure_sweep`` builds every preimage as an IntervalUnion and sweeps
  the sorted endpoints of all of them at once (any k <= 4).
* ``joint_measure_periods`` walks the pieces of u_n^-1(I_n) only and counts the
  1/u_m periods inside each piece through G(z) = floor(z) lambda(I) + lambda(I cap [0, {z}]),
  so its cost does not depend on u_m.
"""

from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from statistics import NormalDist

import numpy as np

from .errors import BudgetError, PrecisionError
from .seeding import counter_uniforms, sub_seed, uniform64
from .sequences import GrowthSequence, TargetScheme
from .torus import (
    HPScalar,
    IntervalUnion,
    Membership,
    _ceil_dyadic,
    _merge_sorted,
    iu_contains,
)

DEFAULT_PIECE_BUDGET = 10**7


def _as_hp(u) -> HPScalar:
    return u if isinstance(u, HPScalar) else HPScalar.exact(u)


def preimage(u, I: IntervalUnion, budget: int = DEFAULT_PIECE_BUDGET) -> IntervalUnion:
    """{x in [0, 1) : {u x} in I} as a normalized IntervalUnion.

    Rational u = p/q keeps everything exact: piece i + [lo, hi) maps to
    [(i D + lo) q, (i D + hi) q) over the denominator p D.  Irrational u is
    replaced by its stored rational value and the endpoint error widened by
    2 err(u) / (u - err(u)).
    """
    u = _as_hp(u)
    if u.value < 1:
        raise ValueError("u must be >= 1")
    uv = u.value
    p, q = uv.numerator, uv.denominator
    D = I.den
    copies = math.floor(uv) + 1
    if len(I) * copies > budget:
        raise BudgetError(f"preimage needs about {len(I) * copies} pieces", len(I) * copies, budget)
    den = p * D
    pieces = []
    for i in range(copies):
        base = i * D
        for lo, hi, cl, ch in I.raw_pieces:
            a = (base + lo) * q
            if a >= den:
                break
            b = (base + hi) * q
            if b >= den:
                pieces.append((a, den, cl, False))
                break
            pieces.append((a, b, cl, ch))
    merged = _merge_sorted(pieces)
    eps = I.eps * q
    merr = I.merr * q * (copies + 1)
    if u.err:
        if u.err >= uv:
            raise PrecisionError("u error exceeds its value")
        widen = math.ceil(2 * u.err / (uv - u.err) * den) + 1
        eps += widen
        merr += 2 * len(merged) * widen
    return IntervalUnion(den, merged, eps, merr, max(I.prec, u.prec))


def prefix_measure(I: IntervalUnion, x: HPScalar) -> HPScalar:
    """lambda(I cap [0, x]) for x in [0, 1]; 1-Lipschitz in x."""
    xv = x.value
    total = Fraction(0)
    for lo, hi, _, _ in I.raw_pieces:
        lo_f = Fraction(lo, I.den)
        if lo_f >= xv:
            break
        total += min(Fraction(hi, I.den), xv) - lo_f
    err = x.err + Fraction(I.merr + I.eps, I.den)
    return HPScalar(total, err, x.prec)


def period_count(I: IntervalUnion, z: HPScalar) -> HPScalar:
    """G(z) = floor(z) lambda(I) + lambda(I cap [0, {z}]): the measure of [0, z] / Z hits.

    Near an integer the split floor/fraction is ambiguous, but G is 1-Lipschitz so
    either side gives the same value up to err(z).
    """
    try:
        k = z.floor()
        f = z - k
    except PrecisionError:
        k = round(z.value)
        f = HPScalar(Fraction(0), z.err + abs(z.value - k), z.prec)
        k_val = Fraction(k) * Fraction(I.measure_numerator, I.den)
        return HPScalar(k_val, f.err + k * Fraction(I.merr, I.den), z.prec)
    lam = Fraction(I.measure_numerator, I.den)
    pm = prefix_measure(I, f)
    return HPScalar(k * lam + pm.value, pm.err + k * Fraction(I.merr, I.den), z.prec)


def sigma_closed_form(u, I: IntervalUnion) -> HPScalar:
    """lambda(u^-1(I)) = (floor(u) lambda(I) + lambda(I cap [0, {u}])) / u."""
    return period_count(I, _as_hp(u)) / _as_hp(u)


def _seq_value(s: GrowthSequence, n: int, extra: int = 128) -> HPScalar:
    return s.value(n, max(128, math.ceil(s.log2_value(n)) + extra))


def sigma(s: GrowthSequence, t: TargetScheme, n: int) -> HPScalar:
    return sigma_closed_form(_seq_value(s, n), t.target(n))


def sigma_values(s: GrowthSequence, t: TargetScheme, ns) -> np.ndarray:
    """Float sigma_n; exact closed form where u_n < 2**60, else lambda(I_n) (error < 2**-60 relative)."""
    ns = np.asarray(ns, dtype=np.int64)
    a, c = float(t.a), float(t.scale_c)
    m = c * np.power(ns.astype(np.float64), -a)
    m = np.where(ns < t.n0, np.minimum(m, 1.0), m)
    if s.is_integer_valued:
        return m
    small = np.nonzero(s.log_values(ns) <= 60 * math.log(2))[0]
    out = m.copy()
    for i in small:
        out[i] = float(sigma(s, t, int(ns[i])).value)
    return out


# ---------------------------------------------------------------------------
# joint measures


def subset_measures(sets: list[IntervalUnion]) -> dict[int, HPScalar]:
    """lambda(intersection over S) for every nonempty subset S (bitmask) in one sweep."""
    k = len(sets)
    if k == 0 or k > 8:
        raise ValueError("need 1..8 sets")
    L = 1
    for A in sets:
        L = math.lcm(L, A.den)
    events = []
    for i, A in enumerate(sets):
        f = L // A.den
        bit = 1 << i
        for lo, hi, _, _ in A.raw_pieces:
            events.append((lo * f, bit))
            events.append((hi * f, -bit))
    events.sort(key=lambda e: (e[0], e[1] > 0))  # removals first at shared endpoints
    atoms = [0] * (1 << k)
    mask, prev = 0, 0
    for pos, bit in events:
        if pos != prev:
            atoms[mask] += pos - prev
            prev = pos
        mask += bit
    errs = [Fraction(A.merr, A.den) for A in sets]
    prec = max(A.prec for A in sets)
    out = {}
    for S in range(1, 1 << k):
        num = sum(atoms[M] for M in range(1 << k) if M & S == S)
        err = sum(errs[i] for i in range(k) if S >> i & 1)
        out[S] = HPScalar(Fraction(num, L), err, prec)
    return out


def joint_measure_sweep(sets: list[IntervalUnion]) -> HPScalar:
    return subset_measures(sets)[(1 << len(sets)) - 1]


def joint_measure_periods(pre_n: IntervalUnion, u_m, I_m: IntervalUnion) -> HPScalar:
    """lambda(pre_n cap u_m^-1(I_m)) summing (G(u_m x1) - G(u_m x0)) / u_m over pieces [x0, x1) of pre_n."""
    u = _as_hp(u_m)
    p, q = u.value.numerator, u.value.denominator
    Dn, Dm = pre_n.den, I_m.den
    zden = q * Dn
    lam_num = I_m.measure_numerator
    m_pieces = [(lo * zden, hi * zden) for lo, hi, _, _ in I_m.raw_pieces]
    first_lo = m_pieces[0][0] if m_pieces else 0

    def G(X: int) -> int:
        # in units of 1 / (Dm * zden)
        k, rem = divmod(p * X, zden)
        r = rem * Dm
        acc = k * lam_num * zden
        if r > first_lo:
            for lo, hi in m_pieces:
                if lo >= r:
                    break
                acc += (hi if hi < r else r) - lo
        return acc

    total = 0
    P = 0
    for lo, hi, _, _ in pre_n.raw_pieces:
        total += G(hi) - G(lo)
        P += 1
    value = Fraction(total, Dm * Dn * p)
    uv = u.value
    err = Fraction(pre_n.merr, Dn) + Fraction(I_m.merr, Dm) * (1 + 1 / uv)
    if u.err:
        err += 2 * P * u.err / uv + value * u.err / (uv - u.err)
    return HPScalar(value, _ceil_dyadic(err) if err else err, max(pre_n.prec, I_m.prec))


# ---------------------------------------------------------------------------
# reports


@dataclass
class JointSpec:
    indices: tuple
    seq: GrowthSequence
    targets: TargetScheme
    budget: int = DEFAULT_PIECE_BUDGET

    def __post_init__(self):
        self.indices = tuple(int(n) for n in self.indices)
        if not 1 <= len(self.indices) <= 4:
            raise ValueError("joint specs take 1 to 4 indices")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])) or self.indices[0] < 1:
            raise ValueError("indices must be strictly increasing positive integers")

    def u(self, n: int) -> HPScalar:
        return _seq_value(self.seq, n)

    def pieces_needed(self) -> int:
        return sum(self.targets.arcs * 2 * (math.floor(2 ** min(60, self.seq.log2_value(n))) + 1)
                   for n in self.indices)

    def preimages(self) -> list[IntervalUnion]:
        if self.pieces_needed() > self.budget:
            raise BudgetError("joint spec exceeds the piece budget", self.pieces_needed(), self.budget)
        return [preimage(self.u(n), self.targets.target(n), self.budget) for n in self.indices]


@dataclass
class CorrelationReport:
    indices: tuple
    exact: HPScalar
    paper_bound: float
    mc_estimate: float | None = None
    mc_ci95: tuple | None = None
    extra: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        if self.paper_bound == 0:
            return 0.0 if self.exact.value == 0 else math.inf
        return abs(float(self.exact.value)) / self.paper_bound

    def row(self) -> dict:
        out = {f"n{i + 1}": n for i, n in enumerate(self.indices)}
        out.update(exact=float(self.exact.value), err=float(self.exact.err),
                   bound=self.paper_bound, ratio=self.ratio,
                   mc=self.mc_estimate, ci_lo=self.mc_ci95[0] if self.mc_ci95 else None,
                   ci_hi=self.mc_ci95[1] if self.mc_ci95 else None)
        return out


def _gamma(t: TargetScheme, n: int) -> float:
    return n ** -float(t.a)


def _u_float(s: GrowthSequence, n: int) -> float:
    return 2.0 ** min(1000.0, s.log2_value(n))


def cov_bound(s: GrowthSequence, t: TargetScheme, n: int, m: int) -> float:
    un, um = _u_float(s, n), _u_float(s, m)
    return _gamma(t, m) * (un / um + 1 / un)


def fourfold_bound(s: GrowthSequence, t: TargetScheme, idx) -> float:
    n1, n2, n3, n4 = idx
    u1, u2, u3, u4 = (_u_float(s, n) for n in idx)
    g = lambda n: _gamma(t, n)  # noqa: E731
    return (g(n3) * g(n2) * (1 / u1 + u1 / u2 + u2 / u3)
            + g(n3) * (u3 / u4) * (g(n1) + 1 / u1 + u2 / u3))


def triple_bound(s: GrowthSequence, t: TargetScheme, idx) -> float:
    n, m, r = idx
    un, um, ur = (_u_float(s, k) for k in idx)
    gn, gm, gr = (_gamma(t, k) for k in idx)
    return gr / un + gm * gr * un / um + gn * gr * um / ur + gr * un / ur


def variance(s: GrowthSequence, t: TargetScheme, n: int) -> HPScalar:
    sg = sigma(s, t, n)
    return sg * (1 - sg)


def cov(s: GrowthSequence, t: TargetScheme, n: int, m: int, mc_samples: int = 0,
        seed: int = 0, method: str = "periods") -> CorrelationReport:
    """Cov(X_n, X_m) = lambda(pre_n cap pre_m) - sigma_n sigma_m for n < m."""
    if not n < m:
        raise ValueError("cov needs n < m (use variance for n = m)")
    un, um = _seq_value(s, n), _seq_value(s, m)
    pre_n = preimage(un, t.target(n))
    if method == "periods":
        joint = joint_measure_periods(pre_n, um, t.target(m))
    else:
        joint = joint_measure_sweep([pre_n, preimage(um, t.target(m))])
    sn = sigma_closed_form(un, t.target(n))
    sm = sigma_closed_form(um, t.target(m))
    exact = joint - sn * sm
    rep = CorrelationReport((n, m), exact, cov_bound(s, t, n, m),
                            extra={"joint": joint, "sigma": (sn, sm)})
    if mc_samples:
        est, lo, hi = mc_joint(JointSpec((n, m), s, t), mc_samples, seed)
        rep.mc_estimate, rep.mc_ci95 = est, (lo, hi)
    return rep


def centered_moment(subsets: dict[int, HPScalar], sigmas: list[HPScalar]) -> HPScalar:
    """E(prod (X_i - sigma_i)) = sum_S (-1)^(k-|S|) lambda(cap_S) prod_{i not in S} sigma_i."""
    k = len(sigmas)
    total = HPScalar.exact(0)
    for S in range(1 << k):
        term = subsets[S] if S else HPScalar.exact(1)
        for i in range(k):
            if not S >> i & 1:
                term = term * sigmas[i]
        sign = -1 if (k - bin(S).count("1")) % 2 else 1
        total = total + term if sign > 0 else total - term
    return total


def _moment_report(spec: JointSpec, bound: float, mc_samples: int, seed: int) -> CorrelationReport:
    pres = spec.preimages()
    subsets = subset_measures(pres)
    sigmas = [subsets[1 << i] for i in range(len(pres))]
    exact = centered_moment(subsets, sigmas)
    rep = CorrelationReport(spec.indices, exact, bound, extra={"subsets": subsets})
    if mc_samples:
        est, lo, hi = mc_joint(spec, mc_samples, seed)
        rep.mc_estimate, rep.mc_ci95 = est, (lo, hi)
    return rep


def fourfold(s: GrowthSequence, t: TargetScheme, idx, mc_samples: int = 0, seed: int = 0,
             budget: int = DEFAULT_PIECE_BUDGET) -> CorrelationReport:
    """E(Y_1 Y_2 Y_3 Y_4) with Y_i = X_{n_i} - sigma_{n_i}, by inclusion-exclusion."""
    spec = JointSpec(tuple(idx), s, t, budget)
    if len(spec.indices) != 4:
        raise ValueError("fourfold needs four indices")
    return _moment_report(spec, fourfold_bound(s, t, spec.indices), mc_samples, seed)


def triple(s: GrowthSequence, t: TargetScheme, idx, mc_samples: int = 0, seed: int = 0,
           budget: int = DEFAULT_PIECE_BUDGET) -> CorrelationReport:
    """E(Y_n Y_m Y_r) against xi(n, m, r)."""
    spec = JointSpec(tuple(idx), s, t, budget)
    if len(spec.indices) != 3:
        raise ValueError("triple needs three indices")
    return _moment_report(spec, triple_bound(s, t, spec.indices), mc_samples, seed)


# ---------------------------------------------------------------------------
# Monte Carlo oracle


def wilson_interval(hits: int, n: int, level: float = 0.95) -> tuple[float, float]:
    z = NormalDist().inv_cdf(0.5 + level / 2)
    p = hits / n
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


MC_REFINE_ROUNDS = 8


def _refined_member(u: HPScalar, T: IntervalUnion, k53: int, seed: int, i: int, n: int) -> bool:
    """Exact membership of {u y} for y = k53/2**53 + lower bits from the sample's own stream.

    The lower bits are shared by every index of a joint spec, so all indices see
    the same real y.
    """
    num, bits = k53, 53
    for r in range(MC_REFINE_ROUNDS):
        num = (num << 64) | uniform64(seed, f"mc-refine-{i}", r)
        bits += 64
        v = iu_contains(T, (u * Fraction(num, 1 << bits)).frac())
        if v is not Membership.UNCERTAIN:
            return v is Membership.MEMBER
    raise PrecisionError(f"Monte Carlo sample {i} stays on a boundary at n={n}")


def mc_joint(spec: JointSpec, samples: int, seed: int) -> tuple[float, float, float]:
    """Fraction of sampled y in every preimage, with a Wilson 95% interval.

    Each sample is a uniform real whose leading 53 bits come from a seeded
    stream. Membership is decided in float64 where the slack certifies it;
    near a target boundary the sample's further bits are drawn (again seeded)
    until the exact test decides.
    """
    if samples < 1000:
        raise ValueError("mc_joint needs at least 10^3 samples")
    y = counter_uniforms(seed, "mc-joint", 0, samples)
    ok = np.ones(samples, dtype=bool)
    for n in spec.indices:
        T = spec.targets.target(n)
        if T.is_full:
            continue
        u = spec.u(n)
        uf = float(u.value)
        x = np.mod(uf * y, 1.0)
        slack = 8 * uf * 2.0**-53 + 1e-15
        inside = np.zeros(samples, dtype=bool)
        near = np.zeros(samples, dtype=bool)
        for lo, hi, _, _ in T.raw_pieces:
            lo_f, hi_f = lo / T.den, hi / T.den
            inside |= (x >= lo_f) & (x < hi_f)
            for b in (lo_f, hi_f):
                d = np.abs(x - b)
                near |= np.minimum(d, 1 - d) <= slack
        for i in np.nonzero(near & ok)[0]:
            inside[i] = _refined_member(u, T, int(round(y[i] * 2.0**53)), seed, int(i), n)
        ok &= inside
    hits = int(ok.sum())
    lo, hi = wilson_interval(hits, samples)
    return hits / samples, lo, hi


# ---------------------------------------------------------------------------
# bound fitting and random case generators


def random_cov_cases(count: int, seed: int, a_values=(0.2, 0.3, 0.5), n_max: int = 12,
                     m_max: int = 40) -> list[tuple]:
    rng = random.Random(sub_seed(seed, "cov-cases"))
    cases = []
    for _ in range(count):
        n = rng.randint(1, n_max)
        m = rng.randint(n + 1, m_max)
        cases.append((Fraction(str(rng.choice(a_values))), n, m))
    return cases


def random_fourfold_cases(count: int, seed: int, a_values=(0.2, 0.3, 0.5),
                          n_max: int = 13) -> list[tuple]:
    rng = random.Random(sub_seed(seed, "fourfold-cases"))
    cases = []
    for _ in range(count):
        idx = tuple(sorted(rng.sample(range(1, n_max + 1), 4)))
        cases.append((Fraction(str(rng.choice(a_values))), idx))
    return cases


def bound_fit(kind: str, fit_cases, fresh_cases, alpha=2, placement: str = "anchored") -> dict:
    """Fit C = max ratio on one grid, then check max ratio <= 10 C on a fresh grid."""
    s = GrowthSequence.geometric(alpha)

    def run(cases):
        rows = []
        for case in cases:
            t = TargetScheme(case[0], placement=placement)
            if kind == "cov":
                rep = cov(s, t, case[1], case[2])
            elif kind == "fourfold":
                rep = fourfold(s, t, case[1])
            elif kind == "triple":
                rep = triple(s, t, case[1])
            else:
                raise ValueError(f"unknown bound kind {kind!r}")
            row = rep.row()
            row["a"] = float(case[0])
            rows.append(row)
        return rows

    fit_rows = run(fit_cases)
    C = max(r["ratio"] for r in fit_rows)
    fresh_rows = run(fresh_cases)
    fresh_max = max(r["ratio"] for r in fresh_rows)
    return {"kind": kind, "C_fitted": C, "fresh_max": fresh_max,
            "passed": fresh_max <= 10 * C, "fit_rows": fit_rows, "fresh_rows": fresh_rows}


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    cols = list(rows[0].keys())
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v)
                    for k, v in r.items()})
    return buf.getvalue()


def random_sigma_case(rng: random.Random, u_max: int = 10**5):
    """A random (u, n, target) with u rational in [1, u_max] and a seeded target."""
    u = Fraction(rng.randint(1000, u_max * 1000), 1000)
    n = rng.randint(1, 10**6)
    a = Fraction(rng.randint(1, 99), 100)
    placement = rng.choice(["anchored", "symmetric", "seeded_random", "split"])
    ell = rng.randint(1, 4) if placement == "split" else 1
    t = TargetScheme(a, ell=ell, placement=placement, seed=rng.getrandbits(32), n0=2)
    if placement == "symmetric" and n == 1:
        n = 2
    return u, n, t


def joint_cases(count: int, seed: int, u_max: int = 10**5):
    """Random k=2 cases (u_n < u_m <= u_max rational, targets, n < m)."""
    rng = random.Random(sub_seed(seed, "joint-cases"))
    cases = []
    for _ in range(count):
        um = Fraction(rng.randint(2000, u_max * 1000), 1000)
        un = Fraction(rng.randint(1000, max(1001, int(um * 1000) // 10)), 1000)
        n = rng.randint(1, 500)
        m = rng.randint(n + 1, 1000)
        a = Fraction(rng.randint(5, 95), 100)
        placement = rng.choice(["anchored", "symmetric", "seeded_random", "split"])
        ell = rng.randint(1, 3) if placement == "split" else 1
        t = TargetScheme(a, ell=ell, placement=placement, seed=rng.getrandbits(32), n0=2)
        cases.append((un, um, n, m, t))
    return cases
