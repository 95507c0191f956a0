"""Mass dimension estimates, weighted sums with their summation-by-parts split,
the V statistic over seeded y, and the transversality experiment."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hitting import HittingSet, geometric_grid, hitting_ensemble
from .measurelab import sigma_values
from .oracle import FractionalOracle
from .sequences import GrowthSequence, IntegerSet, TargetScheme, default_delta

DEFAULT_ETA = 10 ** 0.25
EPS = np.finfo(np.float64).eps


@dataclass
class DimensionEstimate:
    slope: float
    intercept: float
    ratio_lo: float
    ratio_hi: float
    window: tuple
    grid: np.ndarray
    counts: np.ndarray
    defined: bool = True

    def to_json(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "ratio_lo": self.ratio_lo,
                "ratio_hi": self.ratio_hi, "window": list(self.window), "defined": self.defined,
                "grid": self.grid.tolist(), "counts": self.counts.tolist()}


def _check_window(window) -> tuple[int, int]:
    lo, hi = int(window[0]), int(window[1])
    if lo < 1 or hi < 100 * lo:
        raise ValueError("dimension window must span at least two decades")
    return lo, hi


def dimension_from_counts(grid, counts, window, eta: float = DEFAULT_ETA) -> DimensionEstimate:
    """Least-squares slope of log count against log N, plus log count / log N brackets."""
    grid = np.asarray(grid, dtype=np.int64)
    counts = np.asarray(counts, dtype=np.int64)
    keep = counts > 0
    if keep.sum() < 2:
        return DimensionEstimate(math.nan, math.nan, math.nan, math.nan,
                                 (int(window[0]), int(window[1]), eta), grid, counts, False)
    lx, ly = np.log(grid[keep].astype(float)), np.log(counts[keep].astype(float))
    slope, intercept = np.polyfit(lx, ly, 1)
    ratios = ly / lx
    return DimensionEstimate(float(slope), float(intercept), float(ratios.min()),
                             float(ratios.max()), (int(window[0]), int(window[1]), eta),
                             grid, counts, True)


def mass_dim(A: IntegerSet, window=(10**3, 10**8), eta: float = DEFAULT_ETA) -> DimensionEstimate:
    lo, hi = _check_window(window)
    grid = geometric_grid(lo, hi, eta)
    return dimension_from_counts(grid, A.counts_at(grid), (lo, hi), eta)


def mass_dim_members(members: np.ndarray, window, eta: float = DEFAULT_ETA) -> DimensionEstimate:
    """Dimension of an explicitly enumerated sorted set (e.g. a hitting set)."""
    lo, hi = _check_window(window)
    grid = geometric_grid(lo, hi, eta)
    counts = np.searchsorted(np.asarray(members), grid, side="right")
    return dimension_from_counts(grid, counts, (lo, hi), eta)


# ---------------------------------------------------------------------------
# weighted sums


@dataclass
class WeightedSumSeries:
    gamma: float
    a: float
    points: list = field(default_factory=list)  # (N, S, S1, S2, err)
    trend: str = ""
    log_slope: float = math.nan

    def rows(self) -> list[dict]:
        return [{"N": N, "S": S, "S1": S1, "S2": S2, "err": e} for N, S, S1, S2, e in self.points]

    def identity_holds(self) -> bool:
        return all(abs(S - (S1 + S2)) <= e for _, S, S1, S2, e in self.points)


def weighted_sum(A: IntegerSet, a, gamma, N_grid) -> WeightedSumSeries:
    """S = N^-g sum_{n<=N, n in A} n^-a, with S1 = N^(-g-a)|A cap [1,N]| and
    S2 = N^-g sum_{M<N} (M^-a - (M+1)^-a)|A cap [1,M]| (computed by telescoping
    over consecutive members, independently of S)."""
    a, gamma = float(a), float(gamma)
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    grid = np.asarray(N_grid, dtype=np.int64)
    series = WeightedSumSeries(gamma, a)
    direct = 0.0
    tele = 0.0  # sum_j j (x_j^-a - x_{j+1}^-a) over consecutive members so far
    count = 0
    last = None  # x_J^-a
    done = 0
    for N in grid:
        N = int(N)
        members = np.concatenate([c for c in A.iter_chunks(N, done + 1)]) if N > done else \
            np.zeros(0, dtype=np.int64)
        done = max(done, N)
        if members.size:
            w = members.astype(np.float64) ** -a
            direct += float(np.sum(w))
            if last is not None:
                tele += count * (last - w[0])
            j = np.arange(count + 1, count + w.size, dtype=np.float64)
            tele += float(np.sum(j * (w[:-1] - w[1:])))
            count += w.size
            last = float(w[-1])
        scale = N ** -gamma
        S = scale * direct
        S1 = N ** (-gamma - a) * count
        S2 = scale * (tele + (count * (last - N ** -a) if count else 0.0))
        err = 8 * EPS * (math.log2(count + 2) + 2) * (abs(S) + abs(S1) + abs(S2) + scale * count)
        series.points.append((N, S, S1, S2, err))
    Ss = np.array([p[1] for p in series.points])
    if len(Ss) >= 2 and np.all(Ss > 0):
        series.log_slope = float(np.polyfit(np.log(grid.astype(float)), np.log(Ss), 1)[0])
        series.trend = "decaying" if series.log_slope < -0.02 else (
            "growing" if series.log_slope > 0.02 else "bounded")
    return series


# ---------------------------------------------------------------------------
# V statistic


def v_stat(hits: HittingSet, A: IntegerSet, s: GrowthSequence, t: TargetScheme, gamma,
           N: int) -> float:
    """V_{gamma,N}(y) = N^-gamma sum_{n<=N, n in A} (X_n(y) - sigma_n), from a hitting set on A."""
    members = A.enumerate(N)
    if members.size == 0:
        return 0.0
    sig = float(np.sum(sigma_values(s, t, members)))
    return N ** -float(gamma) * (hits.count_upto(N) - sig)


def v_second_moment(A: IntegerSet, s: GrowthSequence, t: TargetScheme, gamma, N_grid,
                    seeds, eps: float = 0.01, guard_bits: int = 40) -> list[dict]:
    """Ensemble mean of V^2 on a grid, beside the shape N^-(g - gbar/2) + N^(delta + gbar + eps - 2g)."""
    grid = np.asarray(N_grid, dtype=np.int64)
    N = int(grid[-1])
    members = A.enumerate(N)
    sig_cum = np.cumsum(sigma_values(s, t, members)) if members.size else np.zeros(0)
    sig_at = np.array([sig_cum[k - 1] if k else 0.0
                       for k in np.searchsorted(members, grid, side="right")])
    oracles = [FractionalOracle.bitstream(sd, guard_bits=guard_bits) for sd in seeds]
    hits = hitting_ensemble(oracles, s, t, N, A, guard_bits)
    g = float(gamma)
    counts = np.array([h.count_upto(grid) for h in hits], dtype=np.float64)
    V = grid.astype(float) ** -g * (counts - sig_at)
    dim_a = A.dimension_hint() if A.dimension_hint() is not None else \
        mass_dim_members(members, (max(1, N // 10**4), N)).slope
    gbar = max(0.0, dim_a - float(t.a))
    delta = float(default_delta(s))
    rows = []
    for i, Nv in enumerate(grid):
        shape = Nv ** -(g - gbar / 2) + Nv ** (delta + gbar + eps - 2 * g)
        rows.append({"N": int(Nv), "mean_V2": float(np.mean(V[:, i] ** 2)),
                     "bound_shape": float(shape), "uncertain": int(sum(h.uncertain_count for h in hits))})
    return rows


# ---------------------------------------------------------------------------
# transversality


@dataclass
class TransversalityReport:
    dim_A: DimensionEstimate
    dim_Lambda: DimensionEstimate | None
    dim_A_cap_Lambda: DimensionEstimate
    predicted: float
    gamma_bar: float
    per_seed: list
    median_slope: float
    degenerate_exponent: float
    degenerate_zero: bool
    regime: dict
    uncertain: int

    def to_json(self) -> dict:
        return {"dim_A": self.dim_A.to_json(),
                "dim_Lambda": self.dim_Lambda.to_json() if self.dim_Lambda else None,
                "dim_A_cap_Lambda": self.dim_A_cap_Lambda.to_json(),
                "predicted": self.predicted, "gamma_bar": self.gamma_bar,
                "median_slope": self.median_slope,
                "degenerate_exponent": self.degenerate_exponent,
                "degenerate_zero": self.degenerate_zero, "regime": self.regime,
                "uncertain": self.uncertain,
                "per_seed": [{k: v for k, v in r.items() if k != "counts"} for r in self.per_seed]}


def growth_exponent(count_hi: float, count_lo: float, decades: float = 2.0) -> float:
    return math.log(max(count_hi, 1) / max(count_lo, 1)) / math.log(10**decades)


def transversality_experiment(A: IntegerSet, y_seeds, s: GrowthSequence, t: TargetScheme,
                              window=(10**4, 10**8), eta: float = DEFAULT_ETA,
                              lambda_cap: int = 10**6, lambda_seeds: int = 1,
                              guard_bits: int = 40) -> TransversalityReport:
    """Dimension of A cap Lambda_y per seed versus the prediction dim A - a.

    Membership is evaluated only on A; the dimension of Lambda_y itself is
    estimated on the first ``lambda_seeds`` seeds over a window capped at
    ``lambda_cap`` (dense evaluation).
    """
    lo, hi = _check_window(window)
    grid = geometric_grid(lo, hi, eta)
    dim_A = mass_dim(A, (lo, hi), eta)
    oracles = [FractionalOracle.bitstream(sd, guard_bits=guard_bits) for sd in y_seeds]
    hits = hitting_ensemble(oracles, s, t, hi, A, guard_bits)
    per_seed = []
    for sd, h in zip(y_seeds, hits):
        est = dimension_from_counts(grid, h.count_upto(grid), (lo, hi), eta)
        c_hi = h.count_upto(hi)
        c_lo = h.count_upto(hi // 100)
        per_seed.append({"seed": sd, "slope": est.slope, "ratio_lo": est.ratio_lo,
                         "ratio_hi": est.ratio_hi, "count": c_hi, "uncertain": h.uncertain_count,
                         "growth_exponent": growth_exponent(c_hi, c_lo), "counts": est.counts})
    slopes = np.array([r["slope"] for r in per_seed], dtype=float)
    median_slope = float(np.nanmedian(slopes)) if np.any(np.isfinite(slopes)) else math.nan
    med_counts = np.median(np.array([r["counts"] for r in per_seed], dtype=float), axis=0)
    pooled = dimension_from_counts(grid, np.round(med_counts).astype(np.int64), (lo, hi), eta)
    med_hi = float(np.median([r["count"] for r in per_seed]))
    med_lo = float(np.median([h.count_upto(hi // 100) for h in hits]))
    degenerate_exponent = growth_exponent(med_hi, med_lo)
    dim_L = None
    cap = min(hi, lambda_cap)
    if lambda_seeds and cap >= 100 * lo:
        lam = hitting_ensemble(oracles[:lambda_seeds], s, t, cap, IntegerSet.all(), guard_bits)
        dim_L = mass_dim_members(lam[0].ns, (lo, cap), eta)
    delta = float(default_delta(s))
    a = float(t.a)
    predicted = dim_A.slope - a
    return TransversalityReport(
        dim_A, dim_L, pooled, predicted, max(0.0, predicted), per_seed, median_slope,
        degenerate_exponent, degenerate_exponent < 0.05,
        regime_flags(delta, a, dim_A.slope), int(sum(h.uncertain_count for h in hits)))


def regime_flags(delta: float, a: float, dim_a: float | None = None) -> dict:
    out = {"delta": delta, "a": a, "delta_plus_a_lt_1": delta + a < 1,
           "two_a_plus_delta_lt_1": 2 * a + delta < 1}
    if dim_a is not None:
        out["delta_plus_a_lt_dimA"] = delta + a < dim_a
    return out


def lln_ensemble(seeds, s: GrowthSequence, t: TargetScheme, N_grid, guard_bits: int = 40):
    """Per-seed counting ratios on a grid (dense evaluation on [1, max N])."""
    from .hitting import counting_ratio

    grid = np.asarray(N_grid, dtype=np.int64)
    oracles = [FractionalOracle.bitstream(sd, guard_bits=guard_bits) for sd in seeds]
    hits = hitting_ensemble(oracles, s, t, int(grid[-1]), IntegerSet.all(), guard_bits)
    return [counting_ratio(h, s, t, grid) for h in hits]
