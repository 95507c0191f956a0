"""Experiment dispatch, artifact writing, manifests and replay."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import shutil
import statistics
import tempfile
import time
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config
from .dimlab import mass_dim, regime_flags, transversality_experiment, weighted_sum
from .ergolab import default_b, ergodic_average, vprime_expectation
from .errors import PrecisionError
from .hitting import counting_ratio, hitting_ensemble, hitting_set, hitting_set_exact
from .measurelab import (bound_fit, cov, fourfold, random_cov_cases, random_fourfold_cases,
                         triple)
from .oracle import FractionalOracle
from .seeding import sub_seed
from .sequences import IntegerSet, default_delta

OUTPUT_ENV = "SHRINKTARGET_OUTPUT"
MANIFEST = "manifest.json"
REL_TOL = 1e-9
ABS_TOL = 1e-12


@dataclass
class RunResult:
    tables: dict = field(default_factory=dict)   # file name -> rows, or (columns, rows)
    summary: dict = field(default_factory=dict)
    regime: dict = field(default_factory=dict)
    precision_failures: int = 0


# ---------------------------------------------------------------------------
# serialization


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def csv_text(rows: list[dict], columns=None) -> str:
    buf = io.StringIO()
    cols = list(columns or (rows[0].keys() if rows else []))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in cols])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# shared builders


class Context:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.seed = cfg.seed
        self.prec = cfg.precision
        self.p = cfg.typed_params()

    def y_oracles(self, count: int, label: str = "y") -> list[FractionalOracle]:
        return [FractionalOracle.bitstream(sub_seed(self.seed, label, i), guard_bits=self.prec.guard_bits)
                for i in range(count)]

    def target(self, tc=None):
        return (tc or self.p.target).build(self.seed, self.prec.work_bits)

    def regime(self, s, t, A: IntegerSet | None = None) -> dict:
        dim_a = A.dimension_hint() if A is not None else None
        return regime_flags(float(default_delta(s)), float(t.a), dim_a)


HIT_COLUMNS = ("replica", "y_seed", "n", "status")


def _exp_hit(ctx: Context) -> RunResult:
    p = ctx.p
    s, t, A = p.sequence.build(), ctx.target(), p.A.build(ctx.seed)
    g, cap = ctx.prec.guard_bits, ctx.prec.bit_cap
    if p.y.kind == "rational":
        y = FractionalOracle.rational(Fraction(p.y.value).numerator, Fraction(p.y.value).denominator,
                                      guard_bits=g)
        hits = [hitting_set_exact(y, s, t, p.N, A, g, cap)]
        seeds = ["rational"]
    else:
        oracles = ctx.y_oracles(p.seeds)
        hits = hitting_ensemble(oracles, s, t, p.N, A, g, cap)
        seeds = [o.seed for o in oracles]
    rows = []
    for i, (sd, h) in enumerate(zip(seeds, hits)):
        rows += [{"replica": i, "y_seed": sd, "n": int(n), "status": "member"} for n in h.ns]
        rows += [{"replica": i, "y_seed": sd, "n": int(n), "status": "uncertain"} for n in h.uncertain]
    rows.sort(key=lambda r: (r["replica"], r["n"]))
    summary = {"counts": [len(h) for h in hits], "uncertain": [h.uncertain_count for h in hits],
               "N": p.N}
    return RunResult({"hits.csv": (HIT_COLUMNS, rows)}, summary, ctx.regime(s, t, A),
                     sum(len(h.precision_failures) for h in hits))


def _lln_rows(ctx, s, t, grid, seeds):
    oracles = ctx.y_oracles(seeds)
    hits = hitting_ensemble(oracles, s, t, grid[-1], IntegerSet.all(), ctx.prec.guard_bits,
                            ctx.prec.bit_cap)
    rows, by_N = [], {}
    for i, (o, h) in enumerate(zip(oracles, hits)):
        for r in counting_ratio(h, s, t, grid):
            rows.append({"replica": i, "y_seed": o.seed, **r})
            by_N.setdefault(r["N"], []).append(r)
    agg = []
    for N in grid:
        rs = by_N[N]
        ratio = [r["ratio"] for r in rs]
        rsig = [r["ratio_sigma"] for r in rs]
        agg.append({"N": N, "mean_ratio": statistics.fmean(ratio),
                    "sd_ratio": statistics.stdev(ratio) if len(rs) > 1 else 0.0,
                    "mean_ratio_sigma": statistics.fmean(rsig),
                    "sd_ratio_sigma": statistics.stdev(rsig) if len(rs) > 1 else 0.0,
                    "mean_ratio_scaled": statistics.fmean(r["ratio_scaled"] for r in rs),
                    "uncertain": sum(r["uncertain"] for r in rs)})
    return rows, agg, sum(len(h.precision_failures) for h in hits)


def _exp_lln(ctx: Context) -> RunResult:
    p = ctx.p
    s, t = p.sequence.build(), ctx.target()
    rows, agg, pf = _lln_rows(ctx, s, t, p.grid.build(), p.seeds)
    return RunResult({"lln.csv": rows, "lln_summary.csv": agg},
                     {"final": agg[-1], "seeds": p.seeds}, ctx.regime(s, t), pf)


def _report_rows(reports, a, work_bits: int) -> list[dict]:
    """Rows with the certified exact value written out to the working precision."""
    digits = max(17, int(work_bits * math.log10(2)))
    rows = []
    for rep in reports:
        r = rep.row()
        r["exact"] = rep.exact.to_decimal(digits)
        r["a"] = float(a)
        rows.append(r)
    return rows


def _exp_corr(ctx: Context) -> RunResult:
    p = ctx.p
    s, t = p.sequence.build(), ctx.target()
    pairs = [tuple(pr) for pr in p.pairs]
    pairs += [(n, m) for _, n, m in random_cov_cases(p.random_cases, sub_seed(ctx.seed, "corr"))]
    reps = [cov(s, t, n, m, p.mc_samples, sub_seed(ctx.seed, "corr-mc", i), p.method)
            for i, (n, m) in enumerate(pairs)]
    rows = _report_rows(reps, t.a, ctx.prec.work_bits)
    summary = {"cases": len(rows), "max_ratio": max((r["ratio"] for r in rows), default=None)}
    return RunResult({"corr.csv": rows}, summary, ctx.regime(s, t))


def _exp_fourfold(ctx: Context) -> RunResult:
    p = ctx.p
    s, t = p.sequence.build(), ctx.target()
    quads = [tuple(q) for q in p.indices]
    quads += [idx for _, idx in random_fourfold_cases(p.random_cases, sub_seed(ctx.seed, "fourfold"))]
    reps = [fourfold(s, t, q, p.mc_samples, sub_seed(ctx.seed, "fourfold-mc", i))
            for i, q in enumerate(quads)]
    tables = {"fourfold.csv": _report_rows(reps, t.a, ctx.prec.work_bits)}
    summary = {"cases": len(reps),
               "max_ratio": max((r.ratio for r in reps), default=None)}
    if p.triples:
        treps = [triple(s, t, tuple(q), p.mc_samples, sub_seed(ctx.seed, "triple-mc", i))
                 for i, q in enumerate(p.triples)]
        tables["triple.csv"] = _report_rows(treps, t.a, ctx.prec.work_bits)
        summary["max_triple_ratio"] = max(r.ratio for r in treps)
    return RunResult(tables, summary, ctx.regime(s, t))


def _exp_bounds(ctx: Context) -> RunResult:
    p = ctx.p
    a_vals = tuple(Fraction(a) for a in p.a_values)
    if p.kind == "cov":
        gen = lambda n, label: random_cov_cases(n, sub_seed(ctx.seed, label), a_vals)  # noqa: E731
    else:
        def gen(n, label):
            cases = random_fourfold_cases(n, sub_seed(ctx.seed, label), a_vals)
            if p.kind == "triple":
                return [(a, idx[:3]) for a, idx in cases]
            return cases
    res = bound_fit(p.kind, gen(p.fit_cases, "bounds-fit"), gen(p.fresh_cases, "bounds-fresh"),
                    Fraction(p.alpha), p.placement)
    summary = {k: res[k] for k in ("kind", "C_fitted", "fresh_max", "passed")}
    return RunResult({"bounds_fit.csv": res["fit_rows"], "bounds_fresh.csv": res["fresh_rows"]},
                     summary)


def _exp_dim(ctx: Context) -> RunResult:
    p = ctx.p
    A = p.A.build(ctx.seed)
    est = mass_dim(A, tuple(p.window), p.eta)
    rows = [{"N": int(N), "count": int(c)} for N, c in zip(est.grid, est.counts)]
    summary = {k: v for k, v in est.to_json().items() if k not in ("grid", "counts")}
    return RunResult({"dim.csv": rows}, summary)


def _exp_weighted(ctx: Context) -> RunResult:
    p = ctx.p
    A = p.A.build(ctx.seed)
    rows, summary = [], {}
    for g in p.gammas:
        ser = weighted_sum(A, Fraction(p.a), Fraction(g), p.grid.build())
        rows += [{"gamma": g, **r} for r in ser.rows()]
        summary[g] = {"trend": ser.trend, "log_slope": ser.log_slope,
                      "identity_holds": ser.identity_holds()}
    return RunResult({"weighted.csv": rows}, summary)


def _exp_transverse(ctx: Context, p=None) -> RunResult:
    p = p or ctx.p
    A, s, t = p.A.build(ctx.seed), p.sequence.build(), ctx.target(p.target)
    seeds = [sub_seed(ctx.seed, "y", i) for i in range(p.seeds)]
    rep = transversality_experiment(A, seeds, s, t, tuple(p.window), p.eta, p.lambda_cap,
                                    p.lambda_seeds, ctx.prec.guard_bits)
    rows = [{k: v for k, v in r.items() if k != "counts"} for r in rep.per_seed]
    return RunResult({"transverse.csv": rows}, rep.to_json(), rep.regime)


def _hits_for_average(y, s, t, M: int, guard_bits: int, bit_cap: int):
    """A hitting set with at least M members, growing the horizon geometrically."""
    a = float(t.a)
    N = max(100, int(((1 - a) * M * 1.3) ** (1 / (1 - a))))
    if s.horizon is not None:
        N = min(N, s.horizon)
    while True:
        h = hitting_ensemble([y], s, t, N, IntegerSet.all(), guard_bits, bit_cap)[0]
        if len(h) >= M or (s.horizon is not None and N >= s.horizon):
            return h
        N *= 2


def _x_point(ctx, pc, i):
    if pc.kind == "rational":
        return Fraction(pc.value)
    return FractionalOracle.bitstream(sub_seed(ctx.seed, "x", i), guard_bits=ctx.prec.guard_bits)


def _exp_ergodic(ctx: Context, p=None) -> RunResult:
    p = p or ctx.p
    s, t = p.sequence.build(), ctx.target(p.target)
    sys, f = p.system.build(), p.observable.build()
    rows, pf = [], 0
    finals = []
    for i, y in enumerate(ctx.y_oracles(p.seeds)):
        h = _hits_for_average(y, s, t, p.M_grid[-1], ctx.prec.guard_bits, ctx.prec.bit_cap)
        pf += len(h.precision_failures)
        x = _x_point(ctx, p.x, i)
        if sys.is_finite:
            x = sub_seed(ctx.seed, "x", i) % sys.k
        grid = [M for M in p.M_grid if M <= len(h)]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            ser = ergodic_average(h, sys, f, x, grid, s, t)
        for r in ser.rows():
            rows.append({"system": sys.kind, "f": f.kind, "seed": i, **r})
        if ser.points:
            finals.append(ser.points[-1])
    regime = ctx.regime(s, t)
    summary = {"system": sys.to_json(), "observable": f.to_json(),
               "final_M": [fp[0] for fp in finals],
               "final_deviation": [fp[4] for fp in finals],
               "median_final_deviation": statistics.median(fp[4] for fp in finals) if finals else None,
               "regime_warning": not regime.get("two_a_plus_delta_lt_1", True)}
    return RunResult({"ergodic.csv": rows}, summary, regime, pf)


def _exp_vprime(ctx: Context) -> RunResult:
    p = ctx.p
    s, t = p.sequence.build(), ctx.target()
    seeds = [sub_seed(ctx.seed, "y", i) for i in range(p.seeds)]
    b = float(Fraction(p.b)) if p.b is not None else None
    res = vprime_expectation(s, t, p.grid.build(), seeds, b, ctx.prec.guard_bits)
    rows = [{"N": N, "mean": m} for N, m in zip(res["grid"], res["mean"])]
    per = [{"replica": i, "N": N, "value": v}
           for i, vals in enumerate(res["per_seed"]) for N, v in zip(res["grid"], vals)]
    summary = {k: res[k] for k in ("a", "b", "delta", "epsilon", "slope")}
    summary["b_default_used"] = p.b is None
    return RunResult({"vprime.csv": rows, "vprime_per_seed.csv": per}, summary, ctx.regime(s, t))


# ---------------------------------------------------------------------------
# presets


def preset_config(name: str, seeds: int | None = None) -> dict:
    """The concrete experiment a preset stands for."""
    if name == "corollary-1.10":
        return {"experiment": "transverse", "params": {
            "A": {"kind": "primes"},
            "sequence": {"family": "stretched", "alpha": "2", "b": "1/2"},
            "target": {"a": "1/5", "placement": "symmetric", "n0": 2},
            "window": [10**3, 10**7], "seeds": seeds or 20, "lambda_cap": 10**5}}
    if name == "lln-default":
        return {"experiment": "lln", "params": {
            "sequence": {"family": "geometric", "alpha": "2"}, "target": {"a": "3/10"},
            "grid": {"n_min": 10**3, "n_max": 10**5}, "seeds": seeds or 100}}
    if name == "Q1":
        return {"experiment": "ergodic", "variants": ["rotation", "times_p"], "params": {
            "sequence": {"family": "polynomial", "m": 1}, "target": {"a": "1/5"},
            "observable": {"kind": "trig", "terms": [[1, 1.0, 0.0]]},
            "M_grid": [10, 100, 1000], "seeds": seeds or 5}}
    if name == "Q2":
        return {"experiment": "ergodic", "variants": ["times_p"], "params": {
            "sequence": {"family": "polynomial", "m": 2}, "target": {"a": "1/5"},
            "observable": {"kind": "indicator", "intervals": [["0", "1/2"]]},
            "M_grid": [10, 100, 1000], "seeds": seeds or 5}}
    raise ValueError(f"unknown preset {name!r}")


_VARIANT_SYSTEMS = {"rotation": {"kind": "rotation", "theta": "golden"},
                    "times_p": {"kind": "times_p", "p": 2}}


def _exp_preset(ctx: Context) -> RunResult:
    spec = preset_config(ctx.p.name, ctx.p.seeds)
    variants = spec.pop("variants", None)
    base = ctx.cfg.model_dump()
    if not variants:
        sub = load_config({**base, **spec})
        res = EXPERIMENTS[sub.experiment](Context(sub))
        res.summary = {"preset": ctx.p.name, "resolved": sub.resolved()["params"], **res.summary}
        return res
    merged = RunResult(summary={"preset": ctx.p.name, "variants": {}})
    rows = []
    for v in variants:
        params = dict(spec["params"], system=_VARIANT_SYSTEMS[v])
        sub = load_config({**base, "experiment": spec["experiment"], "params": params})
        res = EXPERIMENTS[sub.experiment](Context(sub))
        rows += res.tables["ergodic.csv"]
        merged.summary["variants"][v] = {"resolved": sub.resolved()["params"], **res.summary}
        merged.regime = res.regime
        merged.precision_failures += res.precision_failures
    merged.tables["ergodic.csv"] = rows
    return merged


EXPERIMENTS = {"hit": _exp_hit, "lln": _exp_lln, "corr": _exp_corr, "fourfold": _exp_fourfold,
               "bounds": _exp_bounds, "dim": _exp_dim, "weighted": _exp_weighted,
               "transverse": _exp_transverse, "ergodic": _exp_ergodic, "vprime": _exp_vprime,
               "preset": _exp_preset}


# ---------------------------------------------------------------------------
# run and replay


def resolve_output(cfg: ExperimentConfig, out: str | None) -> Path:
    if out:
        return Path(out)
    if cfg.output:
        return Path(cfg.output)
    base = os.environ.get(OUTPUT_ENV, "shrinktarget-out")
    return Path(base) / f"{cfg.experiment}-{cfg.seed}"


def apply_overrides(data: dict, seed=None, work_bits=None, guard_bits=None) -> dict:
    data = json.loads(json.dumps(data))
    if seed is not None:
        data["seed"] = int(seed)
    prec = data.setdefault("precision", {})
    if work_bits is not None:
        prec["work_bits"] = int(work_bits)
    if guard_bits is not None:
        prec["guard_bits"] = int(guard_bits)
    return data


def execute(cfg: ExperimentConfig, out_dir: Path) -> dict:
    """Run, write all artifacts, then the manifest; returns the manifest."""
    start = time.perf_counter()
    result = EXPERIMENTS[cfg.experiment](Context(cfg))
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, rows in sorted(result.tables.items()):
        cols, rows = rows if isinstance(rows, tuple) else (None, rows)
        path = out_dir / name
        path.write_text(csv_text(rows, cols), encoding="utf-8", newline="")
        files[name] = sha256_file(path)
    summary_path = out_dir / "summary.json"
    summary_path.write_text(json_text(result.summary), encoding="utf-8", newline="")
    files["summary.json"] = sha256_file(summary_path)
    status = "precision_failures" if result.precision_failures else "ok"
    manifest = {"config": cfg.resolved(), "version": __version__,
                "wall_time_s": round(time.perf_counter() - start, 3),
                "regime": _jsonable(result.regime), "files": files, "status": status,
                "precision_failures": result.precision_failures}
    if cfg.experiment == "vprime" and result.summary.get("b_default_used"):
        manifest["b_default"] = result.summary["b"]
    (out_dir / MANIFEST).write_text(json_text(manifest), encoding="utf-8", newline="")
    return manifest


def run_config(data: dict, out: str | None = None, **overrides) -> tuple[dict, Path]:
    cfg = load_config(apply_overrides(data, **overrides))
    out_dir = resolve_output(cfg, out)
    return execute(cfg, out_dir), out_dir


def _close(a: str, b: str) -> bool:
    if a == b:
        return True
    try:
        x, y = float(a), float(b)
    except ValueError:
        return False
    if math.isnan(x) and math.isnan(y):
        return True
    return abs(x - y) <= ABS_TOL + REL_TOL * max(abs(x), abs(y))


def _csv_close(p: Path, q: Path) -> bool:
    ra = list(csv.reader(p.read_text().splitlines()))
    rb = list(csv.reader(q.read_text().splitlines()))
    return len(ra) == len(rb) and all(
        len(x) == len(y) and all(_close(u, v) for u, v in zip(x, y)) for x, y in zip(ra, rb))


def _json_close(a, b) -> bool:
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_json_close(a[k], b[k]) for k in a)
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(_json_close(x, y) for x, y in zip(a, b))
    if isinstance(a, (int, float)) and isinstance(b, (int, float)) and not isinstance(a, bool):
        return _close(repr(float(a)), repr(float(b)))
    return a == b


def replay(manifest_path: str | Path, **overrides) -> dict:
    """Re-run a manifest's config in a scratch directory and compare artifacts.

    status is "match" when every checksum agrees, "tolerant-match" when the
    precision was overridden and every value agrees within the cross-precision
    tolerance, and "mismatch" otherwise.
    """
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    original_dir = manifest_path.parent
    data = apply_overrides(manifest["config"], **overrides)
    cfg = load_config(data)
    precision_changed = cfg.precision.model_dump() != manifest["config"]["precision"]
    scratch = Path(tempfile.mkdtemp(prefix="shrinktarget-replay-"))
    try:
        fresh = execute(cfg, scratch)
        diffs, missing, tolerant = [], [], True
        for name, digest in manifest["files"].items():
            if fresh["files"].get(name) == digest:
                continue
            diffs.append(name)
            orig = original_dir / name
            if not orig.exists():
                missing.append(name)
                tolerant = False
                continue
            if name.endswith(".csv"):
                tolerant &= _csv_close(orig, scratch / name)
            else:
                tolerant &= _json_close(json.loads(orig.read_text()),
                                        json.loads((scratch / name).read_text()))
        extra = sorted(set(fresh["files"]) - set(manifest["files"]))
        if not diffs and not extra:
            status = "match"
        elif precision_changed and tolerant and not extra:
            status = "tolerant-match"
        else:
            status = "mismatch"
        return {"status": status, "differing": diffs, "missing": missing, "extra": extra}
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


__all__ = ["EXPERIMENTS", "OUTPUT_ENV", "PrecisionError", "csv_text", "default_b", "execute",
           "hitting_set", "preset_config", "replay", "run_config"]
