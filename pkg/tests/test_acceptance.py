"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they
happen; they are also repeated in the terminal summary.
"""

import json
import random
import statistics
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from conftest import CRITERIA

from shrinktarget.measurelab import (
    JointSpec,
    joint_cases,
    joint_measure_periods,
    joint_measure_sweep,
    mc_joint,
    preimage,
    random_sigma_case,
    sigma_closed_form,
)
from shrinktarget.runner import preset_config, replay, run_config
from shrinktarget.sequences import GrowthSequence, TargetScheme

F = Fraction


def record(k: int, ok: bool, detail: str, elapsed: float, budget: float):
    within = elapsed <= budget
    detail = f"{detail}; {elapsed:.1f}s (budget {budget:.0f}s)"
    CRITERIA[k] = (ok and within, detail)
    print(f"\ncriterion {k:2d}: {'PASS' if ok and within else 'FAIL'}  {detail}")
    assert ok, detail
    assert within, f"runtime {elapsed:.1f}s over budget {budget:.0f}s"


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    """Output directories of runner-driven criteria, for the replay check."""
    return {"root": tmp_path_factory.mktemp("acceptance"), "dirs": []}


def run(runs, name: str, data: dict) -> tuple[dict, Path]:
    out = runs["root"] / name
    manifest, out_dir = run_config(data, str(out))
    runs["dirs"].append(out_dir)
    summary = json.loads((out_dir / "summary.json").read_text())
    assert manifest["status"] == "ok"
    return summary, out_dir


def test_criterion_01_sigma_bracket():
    t0 = time.perf_counter()
    rng = random.Random(1)
    violations = 0
    for _ in range(1000):
        u, n, t = random_sigma_case(rng, u_max=10**5)
        I = t.target(n)
        sg = sigma_closed_form(u, I)
        m = I.measure
        slack = sg.err + 2 * m.err
        lo, hi = m.value * (1 - 1 / u), m.value * (1 + 1 / u)
        if sg.value < lo - slack or sg.value > hi + slack:
            violations += 1
    record(1, violations == 0, f"{violations} bracket violations in 1000 cases",
           time.perf_counter() - t0, 60)


def test_criterion_02_dual_joint_measure():
    t0 = time.perf_counter()
    violations = 0
    for un, um, n, m, t in joint_cases(200, seed=2, u_max=10**5):
        pre_n = preimage(un, t.target(n))
        sweep = joint_measure_sweep([pre_n, preimage(um, t.target(m))])
        periods = joint_measure_periods(pre_n, um, t.target(m))
        if abs(sweep.value - periods.value) > sweep.err + periods.err:
            violations += 1
    record(2, violations == 0, f"{violations} sweep/periods disagreements in 200 cases",
           time.perf_counter() - t0, 60)


def random_joint_specs(count: int, seed: int):
    rng = random.Random(seed)
    for _ in range(count):
        alpha = rng.choice([2, 3])
        n_top = 16 if alpha == 2 else 10  # u <= 10^5
        k = rng.randint(1, 3)
        idx = tuple(sorted(rng.sample(range(1, n_top + 1), k)))
        placement = rng.choice(["anchored", "symmetric", "seeded_random", "split"])
        t = TargetScheme(F(rng.choice([1, 2, 3, 5]), 10), ell=rng.randint(1, 3) if placement == "split" else 1,
                         placement=placement, seed=rng.getrandbits(32), n0=2)
        if placement == "symmetric" and idx[0] == 1:
            continue
        yield JointSpec(idx, GrowthSequence.geometric(alpha), t)


def test_criterion_03_monte_carlo_consistency():
    t0 = time.perf_counter()
    specs = list(random_joint_specs(140, 3))[:100]
    assert len(specs) == 100
    covered = 0
    for i, spec in enumerate(specs):
        exact = float(joint_measure_sweep(spec.preimages()).value)
        _, lo, hi = mc_joint(spec, 10**5, seed=1000 + i)
        covered += lo <= exact <= hi
    record(3, covered >= 93, f"Wilson 95% interval covers the exact measure in {covered}/100",
           time.perf_counter() - t0, 300)


def test_monte_carlo_coverage_on_large_batch():
    # nominal 95% within three binomial sd over 1000 specs
    covered = 0
    for i, spec in enumerate(list(random_joint_specs(1400, 77))[:1000]):
        exact = float(joint_measure_sweep(spec.preimages()).value)
        _, lo, hi = mc_joint(spec, 10**5, seed=50000 + i)
        covered += lo <= exact <= hi
    assert 929 <= covered <= 971, covered


def test_criterion_04_covariance_bound(runs):
    t0 = time.perf_counter()
    s, _ = run(runs, "c4", {"experiment": "bounds", "seed": 4,
                            "params": {"kind": "cov", "alpha": "2", "a_values": ["1/5", "3/10", "1/2"],
                                       "fit_cases": 500, "fresh_cases": 500}})
    ok = s["fresh_max"] <= 10 * s["C_fitted"]
    record(4, ok, f"C_fitted={s['C_fitted']:.4g}, fresh max ratio={s['fresh_max']:.4g}",
           time.perf_counter() - t0, 120)


def test_criterion_05_fourfold_bound(runs):
    t0 = time.perf_counter()
    s, _ = run(runs, "c5", {"experiment": "bounds", "seed": 5,
                            "params": {"kind": "fourfold", "alpha": "2",
                                       "fit_cases": 500, "fresh_cases": 500}})
    ok = s["fresh_max"] <= 10 * s["C_fitted"]
    record(5, ok, f"C_fitted={s['C_fitted']:.4g}, fresh max ratio={s['fresh_max']:.4g}",
           time.perf_counter() - t0, 600)


def test_criterion_06_law_of_large_numbers(runs):
    t0 = time.perf_counter()
    _, out = run(runs, "c6", preset_config("lln-default"))
    rows = {int(r["N"]): r for r in _csv(out / "lln_summary.csv")}
    final, first = rows[10**5], rows[10**3]
    mean = float(final["mean_ratio"])
    sd_hi, sd_lo = float(final["sd_ratio"]), float(first["sd_ratio"])
    ok = 0.9 <= mean <= 1.1 and sd_hi < sd_lo
    record(6, ok, f"mean |Lambda cap [1,N]|/N^0.7 at N=1e5 is {mean:.4f} (needs [0.9, 1.1]); "
                  f"sd {sd_lo:.4f} at 1e3 -> {sd_hi:.4f} at 1e5; "
                  f"sigma-normalized mean {float(final['mean_ratio_sigma']):.4f}",
           time.perf_counter() - t0, 300)


def test_lln_against_expected_count(runs):
    # the count normalized by its own expectation sum sigma_n does tend to 1
    out = runs["root"] / "c6"
    if not (out / "lln_summary.csv").exists():
        _, out = run(runs, "c6", preset_config("lln-default"))
    rows = {int(r["N"]): r for r in _csv(out / "lln_summary.csv")}
    assert abs(float(rows[10**5]["mean_ratio_sigma"]) - 1) < 0.02
    assert abs(float(rows[10**5]["mean_ratio_scaled"]) - 1) < 0.02
    assert float(rows[10**5]["sd_ratio_sigma"]) < float(rows[10**3]["sd_ratio_sigma"])


def test_criterion_07_summation_by_parts(runs):
    t0 = time.perf_counter()
    _, out = run(runs, "c7", {"experiment": "weighted", "seed": 7,
                              "params": {"A": {"kind": "squares"}, "a": "1/5",
                                         "gammas": ["2/5", "1/5"],
                                         "grid": {"points": [10**4, 10**5, 10**6, 10**7, 10**8]}}})
    rows = _csv(out / "weighted.csv")
    by = {}
    for r in rows:
        by.setdefault(r["gamma"], {})[int(r["N"])] = r
    s04 = by["2/5"]
    s02 = by["1/5"]
    drop = float(s04[10**4]["S"]) / float(s04[10**8]["S"])
    rise = float(s02[10**8]["S"]) / float(s02[10**4]["S"])
    identity = all(abs(float(r["S"]) - float(r["S1"]) - float(r["S2"])) <= float(r["err"]) for r in rows)
    ok = drop >= 2 and rise >= 2 and identity
    record(7, ok, f"S(0.4) falls {drop:.2f}x, S(0.2) rises {rise:.2f}x over [1e4, 1e8]; "
                  f"S = S1 + S2 at every point: {identity}", time.perf_counter() - t0, 60)


def test_criterion_08_transversality(runs):
    t0 = time.perf_counter()
    base = {"A": {"kind": "squares"}, "sequence": {"family": "geometric", "alpha": "2"},
            "window": [10**4, 10**8], "seeds": 50}
    s, _ = run(runs, "c8", {"experiment": "transverse", "seed": 8,
                            "params": {**base, "target": {"a": "1/5"}}})
    d, _ = run(runs, "c8-degenerate", {"experiment": "transverse", "seed": 8,
                                       "params": {**base, "target": {"a": "7/10"}, "lambda_seeds": 0}})
    slope_ok = abs(s["median_slope"] - 0.3) <= 0.1
    ok = slope_ok and d["degenerate_exponent"] < 0.05 and s["uncertain"] == 0
    record(8, ok, f"median slope {s['median_slope']:.4f} (needs 0.3 +/- 0.1); degenerate growth "
                  f"exponent {d['degenerate_exponent']:.4f} (needs < 0.05)",
           time.perf_counter() - t0, 600)


def test_criterion_09_prime_corollary(runs):
    t0 = time.perf_counter()
    s, _ = run(runs, "c9", {"experiment": "preset", "seed": 9, "params": {"name": "corollary-1.10"}})
    slope = s["median_slope"]
    record(9, abs(slope - 0.8) <= 0.1, f"median slope {slope:.4f} (needs 0.8 +/- 0.1)",
           time.perf_counter() - t0, 600)


def _ergodic(runs, name, seed, params):
    return run(runs, name, {"experiment": "ergodic", "seed": seed, "params": params})


def test_criterion_10_ergodic_convergence(runs):
    t0 = time.perf_counter()
    seq = {"family": "geometric", "alpha": "3/2"}
    tgt = {"a": "1/5"}
    common = {"sequence": seq, "target": tgt, "M_grid": [100, 1000, 10**4], "seeds": 20}
    # (i) identity: exact at every M
    _, out = _ergodic(runs, "c10-identity", 10, {**common, "system": {"kind": "identity"},
                                                 "observable": {"kind": "trig", "terms": [[1, 1.0, 0.0]]},
                                                 "x": {"kind": "rational", "value": "1/7"},
                                                 "seeds": 3})
    rows = _csv(out / "ergodic.csv")
    exact = all(r["avg"] == r["target"] for r in rows)
    # (ii) golden rotation, cos
    s2, _ = _ergodic(runs, "c10-rotation", 10, {**common, "system": {"kind": "rotation", "theta": "golden"},
                                                "observable": {"kind": "trig", "terms": [[1, 1.0, 0.0]]}})
    good2 = sum(M == 10**4 and d < 0.05 for M, d in zip(s2["final_M"], s2["final_deviation"]))
    # (iii) doubling map, indicator of [0, 1/2)
    s3, _ = _ergodic(runs, "c10-doubling", 10, {**common, "system": {"kind": "times_p", "p": 2},
                                                "observable": {"kind": "indicator",
                                                               "intervals": [["0", "1/2"]]}})
    good3 = sum(M == 10**4 and d < 0.05 for M, d in zip(s3["final_M"], s3["final_deviation"]))
    # (iv) disjoint union: component means +-1/4, global mean 0
    _, out4 = _ergodic(runs, "c10-union", 10, {
        **common, "system": {"kind": "disjoint_union", "thetas": ["golden", "sqrt2"]},
        "observable": {"kind": "per_component", "parts": [
            {"kind": "trig", "c0": 0.25, "terms": [[1, 1.0, 0.0]]},
            {"kind": "trig", "c0": -0.25, "terms": [[1, 1.0, 0.0]]}]}})
    final4 = [r for r in _csv(out4 / "ergodic.csv") if int(r["M"]) == 10**4]
    comp = all(abs(float(r["deviation"])) < 0.05 and abs(float(r["avg"])) >= 0.1 for r in final4)
    ok = exact and good2 >= 18 and good3 >= 18 and comp and len(final4) == 20
    record(10, ok, f"(i) identity exact: {exact}; (ii) rotation {good2}/20; (iii) doubling {good3}/20; "
                   f"(iv) component mean reached, >= 0.1 from global mean: {comp}",
           time.perf_counter() - t0, 900)


def test_criterion_11_vprime_decay(runs):
    t0 = time.perf_counter()
    s, _ = run(runs, "c11", {"experiment": "vprime", "seed": 11,
                             "params": {"sequence": {"family": "geometric", "alpha": "2"},
                                        "target": {"a": "1/5"}, "b": "3/5",
                                        "grid": {"points": [2**k for k in range(8, 15)]},
                                        "seeds": 100}})
    record(11, s["slope"] <= -0.05, f"log-log slope of mean V' is {s['slope']:.4f} (needs <= -0.05)",
           time.perf_counter() - t0, 900)


def test_criterion_12_replay_is_bit_identical(runs, tmp_path):
    t0 = time.perf_counter()
    dirs = list(runs["dirs"])
    if len(dirs) < 3:
        for i in range(3 - len(dirs)):
            run(runs, f"c12-{i}", preset_config("lln-default", seeds=5) | {"seed": 120 + i})
        dirs = list(runs["dirs"])
    chosen = random.Random(12).sample(sorted(dirs), 3)
    results = [replay(d / "manifest.json") for d in chosen]
    statuses = [r["status"] for r in results]
    ok = statuses == ["match"] * 3
    record(12, ok, "replayed " + ", ".join(f"{d.name}={st}" for d, st in zip(chosen, statuses)),
           time.perf_counter() - t0, 600)


def _csv(path: Path) -> list[dict]:
    import csv

    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_recorded_values_are_finite():
    for k, (_, detail) in CRITERIA.items():
        assert "nan" not in detail.lower(), (k, detail)
    assert np.isfinite(statistics.fmean([1.0]))
