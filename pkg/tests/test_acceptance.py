"""Acceptance gate: nine criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v``; the lines are printed even when
output capture is on.
"""

import math
import time

import numpy as np
import pytest

from adaptlep import environments as envs
from adaptlep import harness
from adaptlep.checks import run_suite
from adaptlep.learners import LearnerConfig, run_le_prediction_no_corrections, run_parameter_free


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number} ({title}): {detail}")
        return ok
    return emit


def sweep(text, **over):
    return harness.run_sweep(harness.parse_config(text, {k: str(v) for k, v in over.items()}))


def slope_of(cells, x):
    return harness.fit_slope([(x(c), c.mean_regret) for c in cells])


def test_bound_ratio_full_information(report):
    t0 = time.perf_counter()
    base = "learner = le_prediction\nT = 2^14\nn = T/2\nK = 2, 8\neta = cap\nseeds = 30\n"
    results = [
        sweep(base + "environment = constant_best"),
        sweep(base + "environment = fixed_variation\nbase_low = 0.25\ngap = 0.5\nqstar = sqrt(T)\nq_other = T*0.01"),
        sweep(base + "environment = fixed_variation\nbase_low = 0.4\ngap = 0.2\nqstar = T/8\nq_other = T/8"),
    ]
    rows = [row for res in results for row in harness.bound_overlay(res)]
    cells = [c for res in results for c in res.cells]
    elapsed = time.perf_counter() - t0
    ok = len(rows) == 6 and all(r["within"] for r in rows) and elapsed <= 300
    qstars = sorted({round(c.mean_Qstar) for c in cells})
    worst = max(r["ratio"] for r in rows)
    assert report(1, "regret vs Q*-bound", ok,
                  f"6/6 cells needed, {sum(r['within'] for r in rows)}/6 within bound + 3 stderr; "
                  f"max ratio {worst:.3f}; Q* levels {qstars}; {elapsed:.0f}s")


def test_scaling_in_budget(report):
    t0 = time.perf_counter()
    res = sweep("learner = le_prediction\nenvironment = fixed_variation\nT = 2^14\n"
                "n = 2^6, 2^7, 2^8, 2^9, 2^10, 2^11, 2^12\nK = 8\nbase_low = 0.25\ngap = 0.5\n"
                "qstar = T*0.0625\nq_other = T*0.0625\neta = qstar\nstrict = false\nseeds = 30")
    slope, err = slope_of(res.cells, lambda c: c.n)
    elapsed = time.perf_counter() - t0
    ok = len(res.cells) == 7 and abs(slope + 0.5) <= 0.15 and elapsed <= 600
    assert report(2, "regret vs n slope", ok,
                  f"slope {slope:.3f} +- {err:.3f} (target -0.5 +- 0.15); {elapsed:.0f}s")


def test_scaling_in_variation(report):
    t0 = time.perf_counter()
    res = sweep("learner = le_no_corrections\nenvironment = fixed_variation\nT = 2^14\nn = 2^10\nK = 2\n"
                "base_low = 0.4\ngap = 0.1\ntarget_q = 2^4, 2^5, 2^6, 2^7, 2^8, 2^9, 2^10\neta = q\nseeds = 30")
    slope, err = slope_of(res.cells, lambda c: c.mean_Q)
    elapsed = time.perf_counter() - t0
    ok = len(res.cells) == 7 and abs(slope - 0.5) <= 0.15 and elapsed <= 600
    assert report(3, "regret vs Q slope, no corrections", ok,
                  f"slope {slope:.3f} +- {err:.3f} (target 0.5 +- 0.15); {elapsed:.0f}s")


def test_adaptive_beats_baseline_in_horizon(report):
    t0 = time.perf_counter()
    common = ("environment = fixed_variation\nT = 2^12, 2^13, 2^14, 2^15, 2^16, 2^17, 2^18\nn = sqrt(T)\n"
              "K = 4\nbase_low = 0.25\ngap = 0.5\nqstar = sqrt(T)\nq_other = T*0.04\nseeds = 10\n")
    adaptive = sweep(common + "learner = le_prediction\neta = qstar\nstrict = false")
    baseline = sweep(common + "learner = baseline\neta = classic")
    s1, e1 = slope_of(adaptive.cells, lambda c: c.T)
    s0, e0 = slope_of(baseline.cells, lambda c: c.T)
    elapsed = time.perf_counter() - t0
    ok = s1 <= 0.6 and s0 >= 0.7 and elapsed <= 1200
    assert report(4, "adaptive vs baseline slope in T", ok,
                  f"adaptive {s1:.3f} +- {e1:.3f} (<= 0.6), baseline {s0:.3f} +- {e0:.3f} (>= 0.7); {elapsed:.0f}s")


def test_doubling_within_factor_of_best_grid_rate(report):
    t0 = time.perf_counter()
    T, K, a = 100_000, 2, 0.25
    n = T // 10
    gap = math.sqrt(a * (1 - a) * K / n) / (2 * math.sqrt(2))
    makers = {
        "bernoulli_gap": lambda s: envs.gen_bernoulli_gap(T, K, a, gap, seed=s),
        "dyadic": lambda s: envs.gen_dyadic(T, 4, a, gap, seed=s),
        "fixed_variation": lambda s: envs.gen_fixed_variation(T, K, T * K * 0.04, [0.5 - gap / 2, 0.5 + gap / 2],
                                                              seed=s),
    }
    grid = [2.0 ** -j for j in range(-4, 13)]
    ratios = {}
    for name, make in makers.items():
        seqs = [make(s) for s in range(20)]
        doubling = np.mean([run_parameter_free(LearnerConfig("le_full", T, n, eta="auto", seed=s), e,
                                               detail=False).regret for s, e in enumerate(seqs)])
        best = min(np.mean([run_le_prediction_no_corrections(LearnerConfig("le_full", T, n, eta=eta, seed=s), e,
                                                             detail=False).regret for s, e in enumerate(seqs)])
                   for eta in grid)
        ratios[name] = doubling / best
    elapsed = time.perf_counter() - t0
    ok = all(r <= 4 for r in ratios.values())
    detail = ", ".join(f"{k} {v:.2f}" for k, v in ratios.items())
    assert report(5, "doubling vs best fixed eta", ok, f"regret ratios {detail} (each <= 4); {elapsed:.0f}s")


def test_bandit_bound_zero_variation(report):
    t0 = time.perf_counter()
    res = sweep("learner = le_bandits\nenvironment = constant_best\nT = 2^14\nn = T/2\nK = 2, 8\n"
                "eta = cap\nseeds = 30")
    rows = harness.bound_overlay(res)
    elapsed = time.perf_counter() - t0
    ok = len(rows) == 2 and all(r["within"] for r in rows)
    detail = ", ".join(f"K={c.K}: {c.mean_regret:.1f} vs {c.bound_value:.0f}" for c in res.cells)
    assert report(6, "bandit bound at Q* = 0", ok, f"{detail}; {elapsed:.0f}s")


def test_hard_partial_monitoring_slope(report):
    t0 = time.perf_counter()
    res = sweep("learner = hard_pm\nenvironment = columns\ngame = hard4\nprobs = 0.4, 0.2, 0.2, 0.2\n"
                "T = 2^12, 2^13, 2^14, 2^15, 2^16, 2^17\neta = pm\ngamma = pm\nseeds = 10")
    slope, err = slope_of(res.cells, lambda c: c.T)
    elapsed = time.perf_counter() - t0
    ok = len(res.cells) == 6 and abs(slope - 2 / 3) <= 0.15
    assert report(7, "hard partial monitoring slope in T", ok,
                  f"slope {slope:.3f} +- {err:.3f} (target 0.667 +- 0.15); {elapsed:.0f}s")


def test_invariant_suite(report):
    t0 = time.perf_counter()
    results = run_suite(emit=None)
    elapsed = time.perf_counter() - t0
    failed = [r.name for r in results if not r.passed]
    ok = not failed and elapsed <= 180
    assert report(8, "invariant suite", ok,
                  f"{len(results) - len(failed)}/{len(results)} checks passed"
                  + (f", failed: {failed}" if failed else "") + f"; {elapsed:.0f}s")


def test_lower_bound_environment_bites(report):
    t0 = time.perf_counter()
    T, n, a = 2 ** 14, 2 ** 10, 0.25
    learners = {"le_prediction": "cap", "le_no_corrections": "q", "parameter_free": "auto",
                "baseline": "classic", "le_bandits": "cap"}
    lines, ok = [], True
    for K in (2, 8):
        threshold = 0.25 * (T / 8) * math.sqrt(a * (1 - a) * K / n)
        for name, eta in learners.items():
            res = sweep(f"learner = {name}\nenvironment = bernoulli_gap\nalpha_center = {a}\nT = {T}\nn = {n}\n"
                        f"K = {K}\neta = {eta}\nseeds = 30")
            regret = res.cells[0].mean_regret
            ok &= regret >= threshold
            lines.append(f"K={K} {name} {regret:.1f}")
        lines.append(f"threshold K={K} {threshold:.1f}")
    elapsed = time.perf_counter() - t0
    assert report(9, "lower-bound stress", ok, "; ".join(lines) + f"; {elapsed:.0f}s")
