"""Invariant suite behind ``adaptlep verify``.

Each check returns a ``CheckResult``; ``run_suite`` runs them all in order.
Monte-Carlo gates use fixed seeds, so the suite is deterministic.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import environments as envs
from .estimators import (EstimatorConfig, ReservoirState, Setting, build_estimate)
from .learners import LearnerConfig, eta_cap, run_le_prediction
from .omd import KKT_TOL, kkt_residual, solve_step
from .regularizers import Kind, Regularizer, hybrid, negentropy

log = logging.getLogger(__name__)

MC_SIGMAS = 4.0
CLOSED_FORM_TOL = 1e-8


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _z_gate(samples, target):
    samples = np.asarray(samples)
    se = samples.std(axis=0, ddof=1) / np.sqrt(samples.shape[0])
    z = np.abs(samples.mean(axis=0) - target) / np.maximum(se, 1e-15)
    return float(z.max())


def check_full_info_unbiased(draws=20000, seed=1):
    rng = np.random.default_rng(seed)
    K, eps = 5, 0.2
    loss, msg = rng.random(K), rng.random(K)
    cfg = EstimatorConfig(Setting.LE_FULL, eps, eta_cap(K), K)
    est = np.array([build_estimate(cfg, msg, loss, query_flag=q) for q in rng.random(draws) < eps])
    z = _z_gate(est, loss)
    return z <= MC_SIGMAS, f"max |z| = {z:.2f} over {K} coordinates"


def check_bandit_unbiased(draws=20000, seed=2):
    rng = np.random.default_rng(seed)
    K, eps = 4, 0.3
    loss, msg = rng.random(K), rng.random(K)
    play = np.array([0.1, 0.2, 0.3, 0.4])
    cfg = EstimatorConfig(Setting.LE_BANDIT, eps, eta_cap(K), K)
    arms = rng.choice(K, size=draws, p=play)
    queried = rng.random(draws) < eps
    est = np.array([build_estimate(cfg, msg, loss[i], played_arm=i, query_flag=q, play_dist=play)
                    for i, q in zip(arms, queried)])
    z = _z_gate(est, loss)
    return z <= MC_SIGMAS, f"max |z| = {z:.2f} over {K} coordinates"


def check_hard_pm_unbiased(draws=20000, seed=3):
    rng = np.random.default_rng(seed)
    game = envs.bundled_game("hard4")
    K = game.num_actions
    y = 2
    comp = rng.random((K, K))
    mix = 0.7 * np.array([0.1, 0.2, 0.3, 0.4]) + 0.3 / K
    cfg = EstimatorConfig(Setting.HARD_PM, 1.0, 0.01, K)
    arms = rng.choice(K, size=draws, p=mix)
    est = np.array([build_estimate(cfg, comp, game.W[:, i] * game.H[i, y], played_arm=i, play_dist=mix)
                    for i in arms])
    z = _z_gate(est, game.L[:, y])
    return z <= MC_SIGMAS, f"max |z| = {z:.2f} against column {y} of L"


def check_reservoir_uniform(reps=4000, stream=64, cap=8, seed=4):
    counts = np.zeros(stream)
    ss = np.random.SeedSequence(seed).spawn(reps)
    for child in ss:
        res = ReservoirState(cap, 1, child)
        for v in range(stream):
            res.observe([v])
        counts[res.samples[:, 0].astype(int)] += 1
    p = stats.chisquare(counts).pvalue
    return p > 1e-3, f"inclusion chi-square p = {p:.3f}"


def check_reservoir_variance(reps=4000, stream=64, cap=8, seed=5):
    values = np.random.default_rng(seed).random(stream)
    means = np.empty(reps)
    for r, child in enumerate(np.random.SeedSequence(seed).spawn(reps)):
        res = ReservoirState(cap, 1, child)
        for v in values:
            res.observe([v])
        means[r] = res.mean()[0][0]
    # sampling k of N without replacement
    expected = values.var(ddof=1) / cap * (1 - cap / stream)
    ratio = means.var(ddof=1) / expected
    z = abs(means.mean() - values.mean()) / np.sqrt(expected / reps)
    ok = 0.85 <= ratio <= 1.15 and z <= MC_SIGMAS
    return ok, f"variance ratio {ratio:.3f}, mean |z| = {z:.2f}"


def check_kkt(instances=3000, seed=6):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        K = int(rng.integers(2, 17))
        reg = Regularizer(list(Kind)[rng.integers(3)], float(10 ** rng.uniform(-4, 1)), K)
        xp = rng.dirichlet(np.full(K, 0.5)) + 1e-6
        xp /= xp.sum()
        cost = rng.normal(size=K) * 10 ** rng.uniform(-3, 1)
        x = solve_step(reg, xp, cost)
        worst = max(worst, kkt_residual(reg, x, xp, cost))
    return worst <= KKT_TOL, f"max KKT residual {worst:.2e} over {instances} solves"


def check_closed_form(instances=2000, seed=7):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        K = int(rng.integers(2, 17))
        eta = float(10 ** rng.uniform(-3, 0))
        xp = rng.dirichlet(np.ones(K))
        cost = rng.random(K) * 3
        w = xp * np.exp(-eta * cost)
        worst = max(worst, float(np.max(np.abs(solve_step(negentropy(eta, K), xp, cost) - w / w.sum()))))
    return worst <= CLOSED_FORM_TOL, f"max deviation from multiplicative weights {worst:.2e}"


def check_bregman(instances=5000, seed=8):
    rng = np.random.default_rng(seed)
    low, self_max = np.inf, 0.0
    for _ in range(instances):
        K = int(rng.integers(2, 12))
        reg = Regularizer(list(Kind)[rng.integers(3)], float(10 ** rng.uniform(-3, 1)), K)
        x, y = rng.dirichlet(np.ones(K)), rng.dirichlet(np.ones(K))
        low = min(low, reg.bregman(x, y))
        self_max = max(self_max, abs(reg.bregman(x, x)))
    return low >= 0 and self_max <= 1e-12, f"min D = {low:.3e}, max |D(x, x)| = {self_max:.1e}"


def _reference_env(T, K, seed):
    base = np.r_[0.3, np.full(K - 1, 0.6)]
    return envs.gen_fixed_variation(T, K, T * K * 0.02, base, seed)


def check_reference_run(T=10_000, K=4, seeds=20):
    totals = dict(lemma1_violations=0, dual_norm_violations=0, stability_flags=0, kkt_flags=0)
    ratio = 0.0
    for s in range(seeds):
        cfg = LearnerConfig(Setting.LE_FULL, T, T // 4, "cap", seed=s)
        tr = run_le_prediction(cfg, _reference_env(T, K, s), detail=False)
        inv = tr.invariant_summary()
        for k in totals:
            totals[k] += inv[k]
        ratio = max(ratio, inv["max_stability_ratio"])
    ok = all(v == 0 for v in totals.values())
    parts = ", ".join(f"{k}={v}" for k, v in totals.items())
    return ok, f"{parts}; max x'/x ratio {ratio:.4f} ({seeds} seeds x {T} rounds)"


def check_negative_control(T=10_000, seeds=3):
    K = 2
    eta = 100 * eta_cap(K)
    flags = 0
    for s in range(seeds):
        cfg = LearnerConfig(Setting.LE_FULL, T, T // 2, eta, corrections_enabled=False, seed=s, strict=False)
        tr = run_le_prediction(cfg, envs.gen_alternating(T, K), detail=False)
        flags += tr.invariant_summary()["stability_flags"]
    return flags > 0, f"{flags} stability flags at eta = 100/(162K), corrections off"


CHECKS = (
    ("estimator unbiasedness (full information)", check_full_info_unbiased),
    ("estimator unbiasedness (bandit)", check_bandit_unbiased),
    ("estimator unbiasedness (hard partial monitoring)", check_hard_pm_unbiased),
    ("reservoir uniformity", check_reservoir_uniform),
    ("reservoir mean variance", check_reservoir_variance),
    ("OMD KKT residual", check_kkt),
    ("OMD closed-form equivalence", check_closed_form),
    ("Bregman nonnegativity", check_bregman),
    ("reference run per-round flags", check_reference_run),
    ("oversized eta negative control", check_negative_control),
)


def run_suite(emit=print) -> list[CheckResult]:
    results = []
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed check, not a crashed suite
            log.exception("check %s raised", name)
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        res = CheckResult(name, bool(ok), detail, time.perf_counter() - t0)
        if emit:
            emit(res.line())
        results.append(res)
    return results
