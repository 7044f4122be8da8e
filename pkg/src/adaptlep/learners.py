"""End-to-end learners.

    run_le_prediction               adaptive label-efficient prediction (hybrid regularizer, corrections)
    run_le_prediction_no_corrections  negentropy, messages, no corrections
    run_parameter_free              doubling over eta for the correction-free learner
    run_le_bandits                  label-efficient bandits (log-barrier, per-arm reservoirs)
    run_revealing_action            revealing-action partial monitoring
    run_hard_pm                     hard partial monitoring, L = W H, forced exploration
    run_baseline                    label-efficient multiplicative weights (no messages, no corrections)

Each run is a single jitted loop; per-round uniforms come from four seeded
substreams (query, action, reservoir, environment), so a run is a pure function of
its config and environment.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .environments import Environment, GameSpec, PMEnvironment
from .errors import ConfigError, SolverError
from .estimators import (CORRECTION_FACTOR, Setting, best_arm_variation, dedicated_rounds_per_arm,
                         quadratic_variation, reservoir_capacity, reservoir_mean, reservoir_push)
from .omd import (DUAL_NORM_LIMIT, STABILITY_RATIO, dual_norm_kernel, lemma_residual_kernel,
                  max_ratio_kernel, solve_simplex_step)
from .rng import substream

log = logging.getLogger(__name__)

BUDGET_MODES = ("expectation", "hard-cap")
LEMMA_SLACK = 1e-9

MODE_FULL, MODE_BANDIT, MODE_REVEAL = 0, 1, 2


def eta_cap(num_arms: int) -> float:
    """Largest learning rate covered by the corrected learners' guarantees: 1/(162 K)."""
    return 1.0 / (162.0 * num_arms)


@dataclass
class LearnerConfig:
    setting: Setting = Setting.LE_FULL
    horizon: int = 0
    budget: int | None = None
    eta: float | str = "cap"
    gamma: float | None = None
    alpha_reveal: float | None = None
    corrections_enabled: bool = True
    messages_enabled: bool = True
    budget_mode: str = "hard-cap"
    seed: int = 0
    strict: bool = True

    def __post_init__(self):
        self.setting = Setting(self.setting)
        if self.horizon < 0:
            raise ConfigError("horizon must be non-negative")
        if self.budget_mode not in BUDGET_MODES:
            raise ConfigError(f"budget_mode must be one of {BUDGET_MODES}")
        if self.setting in (Setting.LE_FULL, Setting.LE_BANDIT):
            if self.budget is None:
                raise ConfigError("label-efficient settings need a budget n")
            if self.horizon and not 0 < self.budget <= self.horizon:
                raise ConfigError(f"need 0 < n <= T, got n={self.budget}, T={self.horizon}")
        if self.gamma is not None and not 0 < self.gamma <= 1:
            raise ConfigError("gamma must lie in (0, 1]")
        if self.alpha_reveal is not None and not 0 < self.alpha_reveal <= 1:
            raise ConfigError("alpha must lie in (0, 1]")
        if isinstance(self.eta, str):
            if self.eta not in ("cap", "auto"):
                raise ConfigError(f"eta must be a positive number, 'cap' or 'auto', got {self.eta!r}")
        elif not self.eta > 0:
            raise ConfigError("eta must be positive")

    @property
    def epsilon(self) -> float:
        if not self.horizon:
            return 1.0
        return self.budget / self.horizon

    def resolve_eta(self, num_arms: int) -> float:
        if self.eta == "cap":
            return eta_cap(num_arms)
        if self.eta == "auto":
            raise ConfigError("eta = auto is only meaningful for the parameter-free learner")
        return float(self.eta)


@dataclass
class EpochState:
    """Doubling bookkeeping: epoch index, its eta, start round and the running statistic."""

    epoch_index: int
    epoch_eta: float
    epoch_start: int
    accumulator: float = 0.0


@dataclass
class RunTrace:
    learner: str
    losses: np.ndarray
    arms: np.ndarray
    queried: np.ndarray
    dedicated: np.ndarray
    learner_loss: np.ndarray
    lemma1_residual: np.ndarray
    dual_norm: np.ndarray
    stability_ratio: np.ndarray
    stability_flag: np.ndarray
    eta: float
    epsilon: float
    play: np.ndarray | None = None
    estimates: np.ndarray | None = None
    corrections: np.ndarray | None = None
    epochs: list = field(default_factory=list)
    kkt_flags: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return self.arms.size

    @property
    def cumulative_loss(self) -> float:
        return float(self.learner_loss.sum())

    @property
    def arm_losses(self) -> np.ndarray:
        return self.losses.sum(axis=0)

    @property
    def regret(self) -> float:
        if self.horizon == 0:
            return 0.0
        return self.cumulative_loss - float(self.arm_losses.min())

    @property
    def queries_used(self) -> int:
        return int(self.queried.sum())

    @property
    def Q(self) -> float:
        return quadratic_variation(self.losses) if self.horizon else 0.0

    @property
    def Qstar(self) -> float:
        return best_arm_variation(self.losses) if self.horizon else 0.0

    @property
    def lemma1_ok(self) -> np.ndarray:
        # dedicated reservoir rounds carry NaN and are not checked
        return ~(self.lemma1_residual > LEMMA_SLACK)

    def invariant_summary(self) -> dict:
        logged = ~np.isnan(self.lemma1_residual)
        return {
            "rounds_logged": int(logged.sum()),
            "lemma1_violations": int((self.lemma1_residual[logged] > LEMMA_SLACK).sum()),
            "dual_norm_violations": int((self.dual_norm[logged] > DUAL_NORM_LIMIT).sum()),
            "stability_flags": int(self.stability_flag.sum()),
            "max_stability_ratio": float(np.nanmax(self.stability_ratio)) if logged.any() else float("nan"),
            "kkt_flags": self.kkt_flags,
        }

    def rows(self):
        """Per-round records for CSV output."""
        if self.horizon == 0:
            return
        cum = np.cumsum(self.learner_loss)
        best = np.cumsum(self.losses, axis=0).min(axis=1)
        ok = self.lemma1_ok
        for t in range(self.horizon):
            yield {
                "t": t + 1,
                "arm": int(self.arms[t]),
                "queried": int(self.queried[t]),
                "loss": float(self.learner_loss[t]),
                "cum_loss": float(cum[t]),
                "best_cum_loss": float(best[t]),
                "regret": float(cum[t] - best[t]),
                "lemma1_ok": int(ok[t]),
                "stability_ratio": float(self.stability_ratio[t]),
            }


# ---------------------------------------------------------------------------
# jitted run loops


@njit(cache=True)
def _sample(p, u):
    total = 0.0
    for i in range(p.shape[0]):
        total += p[i]
    target = u * total
    c = 0.0
    for i in range(p.shape[0]):
        c += p[i]
        if target < c:
            return i
    return p.shape[0] - 1


@njit(cache=True)
def _diagnose(t, a, b, eps, x_play, x_next, est, msg, corr, lemma, dnorm, ratio, flag):
    k = x_play.shape[0]
    v = np.empty(k)
    for i in range(k):
        v[i] = eps * (est[i] - msg[i]) + corr[i]
    lemma[t] = lemma_residual_kernel(x_play, x_next, eps, est, msg, corr)
    dnorm[t] = dual_norm_kernel(a, b, x_play, v)
    ratio[t] = max_ratio_kernel(x_play, x_next)
    flag[t] = ratio[t] > STABILITY_RATIO and dnorm[t] <= DUAL_NORM_LIMIT


@njit(cache=True)
def _le_kernel(losses, mode, a, b, eps, eta, corr_on, msgs_on, q_u, act_u, res_u,
               budget, hard_cap, dedicated, reveal_row, cap_k,
               arms, queried, ded_out, lloss, lemma, dnorm, ratio, flag, play_out, est_out, corr_out):
    T, k = losses.shape
    x_prime = np.full(k, 1.0 / k)
    x_play = np.empty(k)
    x_next = np.empty(k)
    msg = np.zeros(k)
    est = np.empty(k)
    corr = np.zeros(k)
    cost = np.empty(k)
    # full-information: one vector reservoir; bandit: one scalar reservoir per arm
    buf = np.zeros((cap_k, k))
    seen = 0
    arm_buf = np.zeros((k, cap_k, 1))
    arm_seen = np.zeros(k, np.int64)
    tmp = np.zeros(1)
    used = 0
    kkt_flags = 0
    detail = play_out.shape[0] > 0
    for t in range(T):
        if dedicated[t] >= 0:
            ded_out[t] = True
            if mode == MODE_REVEAL:
                # play the revealing row and sample the whole loss vector
                arms[t] = reveal_row
                lloss[t] = losses[t, reveal_row]
                seen = reservoir_push(buf, seen, losses[t], res_u[t])
                reservoir_mean(buf, seen, msg)
            else:
                j = dedicated[t]
                arms[t] = j
                lloss[t] = losses[t, j]
                tmp[0] = losses[t, j]
                arm_seen[j] = reservoir_push(arm_buf[j], arm_seen[j], tmp, res_u[t])
                reservoir_mean(arm_buf[j], arm_seen[j], tmp)
                msg[j] = tmp[0]
            lemma[t] = np.nan
            dnorm[t] = np.nan
            ratio[t] = np.nan
            if detail:
                play_out[t, :] = np.nan
                est_out[t, :] = np.nan
                corr_out[t, :] = np.nan
            continue
        for i in range(k):
            cost[i] = eps * msg[i]
        status, res = solve_simplex_step(a, b, x_prime, cost, x_play)
        if status == 1:
            return 1, t, res, kkt_flags
        if status == 2:
            kkt_flags += 1
        d = q_u[t] < eps
        if d and hard_cap and used >= budget:
            d = False
        if d:
            used += 1
        queried[t] = d
        if mode == MODE_REVEAL and d:
            arm = reveal_row
        else:
            arm = _sample(x_play, act_u[t])
        arms[t] = arm
        lloss[t] = losses[t, arm]
        if mode == MODE_BANDIT:
            for i in range(k):
                est[i] = msg[i]
            if d:
                est[arm] = (losses[t, arm] - msg[arm]) / (eps * x_play[arm]) + msg[arm]
        else:
            for i in range(k):
                if d:
                    est[i] = (losses[t, i] - msg[i]) / eps + msg[i]
                else:
                    est[i] = msg[i]
        if corr_on:
            for i in range(k):
                diff = est[i] - msg[i]
                w = x_play[i] if mode == MODE_BANDIT else 1.0
                corr[i] = CORRECTION_FACTOR * eta * eps * eps * w * diff * diff
        for i in range(k):
            cost[i] = eps * est[i] + corr[i]
        status, res = solve_simplex_step(a, b, x_prime, cost, x_next)
        if status == 1:
            return 1, t, res, kkt_flags
        if status == 2:
            kkt_flags += 1
        _diagnose(t, a, b, eps, x_play, x_next, est, msg, corr, lemma, dnorm, ratio, flag)
        if detail:
            play_out[t, :] = x_play
            est_out[t, :] = est
            corr_out[t, :] = corr
        if msgs_on and d and mode == MODE_FULL:
            seen = reservoir_push(buf, seen, losses[t], res_u[t])
            reservoir_mean(buf, seen, msg)
        x_prime[:] = x_next
    return 0, -1, 0.0, kkt_flags


@njit(cache=True)
def _doubling_kernel(losses, eps, eta0, log_k, q_u, act_u, res_u, budget, hard_cap, cap_k,
                     arms, queried, lloss, lemma, dnorm, ratio, flag, eta_t, starts, etas):
    T, k = losses.shape
    x_prime = np.full(k, 1.0 / k)
    x_play = np.empty(k)
    x_next = np.empty(k)
    msg = np.zeros(k)
    est = np.empty(k)
    corr = np.zeros(k)
    cost = np.empty(k)
    buf = np.zeros((cap_k, k))
    seen = 0
    used = 0
    kkt_flags = 0
    eta = eta0
    prev_eta = eta0
    acc = 0.0
    n_epochs = 1
    starts[0] = 0
    etas[0] = eta0
    for t in range(T):
        a = 1.0 / eta
        for i in range(k):
            cost[i] = eps * msg[i]
        status, res = solve_simplex_step(a, 0.0, x_prime, cost, x_play)
        if status == 1:
            return 1, t, res, kkt_flags, n_epochs
        d = q_u[t] < eps
        if d and hard_cap and used >= budget:
            d = False
        if d:
            used += 1
        queried[t] = d
        arm = _sample(x_play, act_u[t])
        arms[t] = arm
        lloss[t] = losses[t, arm]
        term = 0.0
        for i in range(k):
            if d:
                est[i] = (losses[t, i] - msg[i]) / eps + msg[i]
            else:
                est[i] = msg[i]
            diff = est[i] - msg[i]
            term += diff * diff
            cost[i] = eps * est[i]
        status, res = solve_simplex_step(a, 0.0, x_prime, cost, x_next)
        if status == 1:
            return 1, t, res, kkt_flags, n_epochs
        _diagnose(t, a, 0.0, eps, x_play, x_next, est, msg, corr, lemma, dnorm, ratio, flag)
        eta_t[t] = eta
        if d:
            seen = reservoir_push(buf, seen, losses[t], res_u[t])
            reservoir_mean(buf, seen, msg)
        x_prime[:] = x_next
        acc += term
        if acc >= 2.0 * log_k / (eps * eps * prev_eta * prev_eta):
            # the crossing round opens the next epoch's accumulator
            prev_eta = eta
            eta = eta / 2.0
            acc = term
            x_prime[:] = 1.0 / k
            if t + 1 < T:
                starts[n_epochs] = t + 1
                etas[n_epochs] = eta
                n_epochs += 1
    return 0, -1, 0.0, kkt_flags, n_epochs


@njit(cache=True)
def _hard_pm_kernel(cols, L, H, W, eta, gamma, act_u, res_u, dedicated, cap_k,
                    arms, ded_out, lloss, lemma, dnorm, ratio, flag, play_out, est_out):
    T = cols.shape[0]
    k = L.shape[0]
    a = 1.0 / eta
    x_prime = np.full(k, 1.0 / k)
    x_play = np.empty(k)
    x_next = np.empty(k)
    mix = np.empty(k)
    msg = np.zeros(k)
    comp_msg = np.zeros((k, k))
    buf = np.zeros((k, cap_k, k))
    seen = np.zeros(k, np.int64)
    est = np.empty(k)
    obs = np.empty(k)
    zero = np.zeros(k)
    row = np.empty(k)
    kkt_flags = 0
    detail = play_out.shape[0] > 0
    for t in range(T):
        y = cols[t]
        if dedicated[t] >= 0:
            j = dedicated[t]
            arms[t] = j
            ded_out[t] = True
            lloss[t] = L[j, y]
            for i in range(k):
                obs[i] = W[i, j] * H[j, y]
            seen[j] = reservoir_push(buf[j], seen[j], obs, res_u[t])
            reservoir_mean(buf[j], seen[j], row)
            comp_msg[j, :] = row
            for i in range(k):
                s = 0.0
                for jj in range(k):
                    s += comp_msg[jj, i]
                msg[i] = s
            lemma[t] = np.nan
            dnorm[t] = np.nan
            ratio[t] = np.nan
            if detail:
                play_out[t, :] = np.nan
                est_out[t, :] = np.nan
            continue
        status, res = solve_simplex_step(a, 0.0, x_prime, msg, x_play)
        if status == 1:
            return 1, t, res, kkt_flags
        for i in range(k):
            mix[i] = (1.0 - gamma) * x_play[i] + gamma / k
        arm = _sample(mix, act_u[t])
        arms[t] = arm
        lloss[t] = L[arm, y]
        for i in range(k):
            obs[i] = W[i, arm] * H[arm, y]
            est[i] = msg[i] + (obs[i] - comp_msg[arm, i]) / mix[arm]
        status, res = solve_simplex_step(a, 0.0, x_prime, est, x_next)
        if status == 1:
            return 1, t, res, kkt_flags
        _diagnose(t, a, 0.0, 1.0, x_play, x_next, est, msg, zero, lemma, dnorm, ratio, flag)
        if detail:
            play_out[t, :] = mix
            est_out[t, :] = est
        x_prime[:] = x_next
    return 0, -1, 0.0, kkt_flags


# ---------------------------------------------------------------------------
# helpers


def dedicated_schedule(horizon: int, num_streams: int) -> np.ndarray:
    """Round -> stream index for reservoir-only rounds (-1 elsewhere).

    ceil(log T)^2 rounds per stream, spread evenly over the horizon and
    cycling through the streams; capped at half the horizon.
    """
    sched = np.full(horizon, -1, dtype=np.int64)
    if horizon < 2:
        return sched
    total = num_streams * dedicated_rounds_per_arm(horizon)
    if total > horizon // 2:
        log.warning("reservoir schedule of %d rounds capped at T/2 = %d", total, horizon // 2)
        total = horizon // 2
    if total == 0:
        return sched
    pos = np.floor((np.arange(total) + 0.5) * horizon / total).astype(np.int64)
    sched[pos] = np.arange(total) % num_streams
    return sched


def _uniforms(seed, horizon):
    return (substream(seed, "query").random(horizon),
            substream(seed, "action").random(horizon),
            substream(seed, "reservoir").random(horizon))


def _check_env(cfg: LearnerConfig, env):
    if cfg.horizon > env.horizon:
        raise ConfigError(f"environment has {env.horizon} rounds, config asks for {cfg.horizon}")


def _buffers(T, K, detail):
    rows = T if detail else 0
    return dict(
        arms=np.zeros(T, np.int64), queried=np.zeros(T, np.bool_), ded=np.zeros(T, np.bool_),
        lloss=np.zeros(T), lemma=np.full(T, np.nan), dnorm=np.full(T, np.nan),
        ratio=np.full(T, np.nan), flag=np.zeros(T, np.bool_),
        play=np.zeros((rows, K)), est=np.zeros((rows, K)), corr=np.zeros((rows, K)),
    )


def _raise_on(status, learner):
    code, t, res = status[0], status[1], status[2]
    if code == 1:
        raise SolverError(f"{learner}: OMD step did not converge at round {t}", res, round_index=int(t))


def _trace(learner, losses, buf, eta, eps, detail, kkt_flags, **extra):
    return RunTrace(
        learner=learner, losses=losses, arms=buf["arms"], queried=buf["queried"], dedicated=buf["ded"],
        learner_loss=buf["lloss"], lemma1_residual=buf["lemma"], dual_norm=buf["dnorm"],
        stability_ratio=buf["ratio"], stability_flag=buf["flag"], eta=eta, epsilon=eps,
        play=buf["play"] if detail else None, estimates=buf["est"] if detail else None,
        corrections=buf["corr"] if detail else None, kkt_flags=int(kkt_flags), extra=extra,
    )


def _run_le(name, cfg, env, mode, a, b, eta, eps, corr_on, msgs_on, detail,
            dedicated=None, reveal_row=-1, budget=None, hard_cap=True):
    _check_env(cfg, env)
    T = cfg.horizon
    losses = np.ascontiguousarray(env.losses[:T])
    K = losses.shape[1]
    buf = _buffers(T, K, detail)
    q_u, act_u, res_u = _uniforms(cfg.seed, T)
    dedicated = np.full(T, -1, np.int64) if dedicated is None else dedicated
    budget = T if budget is None else budget
    status = _le_kernel(losses, mode, a, b, eps, eta, corr_on, msgs_on, q_u, act_u, res_u,
                        budget, hard_cap, dedicated, reveal_row, reservoir_capacity(T),
                        buf["arms"], buf["queried"], buf["ded"], buf["lloss"], buf["lemma"],
                        buf["dnorm"], buf["ratio"], buf["flag"], buf["play"], buf["est"], buf["corr"])
    _raise_on(status, name)
    return _trace(name, losses, buf, eta, eps, detail, status[3])


def _eta_checked(cfg, K, corrections):
    eta = cfg.resolve_eta(K)
    if corrections and eta > eta_cap(K) * (1 + 1e-12):
        msg = f"eta = {eta:.4g} exceeds 1/(162K) = {eta_cap(K):.4g}"
        if cfg.strict:
            raise ConfigError(msg + " (set strict = false to run anyway)")
        log.info("%s; stability guarantees do not apply", msg)
    return eta


def _require(cfg, setting):
    if cfg.setting is not setting:
        raise ConfigError(f"learner expects setting {setting.value}, got {cfg.setting.value}")


# ---------------------------------------------------------------------------
# learners


def run_le_prediction(cfg: LearnerConfig, env: Environment, detail=True) -> RunTrace:
    """Adaptive label-efficient prediction: hybrid regularizer, reservoir messages, corrections."""
    _require(cfg, Setting.LE_FULL)
    K = env.num_arms
    eta = _eta_checked(cfg, K, cfg.corrections_enabled)
    a, b = 1.0 / eta, 1.0 / (eta * K)
    return _run_le("le_prediction", cfg, env, MODE_FULL, a, b, eta, cfg.epsilon,
                   cfg.corrections_enabled, cfg.messages_enabled, detail,
                   budget=cfg.budget, hard_cap=cfg.budget_mode == "hard-cap")


def run_le_prediction_no_corrections(cfg: LearnerConfig, env: Environment, detail=True) -> RunTrace:
    """Negentropy optimistic OMD with reservoir messages and no second-order correction."""
    _require(cfg, Setting.LE_FULL)
    eta = cfg.resolve_eta(env.num_arms)
    return _run_le("le_no_corrections", cfg, env, MODE_FULL, 1.0 / eta, 0.0, eta, cfg.epsilon,
                   False, cfg.messages_enabled, detail,
                   budget=cfg.budget, hard_cap=cfg.budget_mode == "hard-cap")


def run_baseline(cfg: LearnerConfig, env: Environment, detail=True) -> RunTrace:
    """Label-efficient multiplicative weights: m = 0, a = 0, negentropy."""
    _require(cfg, Setting.LE_FULL)
    eta = cfg.resolve_eta(env.num_arms)
    return _run_le("baseline", cfg, env, MODE_FULL, 1.0 / eta, 0.0, eta, cfg.epsilon,
                   False, False, detail,
                   budget=cfg.budget, hard_cap=cfg.budget_mode == "hard-cap")


def run_parameter_free(cfg: LearnerConfig, env: Environment, detail=True) -> RunTrace:
    """Doubling over eta: start at sqrt(2 log K)/eps, halve and restart whenever the
    running sum of squared estimate-minus-message exceeds 2 log K/(eps^2 eta_prev^2)."""
    _require(cfg, Setting.LE_FULL)
    _check_env(cfg, env)
    T = cfg.horizon
    losses = np.ascontiguousarray(env.losses[:T])
    K = losses.shape[1]
    eps = cfg.epsilon
    eta0 = math.sqrt(2.0 * math.log(K)) / eps
    buf = _buffers(T, K, False)
    eta_t = np.full(T, np.nan)
    starts = np.zeros(max(T, 1), np.int64)
    etas = np.zeros(max(T, 1))
    q_u, act_u, res_u = _uniforms(cfg.seed, T)
    status = _doubling_kernel(losses, eps, eta0, math.log(K), q_u, act_u, res_u, cfg.budget,
                              cfg.budget_mode == "hard-cap", reservoir_capacity(T),
                              buf["arms"], buf["queried"], buf["lloss"], buf["lemma"], buf["dnorm"],
                              buf["ratio"], buf["flag"], eta_t, starts, etas)
    _raise_on(status, "parameter_free")
    n_ep = int(status[4]) if T else 0
    epochs = [EpochState(i + 1, float(etas[i]), int(starts[i])) for i in range(n_ep)]
    trace = _trace("parameter_free", losses, buf, eta0, eps, False, status[3], eta_per_round=eta_t)
    trace.epochs = epochs
    return trace


def run_le_bandits(cfg: LearnerConfig, env: Environment, detail=True) -> RunTrace:
    """Label-efficient bandits: log-barrier 1/eta, per-arm reservoirs on dedicated rounds."""
    _require(cfg, Setting.LE_BANDIT)
    _check_env(cfg, env)
    K = env.num_arms
    T = cfg.horizon
    if K == 1:
        losses = np.ascontiguousarray(env.losses[:T])
        buf = _buffers(T, 1, False)
        buf["lloss"][:] = losses[:, 0]
        return _trace("le_bandits", losses, buf, float("nan"), cfg.epsilon, False, 0)
    eta = _eta_checked(cfg, K, cfg.corrections_enabled)
    sched = dedicated_schedule(T, K) if cfg.messages_enabled else np.full(T, -1, np.int64)
    return _run_le("le_bandits", cfg, env, MODE_BANDIT, 0.0, 1.0 / eta, eta, cfg.epsilon,
                   cfg.corrections_enabled, cfg.messages_enabled, detail, dedicated=sched,
                   budget=cfg.budget, hard_cap=cfg.budget_mode == "hard-cap")


def run_revealing_action(cfg: LearnerConfig, game: GameSpec, env: PMEnvironment, detail=True) -> RunTrace:
    """Revealing-action partial monitoring: with probability alpha play the revealing row and
    read off the whole loss column; otherwise sample from the hybrid-regularized iterate.

    Messages come from ceil(log T)^2 dedicated revealing rounds, kept apart from the
    alpha-rounds that feed the estimate.
    """
    _require(cfg, Setting.REVEALING)
    if game.revealing_row is None:
        raise ConfigError("game has no revealing action")
    if cfg.alpha_reveal is None:
        raise ConfigError("revealing-action learner needs alpha")
    K = game.num_actions
    eta = _eta_checked(cfg, K, cfg.corrections_enabled)
    loss_env = Environment("pm_losses", env.losses, env.seed)
    T = cfg.horizon
    sched = dedicated_schedule(T, 1) if cfg.messages_enabled else np.full(T, -1, np.int64)
    trace = _run_le("revealing_action", cfg, loss_env, MODE_REVEAL, 1.0 / eta, 1.0 / (eta * K), eta,
                    cfg.alpha_reveal, cfg.corrections_enabled, cfg.messages_enabled, detail,
                    dedicated=sched, reveal_row=game.revealing_row, hard_cap=False)
    trace.extra["revealing_cost"] = game.revealing_cost
    return trace


def run_hard_pm(cfg: LearnerConfig, game: GameSpec, env: PMEnvironment, detail=True) -> RunTrace:
    """Negentropy optimistic OMD on w_t = (1 - gamma) x_t + gamma/K, with one reservoir per
    feedback component of L = W H."""
    _require(cfg, Setting.HARD_PM)
    if game.W is None:
        raise ConfigError("L = W H is infeasible for this game: " + game.w_solution.report())
    if cfg.gamma is None:
        raise ConfigError("hard partial monitoring needs gamma")
    _check_env(cfg, env)
    T = cfg.horizon
    K = game.num_actions
    eta = cfg.resolve_eta(K)
    cols = np.ascontiguousarray(env.columns[:T])
    sched = dedicated_schedule(T, K) if cfg.messages_enabled else np.full(T, -1, np.int64)
    buf = _buffers(T, K, detail)
    _, act_u, res_u = _uniforms(cfg.seed, T)
    status = _hard_pm_kernel(cols, game.L, game.H, np.ascontiguousarray(game.W), eta, float(cfg.gamma),
                             act_u, res_u, sched, reservoir_capacity(T),
                             buf["arms"], buf["ded"], buf["lloss"], buf["lemma"], buf["dnorm"],
                             buf["ratio"], buf["flag"], buf["play"], buf["est"])
    _raise_on(status, "hard_pm")
    losses = np.ascontiguousarray(game.L[:, cols].T)
    trace = _trace("hard_pm", losses, buf, eta, 1.0, detail, status[3])
    if detail:
        trace.corrections = np.zeros((T, K))
    trace.extra["gamma"] = cfg.gamma
    return trace


LEARNERS = {
    "le_prediction": run_le_prediction,
    "le_no_corrections": run_le_prediction_no_corrections,
    "parameter_free": run_parameter_free,
    "baseline": run_baseline,
    "le_bandits": run_le_bandits,
    "revealing_action": run_revealing_action,
    "hard_pm": run_hard_pm,
}
