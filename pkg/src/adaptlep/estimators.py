"""Loss estimates, optimistic messages and second-order corrections.

Four feedback settings are supported:

    LE_FULL      label-efficient prediction, full loss vector on query rounds
    LE_BANDIT    label-efficient bandits, only the played coordinate on query rounds
    REVEALING    revealing-action partial monitoring (alpha plays the role of eps)
    HARD_PM      partial monitoring with L = W H, one reservoir per feedback component
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import ConfigError, DomainError
from .regularizers import SIMPLEX_FLOOR

CORRECTION_FACTOR = 6.0


class Setting(str, enum.Enum):
    LE_FULL = "le_full"
    LE_BANDIT = "le_bandit"
    REVEALING = "revealing"
    HARD_PM = "hard_pm"


SETTING_CODE = {Setting.LE_FULL: 0, Setting.LE_BANDIT: 1, Setting.REVEALING: 2, Setting.HARD_PM: 3}


def reservoir_capacity(horizon: int) -> int:
    """k = ceil(log2 T), at least 1."""
    return max(1, math.ceil(math.log2(max(horizon, 2))))


def dedicated_rounds_per_arm(horizon: int) -> int:
    """ceil(log T)^2 reservoir rounds per arm or feedback component."""
    return math.ceil(math.log(max(horizon, 2))) ** 2


# ---------------------------------------------------------------------------
# reservoir sampling


@njit(cache=True)
def reservoir_push(buf, seen, value, u):
    """Algorithm R on a (capacity, dim) buffer; ``u`` is one uniform draw. Returns the new count."""
    seen += 1
    cap = buf.shape[0]
    if seen <= cap:
        buf[seen - 1, :] = value
    else:
        j = int(u * seen)
        if j < cap:
            buf[j, :] = value
    return seen


@njit(cache=True)
def reservoir_mean(buf, seen, out):
    n = min(seen, buf.shape[0])
    out[:] = 0.0
    for r in range(n):
        out += buf[r]
    if n > 0:
        out /= n


@dataclass
class ReservoirState:
    """Uniform size-k sample of a stream of vectors."""

    capacity: int
    dim: int
    seed: int | np.random.SeedSequence | None = None
    seen_count: int = 0
    _buf: np.ndarray = field(init=False, repr=False)
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.capacity < 1:
            raise ConfigError("reservoir capacity must be positive")
        self._buf = np.zeros((self.capacity, self.dim))
        self._rng = np.random.Generator(np.random.Philox(self.seed))

    @property
    def samples(self) -> np.ndarray:
        return self._buf[: min(self.seen_count, self.capacity)].copy()

    def observe(self, loss) -> "ReservoirState":
        loss = np.asarray(loss, dtype=float).reshape(self.dim)
        if not np.all(np.isfinite(loss)):
            raise DomainError("reservoir observation is not finite")
        self.seen_count = reservoir_push(self._buf, self.seen_count, loss, self._rng.random())
        return self

    def mean(self):
        """Average of the stored samples and an ``empty`` flag."""
        out = np.zeros(self.dim)
        reservoir_mean(self._buf, self.seen_count, out)
        return out, self.seen_count == 0


def make_message(state: ReservoirState):
    """Optimistic message m_t: the reservoir average (zero vector and ``True`` when empty)."""
    return state.mean()


# ---------------------------------------------------------------------------
# estimates and corrections


@dataclass(frozen=True)
class EstimatorConfig:
    setting: Setting
    epsilon_or_alpha: float
    eta: float
    num_arms: int

    def __post_init__(self):
        object.__setattr__(self, "setting", Setting(self.setting))
        if not 0 < self.epsilon_or_alpha <= 1:
            raise ConfigError(f"epsilon/alpha must lie in (0, 1], got {self.epsilon_or_alpha}")
        if not self.eta > 0:
            raise ConfigError("eta must be positive")


@njit(cache=True)
def full_info_estimate(loss, message, eps, queried, out):
    for i in range(message.shape[0]):
        if queried:
            out[i] = (loss[i] - message[i]) / eps + message[i]
        else:
            out[i] = message[i]


@njit(cache=True)
def bandit_estimate(loss_played, arm, message, eps, play_prob, queried, out):
    out[:] = message
    if queried:
        out[arm] = (loss_played - message[arm]) / (eps * play_prob) + message[arm]


@njit(cache=True)
def hard_pm_estimate(component_messages, arm, component_obs, play_prob, out):
    """Per-component estimate for L = W H.

    ``component_messages[j, i]`` estimates the mean of w(i, j) h(j, .); playing ``arm``
    reveals ``component_obs[i] = w(i, arm) h(arm, y_t)`` for every i.
    """
    k = out.shape[0]
    for i in range(k):
        total = 0.0
        for j in range(component_messages.shape[0]):
            total += component_messages[j, i]
        out[i] = total + (component_obs[i] - component_messages[arm, i]) / play_prob


@njit(cache=True)
def full_info_correction(estimate, message, eta, eps, out):
    for i in range(message.shape[0]):
        d = estimate[i] - message[i]
        out[i] = CORRECTION_FACTOR * eta * eps * eps * d * d


@njit(cache=True)
def bandit_correction(estimate, message, eta, eps, play, out):
    for i in range(message.shape[0]):
        d = estimate[i] - message[i]
        out[i] = CORRECTION_FACTOR * eta * eps * eps * play[i] * d * d


def build_estimate(cfg: EstimatorConfig, message, observation, played_arm=None, query_flag=False,
                   play_dist=None) -> np.ndarray:
    """Unbiased loss estimate for one round.

    ``observation`` is the full loss vector (LE_FULL, REVEALING), the played
    coordinate's loss (LE_BANDIT), or the vector ``w(., i_t) h(i_t, y_t)`` (HARD_PM,
    where ``message`` is the (K, K) array of component messages).
    """
    eps = cfg.epsilon_or_alpha
    k = cfg.num_arms
    out = np.empty(k)
    if cfg.setting in (Setting.LE_FULL, Setting.REVEALING):
        msg = np.asarray(message, float)
        obs = np.zeros(k) if observation is None else np.asarray(observation, float)
        full_info_estimate(obs, msg, eps, bool(query_flag), out)
        return out
    play_dist = np.asarray(play_dist, float)
    if np.any(play_dist < SIMPLEX_FLOOR * (1 - 1e-9)):
        raise DomainError("play distribution has a coordinate below the floor")
    if cfg.setting is Setting.LE_BANDIT:
        msg = np.asarray(message, float)
        obs = 0.0 if observation is None else float(observation)
        bandit_estimate(obs, int(played_arm), msg, eps, play_dist[played_arm], bool(query_flag), out)
        return out
    comp = np.asarray(message, float).reshape(k, k)
    hard_pm_estimate(comp, int(played_arm), np.asarray(observation, float), play_dist[played_arm], out)
    return out


def build_correction(cfg: EstimatorConfig, estimate, message, play_dist=None) -> np.ndarray:
    """Second-order correction a_t (zero for hard partial monitoring)."""
    estimate = np.asarray(estimate, float)
    message = np.asarray(message, float)
    out = np.zeros(cfg.num_arms)
    if cfg.setting in (Setting.LE_FULL, Setting.REVEALING):
        full_info_correction(estimate, message, cfg.eta, cfg.epsilon_or_alpha, out)
    elif cfg.setting is Setting.LE_BANDIT:
        bandit_correction(estimate, message, cfg.eta, cfg.epsilon_or_alpha,
                          np.asarray(play_dist, float), out)
    return out


# ---------------------------------------------------------------------------
# variation measures


def _as_losses(losses) -> np.ndarray:
    arr = np.asarray(losses, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape[0] == 0:
        raise DomainError("quadratic variation of an empty sequence is undefined")
    return arr


def _centred_sq(arr) -> float:
    # shift by the first row so constant columns give exactly zero
    d = arr - arr[:1]
    return float(np.sum((d - d.mean(axis=0)) ** 2))


def best_arm(losses) -> int:
    """Arm with the smallest cumulative loss; ties go to the lowest index."""
    return int(np.argmin(_as_losses(losses).sum(axis=0)))


def quadratic_variation(losses) -> float:
    """Q = sum_t ||l_t - mu_T||^2."""
    arr = _as_losses(losses)
    return _centred_sq(arr)


def best_arm_variation(losses) -> float:
    """Q* = sum_t (l_{t,i*} - mu_{T,i*})^2 for the best arm i*."""
    arr = _as_losses(losses)
    return _centred_sq(arr[:, best_arm(arr)])
