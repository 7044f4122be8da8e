"""Optimistic online mirror descent steps over the simplex.

Both update steps have the shape

    argmin_{x in simplex}  <x, cost> + D_R(x, x_prime)

with ``cost = eps * message`` for the playing step and
``cost = eps * estimate + correction`` for the secondary step.  The
first-order condition is ``grad R(x) = grad R(x_prime) - cost - lam * 1``;
since R is separable each coordinate can be inverted on its own, leaving a
scalar root-find for the normalisation multiplier ``lam``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DomainError, SolverError
from .regularizers import SIMPLEX_FLOOR, Regularizer, grad_coord, hess_coord

MAX_NEWTON = 100
KKT_TOL = 1e-9
STABILITY_RATIO = 10.0 / 9.0
DUAL_NORM_LIMIT = 1.0 / 3.0


@njit(cache=True)
def _invert_grad(v, a, b, y0):
    """Solve a(1 + log x) - b/x = v for x > 0 (the coordinate-wise inverse gradient).

    ``y0`` is a guess for log x.
    """
    if b == 0.0:
        return np.exp(v / a - 1.0)
    if a == 0.0:
        return -b / v
    # log-space Newton on f(y) = a(1+y) - b e^{-y} - v, increasing and concave, so
    # from a start left of the root the iterates increase monotonically to it
    y = v / a - 1.0
    if v < 0.0:
        yb = np.log(-b / v)
        if yb < -1.0 and yb > y:
            y = yb
    if np.isfinite(y0):
        f0 = a * (1.0 + y0) - b * np.exp(-y0) - v
        if f0 <= 0.0:
            y = max(y, y0)
        else:
            # one step from the right lands left of the root (tangent above a concave f)
            y = max(y, y0 - f0 / (a + b * np.exp(-y0)))
    for _ in range(60):
        e = np.exp(-y)
        f = a * (1.0 + y) - b * e - v
        step = f / (a + b * e)
        y -= step
        if abs(step) <= 1e-15 * max(1.0, abs(y)):
            break
    return np.exp(y)


@njit(cache=True)
def _fill(s, lam, a, b, x, h):
    total = 0.0
    inv_h = 0.0
    for i in range(s.shape[0]):
        xi = max(_invert_grad(s[i] - lam, a, b, np.log(x[i])), 1e-300)
        x[i] = xi
        h[i] = hess_coord(xi, a, b)
        total += xi
        inv_h += 1.0 / h[i]
    return total - 1.0, inv_h


@njit(cache=True)
def solve_simplex_step(a, b, x_prime, cost, out):
    """Minimise <x, cost> + D_R(x, x_prime) over the simplex into ``out``.

    Returns (status, kkt_residual); status 0 on success, 1 on non-convergence.
    """
    k = x_prime.shape[0]
    if b == 0.0:
        # negentropy: multiplicative weights in log space
        logx = np.empty(k)
        top = -np.inf
        for i in range(k):
            logx[i] = np.log(x_prime[i]) - cost[i] / a
            if logx[i] > top:
                top = logx[i]
        total = 0.0
        for i in range(k):
            out[i] = np.exp(logx[i] - top)
            total += out[i]
        for i in range(k):
            out[i] /= total
        status = 0
    else:
        s = np.empty(k)
        top = 0
        for i in range(k):
            s[i] = grad_coord(x_prime[i], a, b) - cost[i]
            if s[i] > s[top]:
                top = i
        # costs are shift-invariant on the simplex; centring on the dominant coordinate
        # keeps s_i - lam free of cancellation when costs are large
        shift = cost[top]
        for i in range(k):
            s[i] += shift
        smax = s[top]
        # phi(lam) = sum x_i(lam) - 1 is convex and decreasing in lam
        lo = smax - grad_coord(1.0, a, b)
        hi = smax - grad_coord(1.0 / k, a, b)
        h = np.empty(k)
        # warm start: x = x_prime is optimal at lam = shift when the cost vanishes;
        # add the first-order response to the cost, clamped into the bracket
        num = 0.0
        den = 0.0
        for i in range(k):
            w = 1.0 / hess_coord(x_prime[i], a, b)
            num += cost[i] * w
            den += w
            out[i] = x_prime[i]
        lam = min(max(shift - num / den, lo), hi)
        status = 1
        for _ in range(MAX_NEWTON):
            phi, inv_h = _fill(s, lam, a, b, out, h)
            if phi >= 0.0:
                lo = max(lo, lam)
            else:
                hi = min(hi, lam)
            if abs(phi) <= 4e-16 * k:
                status = 0
                break
            nxt = lam + phi / inv_h
            if not (lo <= nxt <= hi) or nxt == lam:
                nxt = 0.5 * (lo + hi)
                if nxt == lam:
                    status = 0
                    break
            lam = nxt
        if status != 0:
            for _ in range(200):
                lam = 0.5 * (lo + hi)
                phi, inv_h = _fill(s, lam, a, b, out, h)
                if phi >= 0.0:
                    lo = lam
                else:
                    hi = lam
                if hi - lo <= 1e-15 * max(1.0, abs(lam)):
                    status = 0
                    break
    # floored coordinates stay at the floor; free ones absorb the excess mass
    free_mass = 0.0
    n_floor = 0
    for i in range(k):
        if out[i] <= SIMPLEX_FLOOR:
            out[i] = SIMPLEX_FLOOR
            n_floor += 1
        else:
            free_mass += out[i]
    if n_floor < k:
        scale = (1.0 - n_floor * SIMPLEX_FLOOR) / free_mass
        for i in range(k):
            if out[i] > SIMPLEX_FLOOR:
                out[i] = max(out[i] * scale, SIMPLEX_FLOOR)
    else:
        for i in range(k):
            out[i] = 1.0 / k
    residual = kkt_residual_kernel(a, b, out, x_prime, cost)
    if residual > KKT_TOL and status == 0:
        status = 2
    return status, residual


@njit(cache=True)
def kkt_residual_kernel(a, b, x, x_prime, cost):
    """Stationarity residual of the floored simplex problem.

    Free coordinates must share r_i = g(x_i) - g(x'_i) + cost_i = -lam; a coordinate
    held at the floor only needs r_i >= -lam (its bound multiplier is non-negative).
    """
    k = x.shape[0]
    r = np.empty(k)
    active = x <= SIMPLEX_FLOOR * (1.0 + 1e-6)
    rmax = -np.inf
    rmin = np.inf
    scale = 1.0
    for i in range(k):
        g = grad_coord(x[i], a, b)
        gp = grad_coord(x_prime[i], a, b)
        r[i] = g - gp + cost[i]
        scale = max(scale, abs(g), abs(gp), abs(cost[i]))
        if not active[i]:
            rmax = max(rmax, r[i])
            rmin = min(rmin, r[i])
    if rmax == -np.inf:
        return 0.0
    # best multiplier sits midway between the extreme free coordinates; measured
    # relative to the magnitude of the stationarity terms, which reach 1e9 near the floor
    mid = 0.5 * (rmax + rmin)
    worst = 0.5 * (rmax - rmin)
    for i in range(k):
        if active[i]:
            worst = max(worst, mid - r[i])
    return worst / scale


@njit(cache=True)
def dual_norm_kernel(a, b, x, u):
    total = 0.0
    for i in range(x.shape[0]):
        total += u[i] * u[i] / hess_coord(x[i], a, b)
    return np.sqrt(total)


@njit(cache=True)
def lemma_residual_kernel(x_play, x_next, eps, estimate, message, correction):
    total = 0.0
    for i in range(x_play.shape[0]):
        v = eps * (estimate[i] - message[i]) + correction[i]
        total += (x_play[i] - x_next[i]) * v - x_play[i] * correction[i]
    return total


@njit(cache=True)
def max_ratio_kernel(x_play, x_next):
    top = 0.0
    for i in range(x_play.shape[0]):
        r = x_next[i] / x_play[i]
        if r > top:
            top = r
    return top


# ---------------------------------------------------------------------------
# Python-level API


@dataclass
class OmdState:
    """Iterates of one optimistic OMD run."""

    x_prime: np.ndarray
    x_play: np.ndarray
    reg: Regularizer
    epsilon_scale: float = 1.0

    def __post_init__(self):
        if not 0 < self.epsilon_scale <= 1:
            raise DomainError(f"epsilon_scale must lie in (0, 1], got {self.epsilon_scale}")
        self.x_prime = np.asarray(self.x_prime, dtype=float)
        self.x_play = np.asarray(self.x_play, dtype=float)

    @classmethod
    def initial(cls, reg: Regularizer, epsilon_scale: float = 1.0) -> "OmdState":
        x0 = reg.minimizer()
        return cls(x0.copy(), x0.copy(), reg, epsilon_scale)


@dataclass
class StepInput:
    message: np.ndarray
    estimate: np.ndarray
    correction: np.ndarray

    def __post_init__(self):
        self.message = np.asarray(self.message, dtype=float)
        self.estimate = np.asarray(self.estimate, dtype=float)
        self.correction = np.asarray(self.correction, dtype=float)
        if not (self.message.shape == self.estimate.shape == self.correction.shape):
            raise DomainError("message, estimate and correction must have the same length")
        if np.any(self.correction < 0):
            raise DomainError("second-order correction must be coordinate-wise non-negative")


def solve_step(reg: Regularizer, x_prime, cost) -> np.ndarray:
    """argmin_x <x, cost> + D_R(x, x_prime) over the simplex."""
    x_prime = np.asarray(x_prime, dtype=float)
    cost = np.asarray(cost, dtype=float)
    if x_prime.shape != (reg.num_arms,) or cost.shape != (reg.num_arms,):
        raise DomainError("x_prime and cost must both have length num_arms")
    if not np.all(x_prime > 0):
        raise DomainError("x_prime has a non-positive coordinate")
    if not np.all(np.isfinite(cost)):
        raise DomainError("cost vector is not finite")
    out = np.empty_like(x_prime)
    status, residual = solve_simplex_step(reg.entropy_weight, reg.barrier_weight, x_prime, cost, out)
    if status == 1:
        raise SolverError(f"OMD step did not converge (KKT residual {residual:.3e})", residual)
    return out


def kkt_residual(reg: Regularizer, x, x_prime, cost) -> float:
    return float(kkt_residual_kernel(reg.entropy_weight, reg.barrier_weight,
                                     np.asarray(x, float), np.asarray(x_prime, float),
                                     np.asarray(cost, float)))


def solve_play_step(state: OmdState, message) -> np.ndarray:
    """Playing iterate x_t from the secondary iterate and the optimistic message."""
    cost = state.epsilon_scale * np.asarray(message, dtype=float)
    return solve_step(state.reg, state.x_prime, cost)


def solve_secondary_step(state: OmdState, step: StepInput) -> np.ndarray:
    """Next secondary iterate x'_{t+1}; the caller stores it back into the state."""
    cost = state.epsilon_scale * step.estimate + step.correction
    return solve_step(state.reg, state.x_prime, cost)


def check_lemma1_condition(x_play, x_next_prime, step: StepInput, epsilon_scale, slack=1e-9):
    """<x_t - x'_{t+1}, eps(est - m) + a> - <x_t, a> <= 0.

    Returns ``(holds, residual)`` where ``residual`` is the signed left-hand side.
    """
    residual = float(lemma_residual_kernel(np.asarray(x_play, float), np.asarray(x_next_prime, float),
                                           float(epsilon_scale), step.estimate, step.message,
                                           step.correction))
    return residual <= slack, residual


@dataclass(frozen=True)
class StabilityReport:
    ratio: float
    dual_norm: float
    flagged: bool


def check_stability(x_play, x_next_prime, reg: Regularizer, step: StepInput | None = None,
                    epsilon_scale: float = 1.0) -> StabilityReport:
    """Largest ratio x'_{t+1,i} / x_{t,i}, flagged when it exceeds 10/9 on a round whose
    scaled deviation ``eps(est - m) + a`` had dual norm at most 1/3."""
    x_play = np.asarray(x_play, float)
    x_next_prime = np.asarray(x_next_prime, float)
    ratio = float(max_ratio_kernel(x_play, x_next_prime))
    if step is None:
        norm = 0.0
    else:
        v = epsilon_scale * (step.estimate - step.message) + step.correction
        norm = reg.dual_norm(x_play, v)
    flagged = ratio > STABILITY_RATIO and norm <= DUAL_NORM_LIMIT
    return StabilityReport(ratio, norm, flagged)
