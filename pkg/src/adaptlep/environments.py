"""Oblivious loss sequences and partial-monitoring games.

Loss environments materialise the whole ``(T, K)`` loss matrix from their seed,
so any round can be re-emitted bit-identically.  Partial-monitoring environments
emit column indices ``y_t``; losses and feedback are read off the game matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError
from .estimators import best_arm_variation, quadratic_variation
from .rng import substream

W_TOL = 1e-8


@dataclass
class Environment:
    """A fixed sequence of loss vectors in [0, 1]^K."""

    kind: str
    losses: np.ndarray
    seed: int | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.losses = np.ascontiguousarray(self.losses, dtype=float)
        if self.losses.ndim != 2:
            raise ConfigError("losses must be a (T, K) array")
        if np.any(self.losses < 0) or np.any(self.losses > 1):
            raise ConfigError("environment emitted a loss outside [0, 1]")
        self.losses.setflags(write=False)

    @property
    def horizon(self) -> int:
        return self.losses.shape[0]

    @property
    def num_arms(self) -> int:
        return self.losses.shape[1]

    def loss(self, t: int) -> np.ndarray:
        return self.losses[t]

    @property
    def realized_q(self) -> float:
        return quadratic_variation(self.losses) if self.horizon else 0.0

    @property
    def realized_qstar(self) -> float:
        return best_arm_variation(self.losses) if self.horizon else 0.0


def gen_constant(T, loss_vector) -> Environment:
    vec = np.asarray(loss_vector, float)
    return Environment("constant", np.tile(vec, (T, 1)).reshape(T, vec.size), params={"loss": vec.tolist()})


def gen_alternating(T, K=2) -> Environment:
    """Arm ``t mod K`` has loss 0 at round t, every other arm loss 1."""
    losses = np.ones((T, K))
    losses[np.arange(T), np.arange(T) % K] = 0.0
    return Environment("alternating", losses, params={"K": K})


def gen_fixed_variation(T, K, target_q, base=None, seed=0, profile=None) -> Environment:
    """``base`` plus independent +/-A_i signs, calibrated so the realised Q hits ``target_q``.

    ``profile`` splits the target across coordinates (non-negative, normalised to
    sum to one; uniform by default).  Realised Q must land in [0.8, 1.2] * target.
    """
    base = np.full(K, 0.5) if base is None else np.asarray(base, float)
    if base.shape != (K,) or np.any(base < 0) or np.any(base > 1):
        raise ConfigError("base must be a length-K vector in [0, 1]")
    if target_q < 0 or target_q > T * K / 4:
        raise ConfigError(f"target Q {target_q} outside [0, TK/4]")
    params = {"target_q": target_q, "base": base.tolist()}
    if target_q == 0 or T == 0:
        env = Environment("fixed_variation", np.tile(base, (T, 1)).reshape(T, K), seed, params)
        env.params["realized_q"] = 0.0
        return env
    share = np.full(K, 1.0 / K) if profile is None else np.asarray(profile, float)
    if share.shape != (K,) or np.any(share < 0) or share.sum() <= 0:
        raise ConfigError("profile must be a non-negative length-K vector")
    share = share / share.sum()
    signs = substream(seed, "environment").choice([-1.0, 1.0], size=(T, K))
    amp = np.sqrt(target_q * share / T)
    realized = 0.0
    for _ in range(2):
        losses = np.clip(base + signs * amp, 0.0, 1.0)
        realized = quadratic_variation(losses)
        if 0.8 * target_q <= realized <= 1.2 * target_q:
            env = Environment("fixed_variation", losses, seed, params)
            env.params["realized_q"] = realized
            return env
        # clipping (or a badly balanced sign draw) moved Q: rescale once
        amp = amp * math.sqrt(target_q / max(realized, 1e-300))
    raise ConfigError(f"cannot reach target Q {target_q} around this base (realised {realized:.4g})")


def gen_bernoulli_gap(T, K, alpha_center, gap, best_arm=0, seed=0) -> Environment:
    """Best arm ~ Bern(alpha_center), every other arm ~ Bern(alpha_center + gap), i.i.d."""
    if not 0 < alpha_center < 1 or gap < 0 or alpha_center + gap > 1:
        raise ConfigError("need alpha_center in (0, 1) and 0 <= gap <= 1 - alpha_center")
    p = np.full(K, alpha_center + gap)
    p[best_arm] = alpha_center
    u = substream(seed, "environment").random((T, K))
    losses = (u < p).astype(float)
    return Environment("bernoulli_gap", losses, seed,
                       {"alpha_center": alpha_center, "gap": gap, "best_arm": best_arm})


def gen_dyadic(T, K, alpha_center, gap, best_arm=0, seed=0) -> Environment:
    """Losses are the first K binary digits of Y_t = Z* 2^-(i*+1) + sum_j Z_j 2^-(j+1) + 2^-(K+1) A.

    Z* ~ Bern(alpha_center) sits at the best arm's digit, the other digits are
    Bern(alpha_center + gap), and A ~ U[0, 1] fills the tail.
    """
    if K > 50:
        raise ConfigError("dyadic construction supports at most 50 arms")
    if not 0 <= alpha_center <= 1 or gap < 0 or alpha_center + gap > 1:
        raise ConfigError("need 0 <= alpha_center and alpha_center + gap <= 1")
    rng = substream(seed, "environment")
    p = np.full(K, alpha_center + gap)
    p[best_arm] = alpha_center
    bits = (rng.random((T, K)) < p).astype(float)
    tail = rng.random(T)
    weights = 2.0 ** -(np.arange(K) + 1.0)
    y = bits @ weights + tail * 2.0 ** -(K + 1)
    digits = np.floor(y[:, None] * 2.0 ** (np.arange(K) + 1.0)) % 2.0
    return Environment("dyadic", digits, seed,
                       {"alpha_center": alpha_center, "gap": gap, "best_arm": best_arm})


def variation_ball_check(losses, alpha) -> bool:
    """Membership of the alpha-variation ball: Q / (T K) <= alpha."""
    if not 0 <= alpha <= 0.25:
        raise DomainError("alpha must lie in [0, 1/4]")
    arr = np.asarray(losses, float)
    if arr.ndim == 1:
        arr = arr[:, None]
    T, K = arr.shape
    if T == 0:
        return True
    return quadratic_variation(arr) / (T * K) <= alpha


# ---------------------------------------------------------------------------
# partial monitoring games


@dataclass(frozen=True)
class WSolution:
    W: np.ndarray
    residual: float
    feasible: bool
    worst_entry: tuple

    def report(self) -> str:
        if self.feasible:
            return f"L = W H feasible (max residual {self.residual:.2e})"
        i, j = self.worst_entry
        return f"L = W H infeasible: max residual {self.residual:.3e} at L[{i}, {j}]"


def solve_w(L, H) -> WSolution:
    """Row-wise least squares for W in L = W H."""
    L = np.asarray(L, float)
    H = np.asarray(H, float)
    if L.shape != H.shape:
        raise DomainError("L and H must have the same K x N shape")
    Wt, *_ = np.linalg.lstsq(H.T, L.T, rcond=None)
    W = Wt.T
    err = np.abs(L - W @ H)
    worst = np.unravel_index(np.argmax(err), err.shape) if err.size else (0, 0)
    residual = float(err.max()) if err.size else 0.0
    return WSolution(W, residual, residual <= W_TOL, tuple(int(v) for v in worst))


def detect_revealing_action(H, L=None):
    """Lowest-index row of H with pairwise-distinct entries, and its cost max_b L(a, b).

    Returns ``None`` when no row is revealing; otherwise ``(row, cost)`` where cost
    is ``None`` if ``L`` was not given.
    """
    H = np.asarray(H, float)
    for a, row in enumerate(np.round(H, 12)):
        if np.unique(row).size == row.size:
            cost = None if L is None else float(np.max(np.asarray(L, float)[a]))
            return a, cost
    return None


@dataclass
class GameSpec:
    """Partial-monitoring game (L, H) with derived decomposition and revealing-action data."""

    L: np.ndarray
    H: np.ndarray
    W: np.ndarray | None = field(init=False)
    w_solution: WSolution = field(init=False, repr=False)
    revealing_row: int | None = field(init=False)
    revealing_cost: float | None = field(init=False)

    def __post_init__(self):
        self.L = np.asarray(self.L, float)
        self.H = np.asarray(self.H, float)
        if self.L.ndim != 2 or self.L.shape != self.H.shape:
            raise ConfigError("L and H must be K x N matrices of the same shape")
        if np.any(self.L < 0) or np.any(self.L > 1):
            raise ConfigError("loss matrix entries must lie in [0, 1]")
        self.w_solution = solve_w(self.L, self.H)
        self.W = self.w_solution.W if self.w_solution.feasible else None
        found = detect_revealing_action(self.H, self.L)
        self.revealing_row, self.revealing_cost = found if found else (None, None)

    @property
    def num_actions(self) -> int:
        return self.L.shape[0]

    @property
    def num_outcomes(self) -> int:
        return self.L.shape[1]

    def describe(self) -> str:
        lines = [f"K = {self.num_actions}, N = {self.num_outcomes}", self.w_solution.report()]
        if self.revealing_row is None:
            lines.append("no revealing action")
        else:
            lines.append(f"revealing action: row {self.revealing_row} (cost c = {self.revealing_cost:g})")
        return "\n".join(lines)


def parse_game(text: str) -> GameSpec:
    """Parse the line-oriented format: ``K N`` header, K rows of L, blank line, K rows of H."""
    lines = [ln.split("#", 1)[0].rstrip() for ln in text.splitlines()]
    while lines and not lines[0].strip():
        lines.pop(0)
    if not lines:
        raise ConfigError("empty game file")
    try:
        K, N = (int(v) for v in lines[0].split())
    except ValueError:
        raise ConfigError(f"bad game header {lines[0]!r}; expected 'K N'") from None
    body = lines[1:]
    rows_l = [ln for ln in body[:K] if ln.strip()]
    rest = body[K:]
    if len(rows_l) != K or not rest or rest[0].strip():
        raise ConfigError("expected K rows of L followed by a blank line")
    rows_h = [ln for ln in rest[1:] if ln.strip()]
    if len(rows_h) != K:
        raise ConfigError(f"expected {K} rows of H, found {len(rows_h)}")

    def matrix(rows):
        m = np.array([[float(v) for v in r.split()] for r in rows])
        if m.shape != (K, N):
            raise ConfigError(f"matrix has shape {m.shape}, header says {(K, N)}")
        return m

    return GameSpec(matrix(rows_l), matrix(rows_h))


def load_game(path) -> GameSpec:
    return parse_game(Path(path).read_text())


def format_game(game: GameSpec) -> str:
    K, N = game.L.shape
    fmt = lambda m: "\n".join(" ".join(f"{v:.12g}" for v in row) for row in m)
    return f"{K} {N}\n{fmt(game.L)}\n\n{fmt(game.H)}\n"


def bundled_game(name: str) -> GameSpec:
    """Games shipped with the package: ``spam`` (revealing action) and ``hard4`` (L = W H)."""
    return parse_game(resources.files("adaptlep").joinpath("games", f"{name}.txt").read_text())


@dataclass
class PMEnvironment:
    """Column sequence y_t for a partial-monitoring game."""

    game: GameSpec
    columns: np.ndarray
    seed: int | None = None
    kind: str = "columns"

    def __post_init__(self):
        self.columns = np.ascontiguousarray(self.columns, dtype=np.int64)
        if self.columns.size and (self.columns.min() < 0 or self.columns.max() >= self.game.num_outcomes):
            raise ConfigError("column index outside the game's outcome range")
        self.columns.setflags(write=False)

    @property
    def horizon(self) -> int:
        return self.columns.size

    @property
    def num_arms(self) -> int:
        return self.game.num_actions

    @property
    def losses(self) -> np.ndarray:
        return self.game.L[:, self.columns].T

    def loss(self, t: int) -> np.ndarray:
        return self.game.L[:, self.columns[t]]

    def feedback(self, arm: int, t: int) -> float:
        return float(self.game.H[arm, self.columns[t]])

    @property
    def realized_q(self) -> float:
        return quadratic_variation(self.losses) if self.horizon else 0.0

    @property
    def realized_qstar(self) -> float:
        return best_arm_variation(self.losses) if self.horizon else 0.0


def gen_columns(game: GameSpec, T, probs=None, seed=0) -> PMEnvironment:
    """I.i.d. columns drawn from ``probs`` (uniform by default)."""
    N = game.num_outcomes
    probs = np.full(N, 1.0 / N) if probs is None else np.asarray(probs, float)
    if probs.shape != (N,) or np.any(probs < 0) or not np.isclose(probs.sum(), 1.0):
        raise ConfigError("column probabilities must form a distribution over the N outcomes")
    cols = substream(seed, "environment").choice(N, size=T, p=probs)
    return PMEnvironment(game, cols, seed)


def gen_constant_column(game: GameSpec, T, column=0) -> PMEnvironment:
    return PMEnvironment(game, np.full(T, column), None, kind="constant_column")
