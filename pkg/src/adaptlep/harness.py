"""Seeded experiment sweeps: config parsing, grid expansion, aggregation, bound overlay.

Config files are ``key = value`` lines.  Grid keys (T, n, K, eta, gamma, alpha,
target_q) accept comma-separated lists; numeric values may be expressions in
T, K, n (``2^14``, ``T/2``, ``sqrt(T)``).  Learning-rate and exploration values
may also name a tuning rule (see ``ETA_RULES``) that is resolved per cell from the
cell's mean realised Q and Q*.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import environments as envs
from .errors import ConfigError, DomainError
from .estimators import Setting
from .learners import LEARNERS, LearnerConfig, eta_cap

log = logging.getLogger(__name__)

GRID_KEYS = ("T", "n", "K", "eta", "gamma", "alpha", "target_q")
SUMMARY_COLUMNS = ("cell_id", "learner", "T", "n", "K", "eta", "gamma", "alpha", "mean_Q", "mean_Qstar",
                   "mean_regret", "stderr_regret", "bound_value", "ratio", "queries_mean")
ROUND_COLUMNS = ("t", "arm", "queried", "loss", "cum_loss", "best_cum_loss", "regret", "lemma1_ok",
                 "stability_ratio")

SETTING_OF = {
    "le_prediction": Setting.LE_FULL,
    "le_no_corrections": Setting.LE_FULL,
    "parameter_free": Setting.LE_FULL,
    "baseline": Setting.LE_FULL,
    "le_bandits": Setting.LE_BANDIT,
    "revealing_action": Setting.REVEALING,
    "hard_pm": Setting.HARD_PM,
}
CORRECTED = ("le_prediction", "le_bandits", "revealing_action")
PM_LEARNERS = ("revealing_action", "hard_pm")
ENVIRONMENTS = ("constant_best", "alternating", "fixed_variation", "bernoulli_gap", "dyadic", "columns")
ETA_RULES = {
    "cap": "1/(162 K)",
    "auto": "doubling (parameter_free only)",
    "qstar": "sqrt((log K + log T) / (18 eps Q*))",
    "q": "sqrt(2 log K / (eps Q))",
    "classic": "sqrt(2 log K / n)",
    "pm": "sqrt(2 gamma log K / (K Q))",
}
GAMMA_RULES = {"pm": "(sqrt(2 K Q log K) / (2 T))^(2/3)"}
ALPHA_RULES = {"tuned": "sqrt((log K + log T) / (eta T c)), capped at 1"}

_MATH = {"sqrt": math.sqrt, "log": math.log, "log2": math.log2, "exp": math.exp, "ceil": math.ceil,
         "floor": math.floor, "min": min, "max": max, "pi": math.pi}


def evaluate(expr, **names) -> float:
    """Evaluate a numeric config expression such as ``2^14``, ``T/2`` or ``sqrt(T)``."""
    if isinstance(expr, (int, float)):
        return expr
    text = str(expr).strip().replace("^", "**")
    try:
        return eval(text, {"__builtins__": {}}, {**_MATH, **names})  # noqa: S307 - local config
    except Exception as exc:
        raise ConfigError(f"cannot evaluate {expr!r}: {exc}") from None


def _as_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


@dataclass
class SweepConfig:
    learner: str
    environment: str
    T: list = field(default_factory=lambda: [1000])
    n: list = field(default_factory=lambda: ["T/2"])
    K: list = field(default_factory=lambda: [2])
    eta: list = field(default_factory=lambda: ["cap"])
    gamma: list = field(default_factory=lambda: [None])
    alpha: list = field(default_factory=lambda: [None])
    target_q: list = field(default_factory=lambda: [None])
    seeds: int = 1
    seed_offset: int = 0
    budget_mode: str = "hard-cap"
    workers: int = 1
    out_dir: str | None = None
    per_round: bool = False
    strict: bool = True
    corrections: bool = True
    messages: bool = True
    env_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.learner not in LEARNERS:
            raise ConfigError(f"unknown learner {self.learner!r}; choose from {sorted(LEARNERS)}")
        if self.environment not in ENVIRONMENTS:
            raise ConfigError(f"unknown environment {self.environment!r}; choose from {ENVIRONMENTS}")
        if self.seeds < 1:
            raise ConfigError("seeds must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.budget_mode not in ("expectation", "hard-cap"):
            raise ConfigError("budget_mode must be expectation or hard-cap")
        if (self.learner in PM_LEARNERS) != (self.environment == "columns"):
            raise ConfigError("partial-monitoring learners run on the 'columns' environment and only there")

    @classmethod
    def from_mapping(cls, raw: dict) -> "SweepConfig":
        raw = dict(raw)
        kw = {}
        for key in ("learner", "environment"):
            if key not in raw:
                raise ConfigError(f"config is missing {key!r}")
            kw[key] = raw.pop(key).strip()
        for key in GRID_KEYS:
            if key in raw:
                kw[key] = [v.strip() for v in str(raw.pop(key)).split(",") if v.strip()]
        for key in ("seeds", "seed_offset", "workers"):
            if key in raw:
                kw[key] = int(evaluate(raw.pop(key)))
        for key in ("per_round", "strict", "corrections", "messages"):
            if key in raw:
                kw[key] = _as_bool(raw.pop(key))
        for key in ("budget_mode", "out_dir"):
            if key in raw:
                kw[key] = raw.pop(key).strip()
        kw["env_params"] = {k: v.strip() for k, v in raw.items()}
        return cls(**kw)


def parse_config_text(text: str) -> dict:
    out = {}
    for num, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {num}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def parse_config(text: str, overrides: dict | None = None) -> SweepConfig:
    raw = parse_config_text(text)
    raw.update(overrides or {})
    return SweepConfig.from_mapping(raw)


# ---------------------------------------------------------------------------
# cells


@dataclass
class Cell:
    cell_id: int
    learner: str
    environment: str
    T: int
    n: int | None
    K: int
    eta_spec: object
    gamma_spec: object
    alpha_spec: object
    target_q: float | None
    env_params: dict
    budget_mode: str
    strict: bool
    corrections: bool
    messages: bool
    eta: float = float("nan")
    gamma: float | None = None
    alpha: float | None = None


def _load_game(spec: str) -> envs.GameSpec:
    path = Path(spec)
    if path.exists():
        return envs.load_game(path)
    try:
        return envs.bundled_game(spec)
    except FileNotFoundError:
        raise ConfigError(f"no game file or bundled game named {spec!r}") from None


def _vector(text, length=None):
    vals = [float(evaluate(v)) for v in str(text).split(",")]
    if length is not None and len(vals) != length:
        raise ConfigError(f"expected {length} comma-separated values, got {len(vals)}")
    return np.array(vals)


def make_environment(cell: Cell, seed: int):
    """Build the environment of ``cell`` for one seed."""
    T, K, p = cell.T, cell.K, cell.env_params
    names = dict(T=T, K=K, n=cell.n if cell.n else T)
    kind = cell.environment
    if kind == "constant_best":
        return envs.gen_constant(T, np.r_[0.0, np.ones(K - 1)])
    if kind == "alternating":
        return envs.gen_alternating(T, K)
    if kind == "fixed_variation":
        base_low = float(evaluate(p.get("base_low", 0.25), **names))
        gap = float(evaluate(p.get("gap", 0.5), **names))
        base = _vector(p["base"], K) if "base" in p else np.r_[base_low, np.full(K - 1, base_low + gap)]
        if "qstar" in p:
            qstar = float(evaluate(p["qstar"], **names))
            q_other = float(evaluate(p.get("q_other", "qstar"), qstar=qstar, **names))
            profile = np.r_[qstar, np.full(K - 1, q_other)]
            return envs.gen_fixed_variation(T, K, float(profile.sum()), base, seed, profile=profile)
        if cell.target_q is None:
            raise ConfigError("fixed_variation needs target_q or qstar")
        return envs.gen_fixed_variation(T, K, cell.target_q, base, seed)
    if kind in ("bernoulli_gap", "dyadic"):
        a = float(evaluate(p.get("alpha_center", 0.25), **names))
        lb = math.sqrt(a * (1 - a) * K / names["n"]) / (2 * math.sqrt(2))
        gap = float(evaluate(p.get("gap", "lb_gap"), lb_gap=lb, **names))
        best = int(evaluate(p.get("best_arm", 0), **names))
        gen = envs.gen_bernoulli_gap if kind == "bernoulli_gap" else envs.gen_dyadic
        return gen(T, K, a, gap, best, seed)
    if kind == "columns":
        game = _load_game(p.get("game", "hard4"))
        probs = _vector(p["probs"], game.num_outcomes) if "probs" in p else None
        return envs.gen_columns(game, T, probs, seed)
    raise ConfigError(f"unknown environment {kind!r}")


def expand_cells(cfg: SweepConfig) -> list[Cell]:
    cells = []
    grids = [cfg.T, cfg.n, cfg.K, cfg.eta, cfg.gamma, cfg.alpha, cfg.target_q]
    game_k = None
    if cfg.environment == "columns":
        game_k = _load_game(cfg.env_params.get("game", "hard4")).num_actions
    for T_, n_, K_, eta_, gam_, alp_, q_ in itertools.product(*grids):
        T = int(round(evaluate(T_)))
        K = game_k if game_k is not None else int(round(evaluate(K_, T=T)))
        setting = SETTING_OF[cfg.learner]
        n = None
        if setting in (Setting.LE_FULL, Setting.LE_BANDIT):
            n = int(round(evaluate(n_, T=T, K=K)))
        q = None if q_ is None else float(evaluate(q_, T=T, K=K, n=n or T))
        cells.append(Cell(len(cells), cfg.learner, cfg.environment, T, n, K, eta_, gam_, alp_, q,
                          cfg.env_params, cfg.budget_mode, cfg.strict, cfg.corrections, cfg.messages))
    return cells


def _numeric_or_rule(spec, rules, what):
    if spec is None:
        return None, None
    text = str(spec).strip()
    if text in rules:
        return None, text
    try:
        return float(evaluate(text)), None
    except ConfigError:
        raise ConfigError(f"{what} must be a number or one of {sorted(rules)}, got {spec!r}") from None


def resolve_parameters(cell: Cell, env_stats: list[dict]):
    """Fill in eta, gamma and alpha for a cell from its rules and mean realised statistics."""
    T, K, n = cell.T, cell.K, cell.n
    eps = n / T if n else 1.0
    Q = float(np.mean([s["Q"] for s in env_stats])) if env_stats else 0.0
    Qs = float(np.mean([s["Qstar"] for s in env_stats])) if env_stats else 0.0
    logk, logt = math.log(K), math.log(max(T, 2))

    gamma, g_rule = _numeric_or_rule(cell.gamma_spec, GAMMA_RULES, "gamma")
    if g_rule == "pm":
        if Q <= 0:
            raise ConfigError("gamma rule 'pm' needs Q > 0")
        gamma = min(1.0, (math.sqrt(2 * K * Q * logk) / (2 * T)) ** (2 / 3))
    cell.gamma = gamma

    eta, e_rule = _numeric_or_rule(cell.eta_spec, ETA_RULES, "eta")
    if cell.learner == "parameter_free":
        if e_rule not in (None, "auto") or eta is not None:
            log.info("parameter_free ignores eta = %s", cell.eta_spec)
        eta = math.sqrt(2 * logk) / eps
    elif e_rule == "auto":
        raise ConfigError("eta = auto is only valid for the parameter_free learner")
    elif e_rule == "cap":
        eta = eta_cap(K)
    elif e_rule == "qstar":
        if Qs <= 0:
            raise ConfigError("eta rule 'qstar' needs Q* > 0")
        eta = math.sqrt((logk + logt) / (18 * eps * Qs))
    elif e_rule == "q":
        if Q <= 0:
            raise ConfigError("eta rule 'q' needs Q > 0")
        eta = math.sqrt(2 * logk / (eps * Q))
    elif e_rule == "classic":
        eta = math.sqrt(2 * logk / (n if n else T))
    elif e_rule == "pm":
        if Q <= 0 or gamma is None:
            raise ConfigError("eta rule 'pm' needs Q > 0 and a gamma")
        eta = math.sqrt(2 * gamma * logk / (K * Q))
    if eta is None or not eta > 0:
        raise ConfigError(f"eta must be positive, got {cell.eta_spec!r}")
    cell.eta = float(eta)

    alpha, a_rule = _numeric_or_rule(cell.alpha_spec, ALPHA_RULES, "alpha")
    if a_rule == "tuned":
        c = env_stats[0]["reveal_cost"] if env_stats else 1.0
        alpha = min(1.0, math.sqrt((logk + logt) / (cell.eta * T * max(c, 1e-12))))
    cell.alpha = alpha

    if cell.learner in CORRECTED and cell.corrections and cell.eta > eta_cap(K) * (1 + 1e-12):
        if cell.strict:
            raise ConfigError(f"eta = {cell.eta:.4g} exceeds 1/(162K) = {eta_cap(K):.4g}")
        log.info("cell %d: eta above 1/(162K); running anyway (strict = false)", cell.cell_id)


def env_statistics(env) -> dict:
    losses = env.losses
    out = {"Q": env.realized_q, "Qstar": env.realized_qstar,
           "sq_max": float(np.sum(np.max(losses, axis=1) ** 2)) if losses.size else 0.0, "reveal_cost": 0.0}
    if isinstance(env, envs.PMEnvironment) and env.game.revealing_cost is not None:
        out["reveal_cost"] = env.game.revealing_cost
    return out


def _learner_config(cell: Cell, seed: int) -> LearnerConfig:
    return LearnerConfig(
        setting=SETTING_OF[cell.learner], horizon=cell.T, budget=cell.n,
        eta="auto" if cell.learner == "parameter_free" else cell.eta,
        gamma=cell.gamma, alpha_reveal=cell.alpha, corrections_enabled=cell.corrections,
        messages_enabled=cell.messages, budget_mode=cell.budget_mode, seed=seed, strict=False,
    )


def run_single(cell: Cell, seed: int, detail: bool = False):
    """One (cell, seed) run; returns the trace."""
    env = make_environment(cell, seed)
    cfg = _learner_config(cell, seed)
    fn = LEARNERS[cell.learner]
    if cell.learner in PM_LEARNERS:
        return fn(cfg, env.game, env, detail=detail)
    return fn(cfg, env, detail=detail)


def _job(args):
    cell, seed, per_round_path = args
    tr = run_single(cell, seed)
    if per_round_path:
        write_rounds(tr, per_round_path)
    return cell.cell_id, seed, {"regret": tr.regret, "queries": tr.queries_used, "Q": tr.Q,
                                "Qstar": tr.Qstar, **tr.invariant_summary()}


# ---------------------------------------------------------------------------
# bounds and aggregation


def bound_value(cell: Cell, Q: float, Qs: float, sq_max: float = float("nan"), reveal_cost: float = 0.0) -> float:
    """Regret bound for the cell's learner at the given variation statistics."""
    T, K = cell.T, cell.K
    if T == 0:
        return 0.0
    eps = cell.n / T if cell.n else 1.0
    eta = cell.eta
    logk, logt = math.log(K), math.log(max(T, 2))
    name = cell.learner
    if name == "le_prediction":
        return (logk + logt) / (eps * eta) + 18 * eta * Qs
    if name == "le_no_corrections":
        return logk / (eta * eps) + eta * Q / 2
    if name == "baseline":
        return logk / (eta * eps) + eta * sq_max / 2
    if name == "le_bandits":
        return K * logt / (eps * eta) + 18 * eta * Qs + K * logt ** 2
    if name == "revealing_action":
        a = cell.alpha
        return (logk + logt) / (a * eta) + 18 * eta * Qs + a * T * reveal_cost + logt ** 2
    if name == "hard_pm":
        g = cell.gamma
        return logk / eta + K * Q * eta / (2 * g) + g * T
    return float("nan")


def hard_pm_bound(log_k, K, Q, eta, gamma, T) -> float:
    return log_k / eta + K * Q * eta / (2 * gamma) + gamma * T


@dataclass
class CellResult:
    cell_id: int
    learner: str
    T: int
    n: int | None
    K: int
    eta: float
    gamma: float | None
    alpha: float | None
    mean_Q: float
    mean_Qstar: float
    mean_regret: float
    stderr_regret: float
    bound_value: float
    ratio: float
    queries_mean: float
    regrets: list = field(default_factory=list)
    invariants: dict = field(default_factory=dict)
    qstar_condition: bool | None = None

    def summary_row(self) -> dict:
        return {k: getattr(self, k) for k in SUMMARY_COLUMNS}


@dataclass
class AggregateResult:
    cells: list
    invalid: list = field(default_factory=list)
    slopes: dict = field(default_factory=dict)

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return None
            return v
        payload = {
            "cells": [{k: clean(v) for k, v in asdict(c).items()} for c in self.cells],
            "invalid": self.invalid,
            "slopes": self.slopes,
        }
        return json.dumps(payload, indent=2, sort_keys=True, default=float)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def summary_csv(result: AggregateResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for c in result.cells:
        row = c.summary_row()
        w.writerow([_fmt(row[k]) for k in SUMMARY_COLUMNS])
    return buf.getvalue()


def write_rounds(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=ROUND_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in trace.rows():
            w.writerow({k: _fmt(v) for k, v in row.items()})


def run_sweep(cfg: SweepConfig) -> AggregateResult:
    """Run every (cell, seed) pair, aggregate per cell and write outputs if ``out_dir`` is set."""
    seeds = [cfg.seed_offset + s for s in range(cfg.seeds)]
    valid, invalid, stats_by_cell = [], [], {}
    for cell in expand_cells(cfg):
        try:
            st = [env_statistics(make_environment(cell, s)) for s in seeds] if cell.T else []
            resolve_parameters(cell, st)
            _learner_config(cell, seeds[0])
        except (ConfigError, DomainError) as exc:
            log.warning("skipping cell %d (T=%s n=%s K=%s eta=%s): %s",
                        cell.cell_id, cell.T, cell.n, cell.K, cell.eta_spec, exc)
            invalid.append({"cell_id": cell.cell_id, "reason": str(exc)})
            continue
        valid.append(cell)
        stats_by_cell[cell.cell_id] = st
    if not valid:
        raise ConfigError("every cell of the sweep is invalid: " + "; ".join(i["reason"] for i in invalid))

    out_dir = Path(cfg.out_dir) if cfg.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    jobs = []
    for cell in valid:
        for s in seeds:
            path = str(out_dir / f"rounds_cell{cell.cell_id}_seed{s}.csv") if (out_dir and cfg.per_round) else None
            jobs.append((cell, s, path))
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outputs = list(pool.map(_job, jobs))
    else:
        outputs = [_job(j) for j in jobs]
    by_key = {(cid, s): res for cid, s, res in outputs}

    cells = []
    for cell in valid:
        runs = [by_key[(cell.cell_id, s)] for s in seeds]
        regrets = np.array([r["regret"] for r in runs])
        st = stats_by_cell[cell.cell_id]
        mean_q = float(np.mean([r["Q"] for r in runs]))
        mean_qs = float(np.mean([r["Qstar"] for r in runs]))
        sq_max = float(np.mean([s["sq_max"] for s in st])) if st else 0.0
        c = st[0]["reveal_cost"] if st else 0.0
        stderr = float(regrets.std(ddof=1) / math.sqrt(len(regrets))) if len(regrets) > 1 else 0.0
        bound = bound_value(cell, mean_q, mean_qs, sq_max, c)
        mean_regret = float(regrets.mean())
        ratio = mean_regret / bound if bound and math.isfinite(bound) else float("nan")
        inv = {k: int(sum(r[k] for r in runs)) for k in
               ("lemma1_violations", "dual_norm_violations", "stability_flags", "kkt_flags")}
        qcond = None
        if cell.learner == "le_prediction" and cell.n:
            qcond = bool(cell.n / cell.T * mean_qs >= 1458 * cell.K ** 2 * math.log(cell.K * cell.T))
        cells.append(CellResult(cell.cell_id, cell.learner, cell.T, cell.n, cell.K, cell.eta, cell.gamma,
                                cell.alpha, mean_q, mean_qs, mean_regret, stderr, bound, ratio,
                                float(np.mean([r["queries"] for r in runs])), regrets.tolist(), inv, qcond))
    result = AggregateResult(cells, invalid)
    result.slopes = _auto_slopes(cells)
    if out_dir:
        (out_dir / "summary.csv").write_text(summary_csv(result))
        (out_dir / "summary.json").write_text(result.to_json())
    return result


def _auto_slopes(cells) -> dict:
    """Log-log slopes of mean regret against every grid axis that varies alone."""
    out = {}
    for axis, getter in (("T", lambda c: c.T), ("n", lambda c: c.n), ("Q", lambda c: c.mean_Q)):
        xs = [getter(c) for c in cells]
        if len(cells) >= 3 and all(x and x > 0 for x in xs) and len(set(xs)) == len(xs):
            ys = [c.mean_regret for c in cells]
            if all(y > 0 for y in ys):
                slope, err = fit_slope(list(zip(xs, ys)))
                out[axis] = {"slope": slope, "stderr": err}
    return out


def fit_slope(points, log_log: bool = True):
    """OLS slope (and its standard error) of y on x, in log-log space by default."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise DomainError("fit_slope needs at least three (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    if log_log:
        if np.any(x <= 0) or np.any(y <= 0):
            raise DomainError("log-log fit needs positive x and y")
        x, y = np.log(x), np.log(y)
    res = stats.linregress(x, y)
    return float(res.slope), float(res.stderr)


def bound_overlay(result: AggregateResult) -> list[dict]:
    """Per-cell ratio of mean regret to the bound, and whether regret <= bound + 3 stderr."""
    rows = []
    for c in result.cells:
        ok = None
        if math.isfinite(c.bound_value):
            ok = bool(c.mean_regret <= c.bound_value + 3 * c.stderr_regret)
        rows.append({"cell_id": c.cell_id, "learner": c.learner, "mean_regret": c.mean_regret,
                     "stderr_regret": c.stderr_regret, "bound_value": c.bound_value, "ratio": c.ratio,
                     "within": ok})
    return rows
