"""Separable regularizers over the probability simplex.

Every regularizer handled here has the form

    R(x) = a * sum_i x_i log x_i  +  b * sum_i log(1 / x_i)

with a negentropy weight ``a`` and a log-barrier weight ``b``.  The three
kinds used by the learners are

    Negentropy:  a = 1/eta,  b = 0
    LogBarrier:  a = 0,      b = 1/eta
    Hybrid:      a = 1/eta,  b = 1/(eta K)

Hessians are diagonal and are always carried as vectors.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DomainError

SIMPLEX_FLOOR = 1e-10


class Kind(str, enum.Enum):
    NEGENTROPY = "negentropy"
    LOG_BARRIER = "log_barrier"
    HYBRID = "hybrid"


@njit(cache=True)
def grad_coord(x, a, b):
    return a * (1.0 + np.log(x)) - b / x


@njit(cache=True)
def hess_coord(x, a, b):
    return a / x + b / (x * x)


@dataclass(frozen=True)
class Regularizer:
    """A negentropy / log-barrier / hybrid regularizer with learning rate ``eta``."""

    kind: Kind
    eta: float
    num_arms: int

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not self.eta > 0:
            raise DomainError(f"eta must be positive, got {self.eta}")
        if self.num_arms < 2:
            raise DomainError(f"num_arms must be at least 2, got {self.num_arms}")

    @property
    def entropy_weight(self) -> float:
        return 0.0 if self.kind is Kind.LOG_BARRIER else 1.0 / self.eta

    @property
    def barrier_weight(self) -> float:
        if self.kind is Kind.NEGENTROPY:
            return 0.0
        if self.kind is Kind.LOG_BARRIER:
            return 1.0 / self.eta
        return 1.0 / (self.eta * self.num_arms)

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.num_arms,):
            raise DomainError(f"expected a vector of length {self.num_arms}, got shape {x.shape}")
        if not np.all(x > 0):
            raise DomainError("regularizer evaluated at a point with a non-positive coordinate")
        return x

    def value(self, x) -> float:
        x = self._check(x)
        a, b = self.entropy_weight, self.barrier_weight
        return float(a * np.sum(x * np.log(x)) - b * np.sum(np.log(x)))

    def gradient(self, x) -> np.ndarray:
        x = self._check(x)
        return grad_coord(x, self.entropy_weight, self.barrier_weight)

    def hessian_diag(self, x) -> np.ndarray:
        x = self._check(x)
        return hess_coord(x, self.entropy_weight, self.barrier_weight)

    def bregman(self, x, y) -> float:
        """D_R(x, y) = R(x) - R(y) - <grad R(y), x - y>."""
        x = self._check(x)
        y = self._check(y)
        a, b = self.entropy_weight, self.barrier_weight
        # coordinate-wise closed form; avoids cancellation between R(x) and R(y)
        ratio = x / y
        ent = np.sum(x * np.log(ratio) - x + y)
        bar = np.sum(ratio - 1.0 - np.log(ratio))
        return float(max(a * ent + b * bar, 0.0))

    def local_norm(self, x, u) -> float:
        h = self.hessian_diag(x)
        u = np.asarray(u, dtype=float)
        return float(np.sqrt(np.sum(u * u * h)))

    def dual_norm(self, x, u) -> float:
        h = self.hessian_diag(x)
        u = np.asarray(u, dtype=float)
        return float(np.sqrt(np.sum(u * u / h)))

    def minimizer(self) -> np.ndarray:
        return np.full(self.num_arms, 1.0 / self.num_arms)


def negentropy(eta, num_arms) -> Regularizer:
    return Regularizer(Kind.NEGENTROPY, eta, num_arms)


def log_barrier(eta, num_arms) -> Regularizer:
    return Regularizer(Kind.LOG_BARRIER, eta, num_arms)


def hybrid(eta, num_arms) -> Regularizer:
    return Regularizer(Kind.HYBRID, eta, num_arms)


def validate_simplex(x, floor=SIMPLEX_FLOOR, atol=1e-12) -> np.ndarray:
    """Return ``x`` as an array after checking it is a floored point of the simplex."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise DomainError("simplex point must be a non-empty vector")
    if not np.all(x > 0) or np.min(x) < floor * (1 - 1e-9):
        raise DomainError(f"simplex point has a coordinate below the floor {floor}")
    if abs(np.sum(x) - 1.0) > atol:
        raise DomainError(f"simplex point sums to {np.sum(x)!r}")
    return x
