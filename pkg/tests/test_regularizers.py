import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptlep.errors import DomainError
from adaptlep.regularizers import Kind, Regularizer, hybrid, log_barrier, negentropy, validate_simplex

LN2 = math.log(2)
KINDS = list(Kind)


def simplex_points(k_min=2, k_max=8):
    return st.integers(k_min, k_max).flatmap(
        lambda k: st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k)
    ).map(lambda w: np.array(w) / np.sum(w))


def make(kind, eta, k):
    return Regularizer(kind, eta, k)


def test_value_examples():
    half = np.array([0.5, 0.5])
    assert negentropy(1.0, 2).value(half) == pytest.approx(-LN2, abs=1e-6)
    assert hybrid(1.0, 2).value(half) == pytest.approx(0.0, abs=1e-12)
    assert log_barrier(2.0, 2).value(half) == pytest.approx(LN2, abs=1e-6)


def test_gradient_examples():
    half = np.array([0.5, 0.5])
    np.testing.assert_allclose(negentropy(1.0, 2).gradient(half), [0.306853, 0.306853], atol=1e-6)
    np.testing.assert_allclose(hybrid(1.0, 2).gradient(half), [-0.693147, -0.693147], atol=1e-6)


@pytest.mark.parametrize("kind", KINDS)
def test_gradient_matches_central_differences(kind, rng):
    reg = make(kind, 0.7, 2)
    x = np.array([0.3, 0.7])
    h = 1e-6
    fd = [(reg.value(x + h * e) - reg.value(x - h * e)) / (2 * h) for e in np.eye(2)]
    np.testing.assert_allclose(reg.gradient(x), fd, rtol=1e-5)
    for _ in range(100):
        k = int(rng.integers(2, 7))
        reg = make(kind, float(rng.uniform(0.05, 5)), k)
        x = rng.dirichlet(np.ones(k)) * 0.9 + 0.1 / k
        fd = [(reg.value(x + h * e) - reg.value(x - h * e)) / (2 * h) for e in np.eye(k)]
        np.testing.assert_allclose(reg.gradient(x), fd, rtol=1e-5, atol=1e-7)


def test_bregman_examples():
    x = np.array([0.4, 0.6])
    for kind in KINDS:
        assert make(kind, 1.0, 2).bregman(x, x) == 0.0
    a, b = np.array([0.5, 0.5]), np.array([0.25, 0.75])
    kl = float(np.sum(a * np.log(a / b)))
    assert negentropy(1.0, 2).bregman(a, b) == pytest.approx(0.143841, abs=1e-6)
    assert negentropy(1.0, 2).bregman(a, b) == pytest.approx(kl, rel=1e-12)


def test_bregman_matches_definition(rng):
    for _ in range(200):
        k = int(rng.integers(2, 6))
        reg = make(KINDS[int(rng.integers(3))], float(rng.uniform(0.1, 3)), k)
        x, y = rng.dirichlet(np.ones(k)) + 0.01, rng.dirichlet(np.ones(k)) + 0.01
        x, y = x / x.sum(), y / y.sum()
        direct = reg.value(x) - reg.value(y) - reg.gradient(y) @ (x - y)
        assert reg.bregman(x, y) == pytest.approx(direct, rel=1e-7, abs=1e-10)


@given(simplex_points(), simplex_points(), st.sampled_from(KINDS), st.floats(1e-3, 10))
def test_bregman_nonnegative(x, y, kind, eta):
    if x.size != y.size:
        return
    reg = make(kind, eta, x.size)
    assert reg.bregman(x, y) >= -1e-12
    assert reg.bregman(x, x) == 0.0


def test_norm_examples():
    reg = hybrid(1.0, 2)
    x, u = np.array([0.5, 0.5]), np.array([1.0, 0.0])
    assert reg.local_norm(x, u) == pytest.approx(2.0)
    assert reg.dual_norm(x, u) == pytest.approx(0.5)
    assert reg.local_norm(x, np.zeros(2)) == 0.0
    assert reg.dual_norm(x, np.zeros(2)) == 0.0


@given(simplex_points(), st.sampled_from(KINDS), st.floats(1e-3, 10), st.data())
def test_holder_in_local_norm_pair(x, kind, eta, data):
    k = x.size
    vec = st.lists(st.floats(-100, 100), min_size=k, max_size=k).map(np.array)
    u, v = data.draw(vec), data.draw(vec)
    reg = make(kind, eta, k)
    assert u @ v <= reg.local_norm(x, u) * reg.dual_norm(x, v) + 1e-9 * max(1.0, abs(u @ v))


@given(simplex_points(), st.floats(1e-3, 10))
def test_hybrid_is_sum_of_parts(x, eta):
    k = x.size
    reg = hybrid(eta, k)
    barrier_part = log_barrier(eta * k, k).value(x)
    assert reg.value(x) == pytest.approx(negentropy(eta, k).value(x) + barrier_part, rel=1e-12, abs=1e-12)


def test_hessian_formula():
    reg = hybrid(0.5, 3)
    x = np.array([0.2, 0.3, 0.5])
    np.testing.assert_allclose(reg.hessian_diag(x), (1 / 0.5) * (1 / x + 1 / (3 * x * x)))


@pytest.mark.parametrize("bad", [[0.0, 1.0], [-0.1, 1.1]])
def test_domain_errors(bad):
    reg = hybrid(1.0, 2)
    for fn in (reg.value, reg.gradient):
        with pytest.raises(DomainError):
            fn(np.array(bad))
    with pytest.raises(DomainError):
        reg.bregman(np.array(bad), np.array([0.5, 0.5]))
    with pytest.raises(DomainError):
        reg.dual_norm(np.array(bad), np.ones(2))


def test_constructor_validation():
    with pytest.raises(DomainError):
        hybrid(0.0, 2)
    with pytest.raises(DomainError):
        hybrid(1.0, 1)


def test_validate_simplex():
    validate_simplex(np.array([0.25, 0.75]))
    with pytest.raises(DomainError):
        validate_simplex(np.array([0.3, 0.3]))
    with pytest.raises(DomainError):
        validate_simplex(np.array([0.0, 1.0]))
