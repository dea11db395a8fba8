import math

import numpy as np  # type: ignore
import pytest

from App.entropy_lab import (Distribution, PermLaw, d_distance, d_vs_entropy_ratio, deck_sign, ent,
                             entropy_decompose, mixture, pinsker_gap, point_mass, pushforward,
                             random_distribution, rel_entropy, shannon, tv, uniform)
from App.exceptions import (DomainError, InfiniteDivergenceError, ResourceError,
                            UndefinedQuantityError)


def test_distribution_validation():
    with pytest.raises(DomainError):
        Distribution(np.array([0.5, 0.6]))
    with pytest.raises(DomainError):
        Distribution(np.array([1.5, -0.5]))
    with pytest.raises(DomainError):
        Distribution(np.array([]))


def test_rel_entropy_examples():
    a = Distribution(np.array([0.75, 0.25]))
    assert rel_entropy(a, a) == 0.0
    assert rel_entropy(point_mass(8, 3), uniform(8)) == pytest.approx(math.log(8))
    expected = 0.75 * math.log(1.5) + 0.25 * math.log(0.5)
    assert rel_entropy(a, uniform(2)) == pytest.approx(expected)
    with pytest.raises(InfiniteDivergenceError):
        rel_entropy(uniform(2), point_mass(2))
    with pytest.raises(DomainError):
        rel_entropy(uniform(2), uniform(3))


def test_tv_examples():
    assert tv(uniform(4), uniform(4)) == 0.0
    assert tv(point_mass(3, 0), point_mass(3, 2)) == 1.0
    assert tv(point_mass(2), uniform(2)) == pytest.approx(0.5)


def test_pinsker_examples():
    assert pinsker_gap(uniform(5)) == (0.0, 0.0)
    low, high = pinsker_gap(point_mass(2))
    assert low == pytest.approx(0.5)
    assert high == pytest.approx(math.sqrt(0.5 * math.log(2)))


def test_pinsker_sweep(rng):
    for _ in range(10_000):
        size = int(rng.integers(2, 65))
        low, high = pinsker_gap(random_distribution(size, rng, sparsity=0.3))
        assert low <= high + 1e-12


def test_ent_equals_entropy_gap(rng):
    for size in (2, 7, 30):
        a = random_distribution(size, rng, sparsity=0.2)
        assert ent(a) == pytest.approx(shannon(uniform(size)) - shannon(a), abs=1e-12)


def test_d_distance_examples():
    p = Distribution(np.array([0.2, 0.3, 0.5]))
    assert d_distance(p, p) == pytest.approx(0.0, abs=1e-15)
    assert d_distance(point_mass(4, 0), point_mass(4, 1)) == pytest.approx(math.log(2))


@pytest.mark.slow
def test_d_distance_mixture_identity(rng):
    for _ in range(10_000):
        size = int(rng.integers(2, 40))
        p = random_distribution(size, rng, sparsity=0.3)
        q = random_distribution(size, rng, sparsity=0.3)
        lhs = ent(mixture(p, q))
        rhs = 0.5 * ent(p) + 0.5 * ent(q) - d_distance(p, q)
        assert lhs == pytest.approx(rhs, abs=1e-10)
        assert d_distance(p, q) == pytest.approx(d_distance(q, p), abs=1e-14)


def test_pushforward_examples(rng):
    p = random_distribution(6, rng)
    assert np.allclose(pushforward(p, range(6)).weights, p.weights)
    assert pushforward(p, [2] * 6, size=3).weights.tolist() == pytest.approx([0, 0, 1])
    with pytest.raises(DomainError):
        pushforward(p, [0, 1])


@pytest.mark.slow
def test_projection_never_increases_d(rng):
    for _ in range(10_000):
        size = int(rng.integers(2, 20))
        p = random_distribution(size, rng, sparsity=0.2)
        q = random_distribution(size, rng, sparsity=0.2)
        g = rng.integers(0, max(1, size // 2), size=size)
        assert d_distance(p, q) >= d_distance(pushforward(p, g), pushforward(q, g)) - 1e-12


def test_d_vs_entropy_ratio(rng):
    delta = point_mass(16, 5)
    assert d_vs_entropy_ratio(delta) == pytest.approx(d_distance(delta, uniform(16)))
    near = Distribution(np.full(10, 0.1) + np.linspace(-0.01, 0.01, 10))
    assert 0 < d_vs_entropy_ratio(near) < math.inf
    with pytest.raises(UndefinedQuantityError):
        d_vs_entropy_ratio(uniform(4))


def test_deck_sign():
    assert deck_sign((1, 2, 3)) == 1
    assert deck_sign((2, 1, 3)) == -1
    assert deck_sign((2, 3, 1)) == 1


def test_decompose_uniform_is_zero():
    parts = entropy_decompose(PermLaw.uniform(3))
    assert parts.sign_term == pytest.approx(0.0, abs=1e-12)
    assert parts.tilde_e[3] == pytest.approx(0.0, abs=1e-12)
    assert parts.residual == 0.0
    assert parts.total == pytest.approx(0.0, abs=1e-12)


def test_decompose_alternating():
    parts = entropy_decompose(PermLaw.alternating(3))
    assert parts.sign_term == pytest.approx(math.log(2))
    assert parts.tilde_e[3] == pytest.approx(0.0, abs=1e-12)
    assert parts.residual == pytest.approx(0.0, abs=1e-12)
    assert parts.total == pytest.approx(math.log(2))


def test_decompose_point_mass():
    parts = entropy_decompose(PermLaw.point(3))
    assert parts.sign_term == pytest.approx(math.log(2))
    assert parts.tilde_e[3] == pytest.approx(math.log(3))
    assert parts.residual == pytest.approx(0.0, abs=1e-12)
    assert parts.total == pytest.approx(math.log(6))


@pytest.mark.parametrize("m", [3, 4, 5, 6])
def test_decompose_reconstructs_ent(rng, m):
    for _ in range(5):
        law = PermLaw.random(m, rng, sparsity=0.5)
        parts = entropy_decompose(law)
        assert parts.total == pytest.approx(ent(law.as_distribution()), abs=1e-10)
        assert parts.reconstructed == pytest.approx(parts.total, abs=1e-10)
        assert parts.sign_term >= 0 and parts.residual >= 0
        assert all(value >= 0 for value in parts.tilde_e.values())


def test_perm_law_limits():
    with pytest.raises(ResourceError):
        PermLaw(9, {tuple(range(1, 10)): 1.0})
    with pytest.raises(DomainError):
        PermLaw(3, {(1, 1, 3): 1.0})
    with pytest.raises(DomainError):
        PermLaw(3, {(1, 2, 3): 0.5})


@pytest.mark.slow
def test_decompose_random_laws(rng):
    for index in range(100):
        m = 3 + index % 4
        law = PermLaw.random(m, rng, sparsity=float(rng.uniform(0.0, 0.9)))
        parts = entropy_decompose(law)
        assert abs(parts.reconstructed - ent(law.as_distribution())) <= 1e-10
        assert parts.sign_term >= -1e-12 and parts.residual >= -1e-12
