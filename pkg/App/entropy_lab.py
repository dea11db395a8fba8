"""
Модуль работы с конечными распределениями и энтропией.

Относительная энтропия, полная вариация (соглашение ½Σ|a−b|), проверка
неравенства Пинскера, "расстояние" d(p, q), проталкивание распределения
через отображение индексов и разложение энтропии закона перестановки
по знаку и хвостам колоды. Везде натуральный логарифм.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np  # type: ignore
from scipy.special import entr, rel_entr, xlogy  # type: ignore

from .exceptions import DomainError, InfiniteDivergenceError, ResourceError, UndefinedQuantityError

logger = logging.getLogger(__name__)

MAX_LAW_SIZE = 8
SUM_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Distribution:
    """Неотрицательные веса над конечным множеством индексов, сумма 1."""
    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise DomainError("Распределение должно быть непустым вектором")
        if np.any(w < 0):
            raise DomainError("Веса распределения должны быть неотрицательными")
        if abs(float(w.sum()) - 1.0) > SUM_TOLERANCE * max(1, w.size):
            raise DomainError(f"Сумма весов {w.sum()!r} отличается от 1")
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return int(self.weights.size)


def uniform(size: int) -> Distribution:
    return Distribution(np.full(size, 1.0 / size))


def point_mass(size: int, index: int = 0) -> Distribution:
    w = np.zeros(size)
    w[index] = 1.0
    return Distribution(w)


def random_distribution(size: int, rng: np.random.Generator, sparsity: float = 0.0) -> Distribution:
    """Случайное распределение: экспоненциальные веса, часть из которых обнуляется."""
    w = rng.exponential(size=size)
    if sparsity > 0:
        w[rng.random(size) < sparsity] = 0.0
        if not np.any(w > 0):
            w[rng.integers(size)] = 1.0
    return Distribution(w / w.sum())


def _same_size(a: Distribution, b: Distribution) -> None:
    if a.size != b.size:
        raise DomainError(f"Распределения на разных множествах: {a.size} и {b.size}")


def mixture(p: Distribution, q: Distribution) -> Distribution:
    _same_size(p, q)
    return Distribution((p.weights + q.weights) / 2)


def rel_entropy(a: Distribution, b: Distribution) -> float:
    """
    Относительная энтропия Σ a_i log(a_i/b_i), 0·log 0 = 0.

    Raises:
        InfiniteDivergenceError: Если a_i > 0 при b_i = 0.
    """
    _same_size(a, b)
    if np.any((a.weights > 0) & (b.weights == 0)):
        raise InfiniteDivergenceError("a не абсолютно непрерывно относительно b")
    return max(0.0, float(np.sum(rel_entr(a.weights, b.weights))))


def ent(a: Distribution) -> float:
    """ENT(a): относительная энтропия a относительно равномерного распределения."""
    return rel_entropy(a, uniform(a.size))


def shannon(a: Distribution) -> float:
    return float(np.sum(entr(a.weights)))


def tv(a: Distribution, b: Distribution) -> float:
    _same_size(a, b)
    return 0.5 * float(np.sum(np.abs(a.weights - b.weights)))


def pinsker_gap(a: Distribution) -> Tuple[float, float]:
    """Возвращает (tv(a, U), sqrt(½·ENT(a))); первое не превосходит второго."""
    return tv(a, uniform(a.size)), math.sqrt(0.5 * ent(a))


def d_distance(p: Distribution, q: Distribution) -> float:
    """
    Сумма по точкам ½p log p + ½q log q − m log m, m = (p+q)/2.

    Удовлетворяет ENT(m) = ½ENT(p) + ½ENT(q) − d(p, q).
    """
    _same_size(p, q)
    m = (p.weights + q.weights) / 2
    value = np.sum(0.5 * xlogy(p.weights, p.weights) + 0.5 * xlogy(q.weights, q.weights)
                   - xlogy(m, m))
    return max(0.0, float(value))


def pushforward(p: Distribution, g: Sequence[int], size: Optional[int] = None) -> Distribution:
    """P(y) = Σ_{g(x)=y} p(x); g задаётся массивом образов индексов."""
    image = np.asarray(g, dtype=np.int64)
    if image.shape != (p.size,) or np.any(image < 0):
        raise DomainError("Отображение должно быть определено на всём множестве индексов")
    return Distribution(np.bincount(image, weights=p.weights, minlength=size or 0))


def d_vs_entropy_ratio(q: Distribution) -> float:
    """
    Эмпирическая константа d(q, U)·log|V| / ENT(q).

    Raises:
        UndefinedQuantityError: Если ENT(q) = 0.
    """
    e = ent(q)
    if e <= 1e-15:
        raise UndefinedQuantityError("ENT(q) = 0: отношение не определено")
    return d_distance(q, uniform(q.size)) * math.log(q.size) / e


def deck_sign(deck: Sequence[int]) -> int:
    """Знак перестановки, записанной как deck[p] = карта в позиции p+1."""
    m = len(deck)
    seen = [False] * m
    cycles = 0
    for start in range(m):
        if seen[start]:
            continue
        cycles += 1
        j = start
        while not seen[j]:
            seen[j] = True
            j = deck[j] - 1
    return 1 if (m - cycles) % 2 == 0 else -1


@dataclass
class PermLaw:
    """
    Явный закон случайной перестановки колоды из m карт.

    Ключи: кортежи deck, где deck[p]: карта (1..m) в позиции p+1
    (то есть π⁻¹); значения: вероятности.
    """
    m: int
    support: Dict[Tuple[int, ...], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.m > MAX_LAW_SIZE:
            raise ResourceError(f"Явный закон ограничен m ≤ {MAX_LAW_SIZE}, получено {self.m}")
        if self.m < 2:
            raise DomainError(f"Размер колоды должен быть ≥ 2, получено {self.m}")
        cards = list(range(1, self.m + 1))
        total = 0.0
        for deck, prob in self.support.items():
            if sorted(deck) != cards:
                raise DomainError(f"{deck} не является перестановкой 1..{self.m}")
            if prob < 0:
                raise DomainError("Вероятности должны быть неотрицательными")
            total += prob
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"Сумма вероятностей {total!r} отличается от 1")

    @classmethod
    def from_weights(cls, m: int, weights: Mapping[Tuple[int, ...], float]) -> "PermLaw":
        total = float(sum(weights.values()))
        return cls(m, {deck: w / total for deck, w in weights.items() if w > 0})

    @classmethod
    def uniform(cls, m: int) -> "PermLaw":
        decks = list(itertools.permutations(range(1, m + 1)))
        return cls(m, {deck: 1.0 / len(decks) for deck in decks})

    @classmethod
    def alternating(cls, m: int) -> "PermLaw":
        decks = [d for d in itertools.permutations(range(1, m + 1)) if deck_sign(d) == 1]
        return cls(m, {deck: 1.0 / len(decks) for deck in decks})

    @classmethod
    def point(cls, m: int, deck: Optional[Sequence[int]] = None) -> "PermLaw":
        return cls(m, {tuple(deck) if deck else tuple(range(1, m + 1)): 1.0})

    @classmethod
    def random(cls, m: int, rng: np.random.Generator, sparsity: float = 0.0) -> "PermLaw":
        decks = list(itertools.permutations(range(1, m + 1)))
        dist = random_distribution(len(decks), rng, sparsity)
        return cls.from_weights(m, dict(zip(decks, dist.weights.tolist())))

    def as_distribution(self) -> Distribution:
        """Закон как распределение на всех m! перестановках в лексикографическом порядке."""
        decks = itertools.permutations(range(1, self.m + 1))
        return Distribution(np.array([self.support.get(d, 0.0) for d in decks]))


@dataclass(frozen=True)
class EntropyDecomposition:
    sign_term: float
    tilde_e: Dict[int, float]
    residual: float
    total: float

    @property
    def reconstructed(self) -> float:
        return self.sign_term + sum(self.tilde_e.values()) + self.residual


def _conditional_ent(groups: Dict[tuple, Dict[object, float]], reference: int) -> float:
    value = 0.0
    for counts in groups.values():
        mass = sum(counts.values())
        if mass <= 0:
            continue
        inner = sum(p / mass * math.log(reference * p / mass) for p in counts.values() if p > 0)
        value += mass * inner
    return value


def entropy_decompose(law: PermLaw) -> EntropyDecomposition:
    """
    Разложение ENT(π) по цепному правилу: знак, затем карты позиций m…3
    при условии хвоста и знака, затем остаток.

    tilde_e[k] = E[ENT(π⁻¹(k) | tail_{k+1}, sgn)] относительно равномерного
    распределения на k оставшихся картах; остаток при m ≥ 2 всегда 0,
    так как хвост tail_3 и знак определяют перестановку однозначно.

    Raises:
        ResourceError: Если m > 8.
    """
    m = law.m
    items = [(deck, p, deck_sign(deck)) for deck, p in law.support.items() if p > 0]

    by_sign: Dict[int, float] = {}
    for _, p, s in items:
        by_sign[s] = by_sign.get(s, 0.0) + p
    sign_term = sum(p * math.log(2 * p) for p in by_sign.values() if p > 0)

    tilde_e: Dict[int, float] = {}
    for k in range(m, 2, -1):
        groups: Dict[tuple, Dict[object, float]] = {}
        for deck, p, s in items:
            key = (deck[k:], s)
            bucket = groups.setdefault(key, {})
            bucket[deck[k - 1]] = bucket.get(deck[k - 1], 0.0) + p
        tilde_e[k] = max(0.0, _conditional_ent(groups, k))

    rest: Dict[tuple, Dict[object, float]] = {}
    for deck, p, s in items:
        bucket = rest.setdefault((deck[2:], s), {})
        bucket[deck] = bucket.get(deck, 0.0) + p
    residual = max(0.0, _conditional_ent(rest, 1))

    total = sum(p * math.log(math.factorial(m) * p) for _, p, _ in items)
    return EntropyDecomposition(sign_term, tilde_e, residual, total)
