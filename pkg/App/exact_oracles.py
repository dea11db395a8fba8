"""
Модуль точных оракулов на малых размерах.

Перечисление достижимого класса перестановок (n ≤ 3), точная эволюция
закона цепи, точная проверка эквивалентности двухшаговой цепи и 3-Monte
симуляции, точная цепь одного тайла, ДП ленивого блуждания с барьером и
ДП смещения, а также файл регрессионных значений.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import aiofiles  # type: ignore
import numpy as np  # type: ignore

from .entropy_lab import Distribution, ent, point_mass, tv, uniform
from .exceptions import DomainError, ResourceError
from .grid_core import Axis, l_support, move_permutation, rotations
from .shuffle_engine import ScriptedStream, knuth_shuffle, modified_knuth_shuffle

logger = logging.getLogger(__name__)

FIXTURES_PATH = Path(__file__).parent / "fixtures" / "regression_values.txt"
FIXTURES_VERSION = 1
MIXING_THRESHOLD = 0.25


def lehmer_rank(seq: Sequence[int]) -> int:
    """Ранг перестановки по коду Лемера; тождественная имеет ранг 0."""
    size = len(seq)
    rank = 0
    for i in range(size):
        smaller = sum(1 for j in range(i + 1, size) if seq[j] < seq[i])
        rank += smaller * math.factorial(size - 1 - i)
    return rank


def _encode(tile_at: np.ndarray, base: int) -> np.ndarray:
    weights = base ** np.arange(tile_at.shape[1], dtype=np.int64)
    return tile_at.astype(np.int64) @ weights


@dataclass
class ReachableClass:
    """
    Достижимые из тождественной перестановки состояния (представление tile_at).

    members[i]: состояние с индексом i; identity имеет индекс 0.
    gen_index[g][i]: индекс состояния после генератора g.
    """
    n: int
    members: np.ndarray
    keys: np.ndarray
    gen_index: np.ndarray
    lehmer: bool
    sort_order: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64), repr=False)

    @property
    def size(self) -> int:
        return int(self.members.shape[0])

    def index_of(self, tile_at: Sequence[int]) -> int:
        if self.lehmer:
            return lehmer_rank(list(tile_at))
        key = _encode(np.asarray(tile_at)[None, :], self.n * self.n)[0]
        sorted_keys = self.keys[self.sort_order]
        pos = int(np.searchsorted(sorted_keys, key))
        if pos >= self.size or sorted_keys[pos] != key:
            raise DomainError(f"Состояние {list(tile_at)} не принадлежит классу")
        return int(self.sort_order[pos])


def enumerate_reachable(n: int) -> ReachableClass:
    """
    Обход в ширину из тождественной перестановки по 4n генераторам.

    Args:
        n (int): Сторона тора, 2 или 3.

    Returns:
        ReachableClass: Для чётного n: все (n²)! состояний, для нечётного: (n²)!/2 чётных.

    Raises:
        ResourceError: Если n > 3.
    """
    if n > 3:
        raise ResourceError(f"Явный перебор возможен только при n ≤ 3, получено {n}")
    if n < 2:
        raise DomainError(f"n должно быть ≥ 2, получено {n}")
    size = n * n
    inverse_maps = []
    for move in rotations(n):
        sigma = move_permutation(move, n)
        inv = np.empty(size, dtype=np.intp)
        inv[sigma] = np.arange(size)
        inverse_maps.append(inv)

    frontier = np.arange(size, dtype=np.int64)[None, :]
    layers = [frontier]
    visited = np.sort(_encode(frontier, size))
    while frontier.shape[0]:
        candidates = np.concatenate([frontier[:, inv] for inv in inverse_maps])
        keys, first = np.unique(_encode(candidates, size), return_index=True)
        fresh = ~np.isin(keys, visited)
        frontier = candidates[first[fresh]]
        if frontier.shape[0]:
            layers.append(frontier)
            visited = np.union1d(visited, keys[fresh])
    members = np.concatenate(layers)
    lehmer = n == 2
    if lehmer:
        ranks = np.array([lehmer_rank(row.tolist()) for row in members])
        members = members[np.argsort(ranks)]
    keys = _encode(members, size)
    logger.info("Достижимый класс для n=%d: %d состояний", n, members.shape[0])

    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    gen_index = np.empty((len(inverse_maps), members.shape[0]), dtype=np.int64)
    for g, inv in enumerate(inverse_maps):
        target = _encode(members[:, inv], size)
        gen_index[g] = order[np.searchsorted(sorted_keys, target)]
    return ReachableClass(n, members, keys, gen_index, lehmer, order)


@dataclass
class LawVector:
    """Закон X_t на достижимом классе; в рациональном режиме: числители и общий знаменатель."""
    cls: ReachableClass
    probs: np.ndarray
    numerators: Optional[np.ndarray] = None
    denominator: int = 1

    def distribution(self) -> Distribution:
        return Distribution(self.probs / self.probs.sum())

    def tv_to_uniform(self) -> float:
        return tv(self.distribution(), uniform(self.cls.size))

    def entropy(self) -> float:
        return ent(self.distribution())


def _initial_law(cls: ReachableClass) -> np.ndarray:
    law = np.zeros(cls.size)
    law[0] = 1.0
    return law


def _step_float(cls: ReachableClass, law: np.ndarray) -> np.ndarray:
    w = 1.0 / (8 * cls.n)
    new = 0.5 * law
    for idx in cls.gen_index:
        new[idx] += w * law
    return new


def exact_evolve(cls: ReachableClass, t: int, rational: bool = False) -> LawVector:
    """
    Точная эволюция закона за t шагов: Hold ½ и каждый поворот 1/(8n).

    В рациональном режиме веса целые над знаменателем (8n)^t.
    """
    if t < 0:
        raise DomainError(f"Число шагов должно быть ≥ 0, получено {t}")
    if rational:
        nums = np.zeros(cls.size, dtype=object)
        nums[:] = 0
        nums[0] = 1
        for _ in range(t):
            new = nums * (4 * cls.n)
            for idx in cls.gen_index:
                new[idx] += nums
            nums = new
        denominator = (8 * cls.n) ** t
        probs = np.array([int(v) / denominator for v in nums])
        return LawVector(cls, probs, nums, denominator)
    law = _initial_law(cls)
    for _ in range(t):
        law = _step_float(cls, law)
    return LawVector(cls, law)


def exact_law_curve(cls: ReachableClass, t_max: int) -> List[Tuple[int, float, float]]:
    """Строки (t, tv, ent) для t = 0..t_max."""
    law = _initial_law(cls)
    rows = []
    for t in range(t_max + 1):
        vec = LawVector(cls, law)
        rows.append((t, vec.tv_to_uniform(), vec.entropy()))
        law = _step_float(cls, law)
    return rows


def exact_mixing_time(cls: ReachableClass, max_steps: int = 100_000) -> int:
    """Первое t с tv(law_t, U) ≤ ¼."""
    law = _initial_law(cls)
    for t in range(max_steps + 1):
        if LawVector(cls, law).tv_to_uniform() <= MIXING_THRESHOLD:
            return t
        law = _step_float(cls, law)
    raise ResourceError(f"Порог ¼ не достигнут за {max_steps} шагов")


def tile_triple_probability(law: LawVector, tiles: Sequence[int], targets: Sequence[int]) -> float:
    """Точная вероятность того, что тайлы tiles стоят в позициях targets."""
    hit = np.ones(law.cls.size, dtype=bool)
    for tile, pos in zip(tiles, targets):
        hit &= law.cls.members[:, pos] == tile
    return float(law.probs[hit].sum())


def two_step_equivalence(n: int, gamma_probability: Fraction = Fraction(1, 2)) -> Fraction:
    """
    Точная максимальная разница законов обычного двухшагового шага и
    3-Monte шага (r затем c, затем 3-цикл с вероятностью gamma_probability).

    Возвращает 0 ровно тогда, когда законы совпадают.

    Raises:
        ResourceError: Если n > 3.
    """
    if n > 3:
        raise ResourceError(f"Перебор эквивалентности возможен при n ≤ 3, получено {n}")
    size = n * n
    identity_map = np.arange(size)
    maps: List[Tuple[Optional[Axis], object, np.ndarray]] = [(None, None, identity_map)] * (4 * n)
    maps = maps + [(move.axis, move, move_permutation(move, n)) for move in rotations(n)]
    # порядок кодов совпадает с Move.from_code: сначала 4n Hold, затем строки, затем столбцы
    weight = Fraction(1, (8 * n) ** 2)
    plain: Dict[Tuple[int, ...], Fraction] = {}
    monte: Dict[Tuple[int, ...], Fraction] = {}

    def add(book: Dict[Tuple[int, ...], Fraction], pos: np.ndarray, w: Fraction) -> None:
        key = tuple(int(v) for v in pos)
        book[key] = book.get(key, Fraction(0)) + w

    for (ax1, m1, s1), (ax2, m2, s2) in itertools.product(maps, repeat=2):
        add(plain, s2[s1], weight)
        if {ax1, ax2} == {Axis.ROW, Axis.COL}:
            (r, sr), (c, sc) = ((m1, s1), (m2, s2)) if ax1 is Axis.ROW else ((m2, s2), (m1, s1))
            rc = sc[sr]
            middle, front, back = l_support(r, c, n)  # type: ignore[arg-type]
            delta = np.arange(size)
            delta[middle], delta[front], delta[back] = front, back, middle
            add(monte, rc, weight * (1 - gamma_probability))
            add(monte, delta[rc], weight * gamma_probability)
        else:
            add(monte, s2[s1], weight)
    keys = set(plain) | set(monte)
    return max(abs(plain.get(k, Fraction(0)) - monte.get(k, Fraction(0))) for k in keys)


def single_tile_evolve(n: int, t: int, start: int = 0) -> Distribution:
    """
    Точная эволюция одного тайла: стоит с вероятностью 1 − 1/(2n),
    к каждому из 4 соседей: 1/(8n). Позиции p = y*n + x.
    """
    if n < 2:
        raise DomainError(f"n должно быть ≥ 2, получено {n}")
    grid = point_mass(n * n, start).weights.reshape(n, n)
    for _ in range(t):
        grid = _single_tile_step(grid, n)
    return Distribution(grid.reshape(-1))


def _single_tile_step(grid: np.ndarray, n: int) -> np.ndarray:
    w = 1.0 / (8 * n)
    return ((1 - 1.0 / (2 * n)) * grid
            + w * (np.roll(grid, 1, axis=0) + np.roll(grid, -1, axis=0)
                   + np.roll(grid, 1, axis=1) + np.roll(grid, -1, axis=1)))


def single_tile_mixing(n: int, max_steps: int = 10_000_000) -> int:
    """Первое t, при котором закон одного тайла ближе ¼ к равномерному."""
    grid = point_mass(n * n, 0).weights.reshape(n, n)
    target = 1.0 / (n * n)
    for t in range(max_steps + 1):
        if 0.5 * float(np.abs(grid - target).sum()) <= MIXING_THRESHOLD:
            return t
        grid = _single_tile_step(grid, n)
    raise ResourceError(f"Порог ¼ не достигнут за {max_steps} шагов")


def _lazy_step(p: np.ndarray) -> np.ndarray:
    new = 0.5 * p
    new[1:] += 0.25 * p[:-1]
    new[:-1] += 0.25 * p[1:]
    return new


def lazy_walk_barrier_dp(r: int, K: int, N: int, x: int) -> np.ndarray:
    """
    P(Y_N = y, |Y_s| ≤ Kr для всех s ≤ N) для ленивого блуждания из x.

    Шаг ±1 с вероятностью ¼, 0 с вероятностью ½; масса, вышедшая за [−Kr, Kr], поглощается.

    Returns:
        np.ndarray: Вектор длины 2Kr+1, элемент i соответствует y = i − Kr.
    """
    if r < 1 or K < 1:
        raise DomainError(f"Требуется r ≥ 1 и K ≥ 1, получено r={r}, K={K}")
    if abs(x) > r or N < 0:
        raise DomainError(f"Требуется |x| ≤ r и N ≥ 0, получено x={x}, N={N}")
    bound = K * r
    p = np.zeros(2 * bound + 1)
    p[x + bound] = 1.0
    for _ in range(N):
        p = _lazy_step(p)
    return p


def barrier_constant(K: int = 2, rs: Iterable[int] = range(2, 9)) -> Tuple[float, Dict[int, float]]:
    """
    min r·P(Y_N = y, барьер соблюдён) по |x|, |y| ≤ r и r² ≤ N ≤ 3r².

    Returns:
        Tuple[float, Dict[int, float]]: Общий минимум и минимумы по каждому r.
    """
    per_r: Dict[int, float] = {}
    for r in rs:
        bound = K * r
        best = math.inf
        for x in range(-r, r + 1):
            p = lazy_walk_barrier_dp(r, K, 0, x)
            for N in range(1, 3 * r * r + 1):
                p = _lazy_step(p)
                if N >= r * r:
                    best = min(best, r * float(p[bound - r:bound + r + 1].min()))
        per_r[r] = best
    return min(per_r.values()), per_r


def displacement_dp(n: int, s: int, m: int) -> float:
    """
    Верхняя оценка P(max(|Y₁ˢ|, |Y₂ˢ|) > m) через точное ДП одной координаты
    (2s обычных шагов, ±1 с вероятностью 1/(8n)) и объединение по двум координатам.
    """
    if s < 0 or m < 0:
        raise DomainError(f"Требуется s ≥ 0 и m ≥ 0, получено s={s}, m={m}")
    if s == 0:
        return 0.0
    steps = 2 * s
    q = 1.0 / (8 * n)
    p = np.zeros(2 * steps + 1)
    p[steps] = 1.0
    for _ in range(steps):
        new = (1 - 2 * q) * p
        new[1:] += q * p[:-1]
        new[:-1] += q * p[1:]
        p = new
    offsets = np.abs(np.arange(-steps, steps + 1))
    tail = float(p[offsets > m].sum())
    return min(1.0, 2 * tail)


def knuth_choice_tree_law(n: int, starts: Sequence[Sequence[int]],
                          modified: bool) -> Dict[Tuple[int, ...], Fraction]:
    """
    Точный закон результата тасовки Кнута (или модифицированной) перебором
    всего дерева выборов при равновероятных стартах.
    """
    bounds = list(range(n, 2, -1)) if modified else [i + 1 for i in range(n - 1, 0, -1)]
    branches = math.prod(bounds) * len(starts)
    law: Dict[Tuple[int, ...], Fraction] = {}
    for start in starts:
        for picks in itertools.product(*(range(b) for b in bounds)):
            stream = ScriptedStream(picks=picks)
            deck = (modified_knuth_shuffle(n, start, stream) if modified
                    else knuth_shuffle(n, stream))
            law[deck] = law.get(deck, Fraction(0)) + Fraction(1, branches)
    return law


def parse_fixtures(text: str) -> Dict[str, Union[int, float]]:
    """
    Разбирает строки 'имя = значение'; '#' начинает комментарий.

    Raises:
        DomainError: Если версия файла не поддерживается.
    """
    values: Dict[str, Union[int, float]] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, _, value = (part.strip() for part in line.partition("="))
        values[name] = int(value) if value.lstrip("-").isdigit() else float(value)
    if values.get("version") != FIXTURES_VERSION:
        raise DomainError(f"Неподдерживаемая версия файла регрессий: {values.get('version')}")
    return values


async def load_fixtures(path: Union[str, Path, None] = None) -> Dict[str, Union[int, float]]:
    """Читает версионированный текстовый файл регрессионных значений."""
    source = Path(path or FIXTURES_PATH)
    try:
        async with aiofiles.open(source, mode='r', encoding='utf-8') as f:
            content = await f.read()
    except IOError as err:
        logger.error("Не удалось прочитать файл регрессий %s: %s", source, err)
        raise
    return parse_fixtures(content)


def render_fixtures(values: Dict[str, Union[int, float]]) -> str:
    lines = ["# torus-lab regression values", f"version = {FIXTURES_VERSION}"]
    for name in sorted(k for k in values if k != "version"):
        value = values[name]
        lines.append(f"{name} = {value!r}" if isinstance(value, float) else f"{name} = {value}")
    return "\n".join(lines) + "\n"


async def write_fixtures(path: Union[str, Path, None], values: Dict[str, Union[int, float]]) -> Path:
    """Перезаписывает файл регрессионных значений (команды с флагом --freeze)."""
    target = Path(path or FIXTURES_PATH)
    target.parent.mkdir(parents=True, exist_ok=True)
    async with aiofiles.open(target, mode='w', encoding='utf-8') as f:
        await f.write(render_fixtures(values))
    logger.info("Файл регрессий обновлён: %s", target)
    return target
