"""
Модуль сэмплирования ленивой торической тасовки.

Содержит потоки случайных чисел с ключом (seed, index), одношаговые и
двухшаговые (3-Monte) цепочки, извлечение сопоставлений (matching),
эталонные тасовки Кнута и векторизованные движки для пакетов испытаний.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np  # type: ignore

from .exceptions import DomainError, InvariantViolation
from .grid_core import (Axis, GridPerm, Move, MoveTable, apply_move, l_support,
                        move_permutation)

logger = logging.getLogger(__name__)

Triple = Tuple[int, int, int]


class ShuffleStream:
    """
    Детерминированный поток случайных чисел одного испытания.

    Ключ (seed, index) через numpy SeedSequence порождает независимые
    подпотоки Philox для ходов, монет, выборов Кнута и приращений.
    Одинаковый ключ воспроизводит одинаковую траекторию.
    """
    BLOCK = 4096

    def __init__(self, seed: int, index: int = 0):
        if seed < 0 or index < 0:
            raise DomainError(f"seed и index должны быть неотрицательными: {seed}, {index}")
        self.seed = seed
        self.index = index
        root = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
        moves, coins, picks, aux = root.spawn(4)
        self.moves_rng = np.random.Generator(np.random.Philox(moves))
        self.coins_rng = np.random.Generator(np.random.Philox(coins))
        self.picks_rng = np.random.Generator(np.random.Philox(picks))
        self.aux_rng = np.random.Generator(np.random.Philox(aux))
        self._move_n = 0
        self._move_buf: List[int] = []
        self._coin_buf: List[int] = []

    def next_move_code(self, n: int) -> int:
        if n != self._move_n or not self._move_buf:
            if n != self._move_n:
                self._move_n = n
            self._move_buf = self.moves_rng.integers(0, 8 * n, size=self.BLOCK).tolist()[::-1]
        return self._move_buf.pop()

    def next_coin(self) -> int:
        if not self._coin_buf:
            self._coin_buf = self.coins_rng.integers(0, 2, size=self.BLOCK).tolist()[::-1]
        return self._coin_buf.pop()

    def next_below(self, bound: int) -> int:
        """Равномерное целое из 0..bound-1."""
        return int(self.picks_rng.integers(0, bound))


class ScriptedStream(ShuffleStream):
    """
    Поток с заранее заданными ходами, монетами и выборами.

    Args:
        moves: Ходы (Move или код хода) в порядке выдачи.
        coins: Исходы Бернулли для 3-циклов.
        picks: Значения next_below.
    """

    def __init__(self, moves: Iterable[Union[Move, int]] = (), coins: Iterable[int] = (),
                 picks: Iterable[int] = ()):
        super().__init__(0, 0)
        self._moves = list(moves)[::-1]
        self._coins = list(coins)[::-1]
        self._picks = list(picks)[::-1]

    def next_move_code(self, n: int) -> int:
        if not self._moves:
            raise InvariantViolation("Сценарий ходов исчерпан")
        move = self._moves.pop()
        return move.code(n) if isinstance(move, Move) else int(move)

    def next_coin(self) -> int:
        if not self._coins:
            raise InvariantViolation("Сценарий монет исчерпан")
        return self._coins.pop()

    def next_below(self, bound: int) -> int:
        if not self._picks:
            raise InvariantViolation("Сценарий выборов исчерпан")
        value = self._picks.pop()
        if not 0 <= value < bound:
            raise DomainError(f"Выбор {value} вне диапазона 0..{bound - 1}")
        return value


@dataclass(frozen=True)
class CollisionEvent:
    """
    Зафиксированная 3-коллизия двухшаговой цепочки.

    triple: позиции (middle, front, back): содержимое middle уходит в front,
    front в back, back в middle (если outcome = 1).
    tiles: тайлы в этих позициях в момент события.
    """
    time: int
    triple: Triple
    outcome: int
    tiles: Triple

    def partners(self, tile: int) -> Tuple[int, int]:
        """Передний и задний партнёры тайла в циклическом порядке события."""
        role = self.tiles.index(tile)
        return self.tiles[(role + 1) % 3], self.tiles[(role + 2) % 3]


@dataclass(frozen=True)
class MatchOutcome:
    """
    Результат сопоставления фокусной тройки (x, y, z) в окне {T, …, t}.

    Без сопоставления m1 = m2 = x.
    """
    focus: Triple
    T: int
    t_xyz: Optional[int]
    m1: int
    m2: int
    nicely: bool = False

    @property
    def matched(self) -> bool:
        return self.m1 != self.focus[0]


def sample_move(n: int, stream: ShuffleStream) -> Move:
    """Hold с вероятностью ½, каждый из 4n поворотов с вероятностью 1/(8n)."""
    if n < 2:
        raise DomainError(f"n должно быть ≥ 2, получено {n}")
    return Move.from_code(stream.next_move_code(n), n)


def run_chain(start: GridPerm, t: int, stream: ShuffleStream) -> GridPerm:
    """
    Применяет t сэмплированных ходов слева направо.

    Args:
        start (GridPerm): Начальное состояние.
        t (int): Число шагов.
        stream (ShuffleStream): Поток испытания.

    Returns:
        GridPerm: Состояние после t шагов.
    """
    if t < 0:
        raise DomainError(f"Число шагов должно быть ≥ 0, получено {t}")
    n = start.n
    pos = start.pos_of.copy()
    for _ in range(t):
        move = sample_move(n, stream)
        if not move.is_hold:
            pos = move_permutation(move, n)[pos]
    return GridPerm.from_positions(n, pos)


def apply_cycle(p: GridPerm, triple: Triple) -> GridPerm:
    middle, front, back = triple
    tile_at = p.tile_at.copy()
    tile_at[front] = p.tile_at[middle]
    tile_at[back] = p.tile_at[front]
    tile_at[middle] = p.tile_at[back]
    return GridPerm(p.n, tile_at)


def two_step_3monte(state: GridPerm, stream: ShuffleStream,
                    time: int = 0) -> Tuple[GridPerm, Optional[CollisionEvent]]:
    """
    Один шаг двухшаговой 3-Monte цепочки.

    Сэмплирует два хода. Если это строка и столбец (в любом порядке),
    применяет сначала строку r, затем столбец c, и с вероятностью ½
    3-цикл, превращающий rc в cr; событие фиксируется независимо от исхода.
    Иначе ходы применяются как есть.

    Returns:
        Tuple[GridPerm, Optional[CollisionEvent]]: Новое состояние и событие (если было).
    """
    n = state.n
    first = sample_move(n, stream)
    second = sample_move(n, stream)
    axes = {first.axis, second.axis}
    if first.is_hold or second.is_hold or axes != {Axis.ROW, Axis.COL}:
        return apply_move(apply_move(state, first), second), None
    r, c = (first, second) if first.axis is Axis.ROW else (second, first)
    after = apply_move(apply_move(state, r), c)
    triple = l_support(r, c, n)
    tiles = tuple(int(after.tile_at[pos]) for pos in triple)
    outcome = stream.next_coin()
    if outcome:
        after = apply_cycle(after, triple)
    return after, CollisionEvent(time, triple, outcome, tiles)  # type: ignore[arg-type]


def trace_matching(n: int, focus: Triple, T: int, t: int, stream: ShuffleStream,
                   start: Optional[GridPerm] = None) -> MatchOutcome:
    """
    Прогоняет двухшаговую 3-Monte цепочку до времени t и применяет правило сопоставления.

    Первое событие в окне {T, …, t}, затрагивающее x, y или z, даёт m1 = y, m2 = z
    только если оно циклически переводит x → y → z (x на месте y, y на месте z).

    Raises:
        DomainError: При совпадающих тайлах или T < 1.
    """
    x, y, z = focus
    if len({x, y, z}) != 3:
        raise DomainError(f"Фокусные тайлы должны различаться: {focus}")
    if T < 1:
        raise DomainError(f"Начало окна должно быть ≥ 1, получено {T}")
    unmatched = MatchOutcome(focus, T, None, x, x)
    if t < T:
        return unmatched
    state = start.copy() if start is not None else GridPerm(n, np.arange(n * n))
    for step in range(1, t + 1):
        state, event = two_step_3monte(state, stream, time=step)
        if event is None or step < T:
            continue
        touched = set(event.tiles) & {x, y, z}
        if not touched:
            continue
        if x in event.tiles and event.partners(x) == (y, z):
            logger.debug("Тройка %s сопоставлена в момент %d", focus, step)
            return MatchOutcome(focus, T, step, y, z, nicely=event.tiles[0] == x)
        return MatchOutcome(focus, T, step, x, x)
    return unmatched


def knuth_shuffle(n: int, stream: ShuffleStream) -> Tuple[int, ...]:
    """Тасовка Фишера–Йетса; deck[p]: карта в позиции p+1."""
    if n < 1:
        raise DomainError(f"n должно быть ≥ 1, получено {n}")
    deck = list(range(1, n + 1))
    for i in range(n - 1, 0, -1):
        j = stream.next_below(i + 1)
        deck[i], deck[j] = deck[j], deck[i]
    return tuple(deck)


def modified_knuth_shuffle(n: int, start: Sequence[int], stream: ShuffleStream) -> Tuple[int, ...]:
    """
    Модифицированная тасовка Кнута на 3-циклах.

    Для i = n…3 выбирается j ∈ {1…i}; при j ≠ i карта из j переходит в i
    3-циклом по позициям (j, i, a), где a: наименьшая из {1,2,3}∖{i,j}.
    Результат отличается от start чётной перестановкой.
    """
    if n < 3:
        raise DomainError(f"Модифицированная тасовка требует n ≥ 3, получено {n}")
    if sorted(start) != list(range(1, n + 1)):
        raise DomainError(f"start не является перестановкой 1..{n}: {start}")
    deck = [0] + list(start)
    for i in range(n, 2, -1):
        j = stream.next_below(i) + 1
        if j == i:
            continue
        a = min({1, 2, 3} - {i, j})
        deck[i], deck[a], deck[j] = deck[j], deck[i], deck[a]
    return tuple(deck[1:])


def l_collision_probability(n: int, middle: int, front: int, back: int) -> Fraction:
    """
    Точная вероятность того, что за один двухшаговый шаг произойдёт коллизия
    данной L-конфигурации (middle: угол L). Перебираются все (8n)² пар ходов.
    """
    table = MoveTable(n)
    target = {middle, front, back}
    hits = 0
    for c1 in range(8 * n):
        for c2 in range(8 * n):
            a1, a2 = table.axis_of_code[c1], table.axis_of_code[c2]
            if {int(a1), int(a2)} != {1, 2}:
                continue
            rc, cc = (c1, c2) if a1 == 1 else (c2, c1)
            triple = table.cycles[rc - 4 * n, cc - 6 * n]
            if int(triple[0]) == middle and set(triple.tolist()) == target:
                hits += 1
    return Fraction(hits, (8 * n) ** 2)


def trial_streams(seed: int, first_trial: int, size: int) -> List[ShuffleStream]:
    """Потоки испытаний first_trial … first_trial+size-1, ключ (seed, trial)."""
    return [ShuffleStream(seed, trial) for trial in range(first_trial, first_trial + size)]


def stack_draws(rngs: Sequence[np.random.Generator], high: int,
                shape: Union[int, Tuple[int, ...]]) -> np.ndarray:
    """
    Равномерные целые 0..high-1 формы (batch, *shape).

    Строка b целиком берётся из rngs[b], поэтому значения испытания не
    зависят от того, в какой пакет оно попало.
    """
    return np.stack([rng.integers(0, high, size=shape) for rng in rngs])


def decode_codes(codes: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Векторно раскладывает коды ходов на (hold, is_row, index, direction)."""
    hold = codes < 4 * n
    r = codes - 4 * n
    is_row = (~hold) & (r < 2 * n)
    rest = np.mod(r, 2 * n)
    index = rest // 2
    direction = 1 - 2 * (rest % 2)
    return hold, is_row, index, direction


class TileTracker:
    """
    Векторизованное отслеживание нескольких тайлов в пакете испытаний
    обычной ленивой торической тасовки.

    positions имеет форму (batch, k, 2): столбцы: x и y.
    """

    def __init__(self, n: int, starts: Sequence[Tuple[int, int]], batch: int):
        if batch < 1:
            raise DomainError(f"Размер пакета должен быть ≥ 1, получено {batch}")
        self.n = n
        self.positions = np.tile(np.asarray(starts, dtype=np.int64)[None, :, :], (batch, 1, 1))

    def step(self, codes: np.ndarray) -> None:
        n = self.n
        hold, is_row, index, direction = decode_codes(codes, n)
        is_col = (~hold) & (~is_row)
        xs = self.positions[:, :, 0]
        ys = self.positions[:, :, 1]
        on_row = is_row[:, None] & (ys == index[:, None])
        on_col = is_col[:, None] & (xs == index[:, None])
        shift = direction[:, None]
        self.positions[:, :, 0] = np.where(on_row, np.mod(xs + shift, n), xs)
        self.positions[:, :, 1] = np.where(on_col, np.mod(ys + shift, n), ys)

    def run(self, codes: np.ndarray) -> np.ndarray:
        """Применяет коды формы (batch, steps) по столбцам."""
        if codes.shape[0] != self.positions.shape[0]:
            raise DomainError(f"Коды для {codes.shape[0]} испытаний, пакет {self.positions.shape[0]}")
        for s in range(codes.shape[1]):
            self.step(codes[:, s])
        return self.positions


class TwoStepBatch:
    """
    Векторизованная двухшаговая 3-Monte цепочка по полным перестановкам.

    tile_at имеет форму (batch, n²). Правило совпадает с two_step_3monte:
    пара (строка, столбец) применяется как r затем c, после чего с
    вероятностью ½ выполняется 3-цикл из MoveTable.cycles.
    """

    def __init__(self, n: int, batch: int, table: Optional[MoveTable] = None):
        self.n = n
        self.table = table or MoveTable(n)
        self.tile_at = np.tile(np.arange(n * n, dtype=np.intp), (batch, 1))
        self._rows = np.arange(batch)

    def _apply(self, codes: np.ndarray) -> None:
        self.tile_at = np.take_along_axis(self.tile_at, self.table.inverse_maps[codes], axis=1)

    def step(self, codes1: np.ndarray, codes2: np.ndarray,
             coins: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Выполняет один двухшаговый шаг для всех испытаний.

        Returns:
            Tuple[np.ndarray, np.ndarray]: маска событий (batch,) и тайлы
            (middle, front, back) в момент события (batch, 3); для испытаний
            без события строки заполнены -1.
        """
        n = self.n
        axis1 = self.table.axis_of_code[codes1]
        axis2 = self.table.axis_of_code[codes2]
        event = ((axis1 == 1) & (axis2 == 2)) | ((axis1 == 2) & (axis2 == 1))
        swap = event & (axis1 == 2)
        first = np.where(swap, codes2, codes1)
        second = np.where(swap, codes1, codes2)
        self._apply(first)
        self._apply(second)
        occupants = np.full((codes1.shape[0], 3), -1, dtype=np.intp)
        rows = np.flatnonzero(event)
        if rows.size:
            triples = self.table.cycles[first[rows] - 4 * n, second[rows] - 6 * n]
            occ = np.take_along_axis(self.tile_at[rows], triples, axis=1)
            occupants[rows] = occ
            fire = coins[rows] == 1
            if np.any(fire):
                fr = rows[fire]
                tr = triples[fire]
                oc = occ[fire]
                self.tile_at[fr, tr[:, 1]] = oc[:, 0]
                self.tile_at[fr, tr[:, 2]] = oc[:, 1]
                self.tile_at[fr, tr[:, 0]] = oc[:, 2]
        return event, occupants


class MatchBook:
    """
    Учёт первых касаний в окне и сопоставлений фокусных тайлов для пакета.

    Тайл x сопоставлен с (y, z), если первое событие окна, затрагивающее x,
    циклически переводит x → y → z, и y, z до этого в окне не затрагивались.
    """

    def __init__(self, batch: int, size: int, focus: Sequence[int]):
        self.first_touch = np.full((batch, size), -1, dtype=np.int64)
        self.focus = list(focus)
        k = len(self.focus)
        self.time = np.full((batch, k), -1, dtype=np.int64)
        self.front = np.full((batch, k), -1, dtype=np.int64)
        self.back = np.full((batch, k), -1, dtype=np.int64)
        self.middle = np.zeros((batch, k), dtype=bool)

    def record(self, step: int, active: np.ndarray, event: np.ndarray, occupants: np.ndarray) -> None:
        rows = np.flatnonzero(event & active)
        if not rows.size:
            return
        occ = occupants[rows]
        for slot, x in enumerate(self.focus):
            role_hit = occ == x
            hit = role_hit.any(axis=1) & (self.time[rows, slot] < 0)
            if not np.any(hit):
                continue
            hr = rows[hit]
            role = np.argmax(role_hit[hit], axis=1)
            ho = occ[hit]
            idx = np.arange(hr.size)
            self.time[hr, slot] = step
            self.front[hr, slot] = ho[idx, (role + 1) % 3]
            self.back[hr, slot] = ho[idx, (role + 2) % 3]
            self.middle[hr, slot] = role == 0
        for role in range(3):
            tiles = occ[:, role]
            fresh = self.first_touch[rows, tiles] < 0
            self.first_touch[rows[fresh], tiles[fresh]] = step

    def matched(self) -> np.ndarray:
        """Маска (batch, k) сопоставленных фокусных тайлов."""
        batch = self.first_touch.shape[0]
        rows = np.arange(batch)[:, None]
        front = np.maximum(self.front, 0)
        back = np.maximum(self.back, 0)
        return ((self.time >= 0)
                & (self.first_touch[rows, front] == self.time)
                & (self.first_touch[rows, back] == self.time))
