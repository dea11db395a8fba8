"""
Модуль точной алгебры перестановок на торе n×n.

Содержит координаты, разметку клеток, ходы торической тасовки,
композицию, чётность и коммутатор строки и столбца.

Соглашения:
    - позиция p = y*n + x, x растёт на восток, y на север;
    - тайл t изначально стоит в позиции t;
    - Row +1 сдвигает тайлы строки на восток, Col +1 сдвигает тайлы столбца на север;
    - compose(p, q) применяет сначала p, затем q.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from math import isqrt
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np  # type: ignore

from .exceptions import DomainError

logger = logging.getLogger(__name__)


class MoveKind(str, Enum):
    HOLD = "hold"
    ROTATE = "rotate"


class Axis(str, Enum):
    ROW = "row"
    COL = "col"


@dataclass(frozen=True)
class Coord:
    """Клетка тора: x: столбец (восток), y: строка (север)."""
    x: int
    y: int

    def check(self, n: int) -> "Coord":
        if not (0 <= self.x < n and 0 <= self.y < n):
            raise DomainError(f"Координата ({self.x}, {self.y}) вне решётки {n}x{n}")
        return self


@dataclass(frozen=True)
class Move:
    """
    Один генератор торической тасовки.

    Hold не несёт оси, индекса и направления; Rotate сдвигает
    строку или столбец `index` на одну клетку в направлении `direction`.
    """
    kind: MoveKind
    axis: Optional[Axis] = None
    index: int = 0
    direction: int = 1

    @classmethod
    def hold(cls) -> "Move":
        return cls(MoveKind.HOLD)

    @classmethod
    def row(cls, index: int, direction: int = 1) -> "Move":
        return cls(MoveKind.ROTATE, Axis.ROW, index, direction)

    @classmethod
    def col(cls, index: int, direction: int = 1) -> "Move":
        return cls(MoveKind.ROTATE, Axis.COL, index, direction)

    @property
    def is_hold(self) -> bool:
        return self.kind is MoveKind.HOLD

    def validate(self, n: int) -> "Move":
        if self.is_hold:
            if self.axis is not None:
                raise DomainError("Hold не может иметь ось")
            return self
        if self.axis is None or not 0 <= self.index < n or self.direction not in (1, -1):
            raise DomainError(f"Некорректный ход {self} для n={n}")
        return self

    def inverse(self) -> "Move":
        if self.is_hold:
            return self
        return Move(self.kind, self.axis, self.index, -self.direction)

    def code(self, n: int) -> int:
        """Код хода в диапазоне 4n..8n-1 (Hold кодируется нулём)."""
        if self.is_hold:
            return 0
        rest = 2 * self.index + (0 if self.direction == 1 else 1)
        return 4 * n + (rest if self.axis is Axis.ROW else 2 * n + rest)

    @classmethod
    def from_code(cls, code: int, n: int) -> "Move":
        """
        Декодирует ход из кода 0..8n-1.

        Коды < 4n означают Hold (вероятность ½ при равномерном коде),
        остальные: 4n поворотов по 1/(8n) каждый.
        """
        if not 0 <= code < 8 * n:
            raise DomainError(f"Код хода {code} вне диапазона 0..{8 * n - 1}")
        if code < 4 * n:
            return cls.hold()
        r = code - 4 * n
        axis = Axis.ROW if r < 2 * n else Axis.COL
        rest = r % (2 * n)
        return cls(MoveKind.ROTATE, axis, rest // 2, 1 if rest % 2 == 0 else -1)


def pos_index(c: Coord, n: int) -> int:
    c.check(n)
    return c.y * n + c.x


def coord_of(pos: int, n: int) -> Coord:
    if not 0 <= pos < n * n:
        raise DomainError(f"Позиция {pos} вне диапазона 0..{n * n - 1}")
    return Coord(pos % n, pos // n)


def same_line(a: Coord, b: Coord) -> bool:
    return a.x == b.x or a.y == b.y


def label_of(c: Coord, n: int) -> int:
    """
    Метка клетки по схеме оболочек: оболочка m = max(x, y) проходится
    от (0, m) вправо до (m, m), затем вниз до (m, 0).

    Args:
        c (Coord): Клетка.
        n (int): Сторона тора.

    Returns:
        int: Метка в диапазоне 1..n².

    Raises:
        DomainError: Если координата вне решётки.
    """
    c.check(n)
    m = max(c.x, c.y)
    if c.y == m:
        return m * m + 1 + c.x
    return m * m + 2 * m + 1 - c.y


def to_coord(label: int, n: int) -> Coord:
    if not 1 <= label <= n * n:
        raise DomainError(f"Метка {label} вне диапазона 1..{n * n}")
    m = isqrt(label - 1)
    off = label - m * m - 1
    if off <= m:
        return Coord(off, m)
    return Coord(m, 2 * m - off)


def shell_labels(k: int, n: int) -> range:
    """
    Интервал меток I_k = {ℓ_{k-1}²+1, …, ℓ_k²}, где ℓ_k = min(2^{k-1}, n), ℓ_0 = 0.
    """
    if k < 1:
        raise DomainError(f"Номер оболочки должен быть ≥ 1, получено {k}")
    lk = min(2 ** (k - 1), n)
    lprev = 0 if k == 1 else min(2 ** (k - 2), n)
    return range(lprev * lprev + 1, lk * lk + 1)


class Labeling:
    """
    Биекция клеток и меток 1..n² с кэшированными таблицами.

    Для любого ℓ ≤ n клетки с max(x, y) < ℓ несут ровно метки 1..ℓ².
    """

    def __init__(self, n: int):
        if n < 1:
            raise DomainError(f"n должно быть ≥ 1, получено {n}")
        self.n = n
        self.label_at = np.array([label_of(coord_of(p, n), n) for p in range(n * n)], dtype=np.int64)
        self.pos_of_label = np.zeros(n * n + 1, dtype=np.int64)
        self.pos_of_label[self.label_at] = np.arange(n * n)

    def to_label(self, c: Coord) -> int:
        return int(self.label_at[pos_index(c, self.n)])

    def to_coord(self, label: int) -> Coord:
        if not 1 <= label <= self.n * self.n:
            raise DomainError(f"Метка {label} вне диапазона 1..{self.n * self.n}")
        return coord_of(int(self.pos_of_label[label]), self.n)

    def tile_of_label(self, label: int) -> int:
        """Тайл, изначально стоящий в клетке с данной меткой."""
        return pos_index(self.to_coord(label), self.n)

    def in_box(self, label: int, l: int) -> bool:
        return 1 <= label <= l * l


class GridPerm:
    """
    Перестановка n² тайлов на торе с двумя согласованными представлениями.

    tile_at[p]: тайл в позиции p; pos_of[t]: позиция тайла t.
    """
    __slots__ = ("n", "tile_at", "pos_of")

    def __init__(self, n: int, tile_at: Sequence[int], pos_of: Optional[Sequence[int]] = None):
        if n < 2:
            raise DomainError(f"Сторона тора должна быть ≥ 2, получено {n}")
        self.n = n
        self.tile_at = np.asarray(tile_at, dtype=np.intp).copy()
        if self.tile_at.shape != (n * n,):
            raise DomainError(f"tile_at должен иметь длину {n * n}")
        if pos_of is None:
            self.pos_of = np.empty_like(self.tile_at)
            self.pos_of[self.tile_at] = np.arange(n * n)
        else:
            self.pos_of = np.asarray(pos_of, dtype=np.intp).copy()

    @classmethod
    def from_positions(cls, n: int, pos_of: Sequence[int]) -> "GridPerm":
        pos = np.asarray(pos_of, dtype=np.intp)
        tile_at = np.empty_like(pos)
        tile_at[pos] = np.arange(n * n)
        return cls(n, tile_at, pos)

    @classmethod
    def from_rows(cls, rows_top_down: Sequence[Sequence[int]], base: int = 1) -> "GridPerm":
        """Строит состояние по строкам, записанным сверху вниз (как на рисунках)."""
        n = len(rows_top_down)
        tile_at = [0] * (n * n)
        for i, row in enumerate(rows_top_down):
            y = n - 1 - i
            for x, value in enumerate(row):
                tile_at[y * n + x] = value - base
        return cls(n, tile_at)

    def rows_top_down(self, base: int = 1) -> List[List[int]]:
        n = self.n
        return [[int(self.tile_at[y * n + x]) + base for x in range(n)] for y in range(n - 1, -1, -1)]

    def key(self) -> Tuple[int, ...]:
        return tuple(int(v) for v in self.tile_at)

    def copy(self) -> "GridPerm":
        return GridPerm(self.n, self.tile_at, self.pos_of)

    def is_consistent(self) -> bool:
        size = self.n * self.n
        if sorted(self.tile_at.tolist()) != list(range(size)):
            return False
        return bool(np.array_equal(self.pos_of[self.tile_at], np.arange(size)))

    def support(self) -> List[int]:
        """Позиции, содержимое которых отличается от тождественной расстановки."""
        return np.flatnonzero(self.tile_at != np.arange(self.n * self.n)).tolist()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridPerm):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self.tile_at, other.tile_at))

    def __hash__(self) -> int:
        return hash((self.n, self.key()))

    def __repr__(self) -> str:
        return f"GridPerm(n={self.n}, tile_at={self.tile_at.tolist()})"


def identity(n: int) -> GridPerm:
    return GridPerm(n, np.arange(n * n))


@lru_cache(maxsize=None)
def _move_map(kind: MoveKind, axis: Optional[Axis], index: int, direction: int, n: int) -> np.ndarray:
    sigma = np.arange(n * n, dtype=np.intp)
    if kind is MoveKind.HOLD:
        return sigma
    for k in range(n):
        if axis is Axis.ROW:
            sigma[index * n + k] = index * n + (k + direction) % n
        else:
            sigma[k * n + index] = ((k + direction) % n) * n + index
    sigma.setflags(write=False)
    return sigma


def move_permutation(m: Move, n: int) -> np.ndarray:
    """Отображение позиций хода: содержимое позиции p переходит в sigma[p]."""
    m.validate(n)
    return _move_map(m.kind, m.axis, m.index, m.direction, n)


def apply_move(p: GridPerm, m: Move) -> GridPerm:
    """
    Применяет ход к состоянию.

    Hold возвращает копию; Rotate сдвигает все тайлы линии циклически на одну клетку.
    """
    sigma = move_permutation(m, p.n)
    pos_of = sigma[p.pos_of]
    return GridPerm.from_positions(p.n, pos_of)


def move_as_perm(m: Move, n: int) -> GridPerm:
    return GridPerm.from_positions(n, move_permutation(m, n))


def compose(*perms: GridPerm) -> GridPerm:
    """
    Композиция слева направо: compose(p, q) применяет сначала p, затем q.

    Raises:
        DomainError: Если размеры не совпадают или список пуст.
    """
    if not perms:
        raise DomainError("compose требует хотя бы одну перестановку")
    n = perms[0].n
    pos_of = perms[0].pos_of
    for q in perms[1:]:
        if q.n != n:
            raise DomainError(f"Несовпадение размеров: {n} и {q.n}")
        pos_of = q.pos_of[pos_of]
    return GridPerm.from_positions(n, pos_of)


def invert(p: GridPerm) -> GridPerm:
    return GridPerm(p.n, p.pos_of, p.tile_at)


def sign(p: GridPerm) -> int:
    """Чётность перестановки методом подсчёта циклов."""
    size = p.n * p.n
    seen = np.zeros(size, dtype=bool)
    cycles = 0
    pos_of = p.pos_of
    for start in range(size):
        if seen[start]:
            continue
        cycles += 1
        j = start
        while not seen[j]:
            seen[j] = True
            j = pos_of[j]
    return 1 if (size - cycles) % 2 == 0 else -1


def _check_pair(r: Move, c: Move, n: int) -> None:
    if r.is_hold or c.is_hold:
        raise DomainError("Коммутатор определён только для поворотов (Hold недопустим)")
    r.validate(n)
    c.validate(n)
    if r.axis is not Axis.ROW or c.axis is not Axis.COL:
        raise DomainError("Ожидается пара (ход строки, ход столбца)")


def commutator_gamma(r: Move, c: Move, n: int) -> GridPerm:
    """
    Возвращает Γ = r⁻¹c⁻¹rc (слева направо).

    Γ: 3-цикл на клетках L-формы, средняя клетка которой: пересечение
    строки r и столбца c. Выполняется rc = cr·Γ.

    Raises:
        DomainError: Если передан Hold или ходы не из строки и столбца.
    """
    _check_pair(r, c, n)
    return compose(move_as_perm(r.inverse(), n), move_as_perm(c.inverse(), n),
                   move_as_perm(r, n), move_as_perm(c, n))


def l_support(r: Move, c: Move, n: int) -> Tuple[int, int, int]:
    """
    Тройка позиций (middle, front, back) 3-цикла Γ⁻¹: после r·c он даёт c·r.

    Содержимое middle уходит в front, front в back, back в middle.
    """
    gamma_inv = invert(commutator_gamma(r, c, n))
    middle = r.index * n + c.index
    front = int(gamma_inv.pos_of[middle])
    back = int(gamma_inv.pos_of[front])
    if front == middle or back == middle or int(gamma_inv.pos_of[back]) != middle:
        raise DomainError(f"Коммутатор {r}, {c} не является 3-циклом с центром в пересечении")
    return middle, front, back


def rotations(n: int) -> Iterable[Move]:
    for axis in (Axis.ROW, Axis.COL):
        for index in range(n):
            for direction in (1, -1):
                yield Move(MoveKind.ROTATE, axis, index, direction)


class MoveTable:
    """
    Предвычисленные отображения позиций для всех 8n кодов ходов и
    тройки 3-циклов Γ⁻¹ для всех пар (строка, столбец).

    Используется векторизованными движками, где ход задаётся целым кодом.
    """

    def __init__(self, n: int):
        self.n = n
        size = n * n
        self.maps = np.empty((8 * n, size), dtype=np.intp)
        self.inverse_maps = np.empty_like(self.maps)
        for code in range(8 * n):
            sigma = move_permutation(Move.from_code(code, n), n)
            self.maps[code] = sigma
            self.inverse_maps[code, sigma] = np.arange(size)
        # 0: Hold, 1: строка, 2: столбец
        self.axis_of_code = np.zeros(8 * n, dtype=np.int8)
        self.axis_of_code[4 * n:6 * n] = 1
        self.axis_of_code[6 * n:] = 2
        # индексы (row_code - 4n) x (col_code - 6n) -> (middle, front, back)
        self.cycles = np.empty((2 * n, 2 * n, 3), dtype=np.intp)
        for rc in range(2 * n):
            r = Move.from_code(4 * n + rc, n)
            for cc in range(2 * n):
                c = Move.from_code(6 * n + cc, n)
                self.cycles[rc, cc] = l_support(r, c, n)
        logger.debug("Таблица ходов построена для n=%d", n)
