"""
Модуль механики сцепления первой стадии.

Выбор мастер-тайлов, одновременная эволюция торической тасовки X,
"забывчивого" процесса Y и идеализированного процесса W для трёх фокусных
тайлов, счётчики интерференции и обхода тора, а также эмпирические проверки
мартингалов и вероятность попадания в стартовые коробки.
"""
import logging
import math
import time
from dataclasses import dataclass
from math import ceil, floor, isqrt
from typing import List, Optional, Sequence, Tuple

import numpy as np  # type: ignore

from .exceptions import DomainError, InvariantViolation
from .grid_core import Coord, GridPerm, coord_of, pos_index, same_line
from .report_models import CheckReport, EstimateReport
from .shuffle_engine import ShuffleStream, TileTracker, stack_draws, trial_streams
from .statistics import mean_report, wilson_report
from .trial_runner import BatchTask, TrialRunner, default_runner

logger = logging.getLogger(__name__)

# 0: восток, 1: запад, 2: север, 3: юг
DIRECTIONS = ((1, 0), (-1, 0), (0, 1), (0, -1))


@dataclass(frozen=True)
class TrajectoryStats:
    """
    Концы траекторий и счётчики одного сцепленного прогона.

    interference[f]: ходы фокусного тайла f, когда он не был мастер-тайлом;
    a_ki, a_kj, a_ji: шаги, на которых пара делит строку или столбец;
    a_k: шаги, на которых k делит линию с i или j;
    wrap_count: число эпох обхода тора для разности (i, k), включая последнюю;
    z_lift: поднятая на Z² разность X_k − Y_k (сумма расхождений шагов);
    divergence_unexplained: шаги, на которых разность X_k − Y_k на торе
    изменилась, хотя k не делил линию ни с i, ни с j.
    """
    steps: int
    x_end: Tuple[Coord, Coord, Coord]
    y_end: Tuple[Coord, Coord, Coord]
    w_end: Optional[Tuple[Coord, Coord, Coord]]
    idealized: bool
    interference: Tuple[int, int, int]
    a_ki: int
    a_kj: int
    a_ji: int
    a_k: int
    wrap_count: int
    escape_time: Optional[int]
    martingale_start: float
    martingale_stopped: float
    v1_start: float
    v1_stopped: float
    d1sq_increment: float
    drift_steps: int
    z_lift: Tuple[int, int]
    z_super: float
    divergence_unexplained: int


def _focus_master_flags(points: Sequence[Tuple[int, int]]) -> Tuple[bool, bool, bool]:
    i, j, k = points

    def shares(a: Tuple[int, int], b: Tuple[int, int]) -> bool:
        return a[0] == b[0] or a[1] == b[1]

    return True, not shares(j, i), not (shares(k, i) or shares(k, j))


def _completion(n: int, points: Sequence[Tuple[int, int]],
                flags: Sequence[bool]) -> List[Tuple[int, int]]:
    """Свободные строки по возрастанию получают наименьшие свободные столбцы."""
    used_rows = {p[1] for p, f in zip(points, flags) if f}
    used_cols = {p[0] for p, f in zip(points, flags) if f}
    free_rows = [r for r in range(n) if r not in used_rows]
    free_cols = [c for c in range(n) if c not in used_cols]
    return list(zip(free_cols, free_rows))


def select_master_tiles(p: GridPerm, focus: Sequence[int]) -> Tuple[int, ...]:
    """
    Выбирает n мастер-тайлов: по одному в каждой строке и столбце.

    i выбирается всегда; j: если не делит строку или столбец с i;
    k: если не делит их ни с i, ни с j. Остальные строки заполняются по
    возрастанию наименьшим свободным столбцом.

    Returns:
        Tuple[int, ...]: Мастер-тайлы, упорядоченные по строке.

    Raises:
        DomainError: Если фокусные тайлы совпадают.
    """
    if len(set(focus)) != 3:
        raise DomainError(f"Фокусные тайлы должны различаться: {focus}")
    n = p.n
    coords = [coord_of(int(p.pos_of[f]), n) for f in focus]
    points = [(c.x, c.y) for c in coords]
    flags = _focus_master_flags(points)
    cells = [pt for pt, f in zip(points, flags) if f] + _completion(n, points, flags)
    if sorted(x for x, _ in cells) != list(range(n)) or sorted(y for _, y in cells) != list(range(n)):
        raise InvariantViolation(f"Мастер-тайлы не образуют перестановочную матрицу: {cells}")
    cells.sort(key=lambda cell: cell[1])
    return tuple(int(p.tile_at[pos_index(Coord(x, y), n)]) for x, y in cells)


def _rep(value: int, n: int) -> int:
    return (value + n // 2) % n - n // 2


def run_coupled(n: int, t: int, focus: Sequence[int], stream: ShuffleStream) -> TrajectoryStats:
    """
    Один прогон торической тасовки через мастер-тайлы с общими
    последовательностями приращений.

    На каждом шаге (вне удержания) выбирается строка R, её мастер-тайл и
    направление: фокусный мастер-тайл следует своему следующему приращению,
    прочие: свежему равномерному направлению. Горизонтальный ход сдвигает
    строку R, вертикальный: столбец мастер-тайла. Y двигает фокусные тайлы
    в те же моменты, но всегда по их приращениям. W: начало плюс первые ℓ²
    приращений, если t = 2ℓ²n.

    Args:
        n (int): Сторона тора (≥ 4).
        t (int): Число шагов.
        focus (Sequence[int]): Тайлы (i, j, k); тайл f стартует в позиции f.
        stream (ShuffleStream): Поток испытания.

    Returns:
        TrajectoryStats: Концы и счётчики прогона.
    """
    if n < 4:
        raise DomainError(f"Сцепление требует n ≥ 4, получено {n}")
    if len(set(focus)) != 3:
        raise DomainError(f"Фокусные тайлы должны различаться: {focus}")
    if t < 0:
        raise DomainError(f"Число шагов должно быть ≥ 0, получено {t}")
    ell2 = t // (2 * n) if t > 0 and t % (2 * n) == 0 else 0
    idealized = ell2 > 0 and isqrt(ell2) ** 2 == ell2
    if not idealized:
        ell2 = 0
    depth = max(t, ell2) + 1
    lazy = stream.moves_rng.integers(0, 2, size=t).tolist()
    rows = stream.moves_rng.integers(0, n, size=t).tolist()
    fresh = stream.moves_rng.integers(0, 4, size=t).tolist()
    incr = stream.aux_rng.integers(0, 4, size=(3, depth)).tolist()

    start = [(f % n, f // n) for f in focus]
    X = [list(pt) for pt in start]
    Y = [list(pt) for pt in start]
    q = [0, 0, 0]
    interference = [0, 0, 0]
    a_ki = a_kj = a_ji = a_k = 0
    d1 = _rep(X[0][0] - X[2][0], n)
    d2 = _rep(X[0][1] - X[2][1], n)
    m_start = float(abs(d1) + abs(d2))
    v1_start = float(d1 * d1)
    escape_time: Optional[int] = None
    m_stop = v1_stop = 0.0
    wraps = 0
    d1sq_increment = 0.0
    drift_steps = 0
    divergence = 0
    gap = (0, 0)
    z_lift = [0, 0]

    for s in range(t):
        xi, xj, xk = X
        share_ki = xk[0] == xi[0] or xk[1] == xi[1]
        share_kj = xk[0] == xj[0] or xk[1] == xj[1]
        share_ji = xj[0] == xi[0] or xj[1] == xi[1]
        a_ki += share_ki
        a_kj += share_kj
        a_ji += share_ji
        a_k += share_ki or share_kj
        disp = [(0, 0), (0, 0), (0, 0)]
        if lazy[s]:
            flags = _focus_master_flags([tuple(xi), tuple(xj), tuple(xk)])
            R = rows[s]
            master = None
            for slot in range(3):
                if flags[slot] and X[slot][1] == R:
                    master = slot
                    break
            if master is not None:
                dx, dy = DIRECTIONS[incr[master][q[master]]]
                column = X[master][0]
            else:
                dx, dy = DIRECTIONS[fresh[s]]
                column = dict((y, x) for x, y in _completion(n, [tuple(p) for p in X], flags))[R]
            for f in range(3):
                if dy == 0 and X[f][1] == R:
                    disp[f] = (dx, 0)
                elif dx == 0 and X[f][0] == column:
                    disp[f] = (0, dy)
            for f in range(3):
                if disp[f] == (0, 0):
                    continue
                if f != master:
                    interference[f] += 1
                step = DIRECTIONS[incr[f][q[f]]]
                q[f] += 1
                if f == 2:
                    z_lift[0] += disp[f][0] - step[0]
                    z_lift[1] += disp[f][1] - step[1]
                Y[f][0] = (Y[f][0] + step[0]) % n
                Y[f][1] = (Y[f][1] + step[1]) % n
                X[f][0] = (X[f][0] + disp[f][0]) % n
                X[f][1] = (X[f][1] + disp[f][1]) % n
            new_gap = ((X[2][0] - Y[2][0]) % n, (X[2][1] - Y[2][1]) % n)
            if new_gap != gap and not (share_ki or share_kj):
                divergence += 1
            gap = new_gap

        new_d1 = d1 + disp[0][0] - disp[2][0]
        new_d2 = d2 + disp[0][1] - disp[2][1]
        if escape_time is None:
            d1sq_increment += new_d1 * new_d1 - d1 * d1
            drift_steps += 1
        d1, d2 = new_d1, new_d2
        if abs(d1) >= n or abs(d2) >= n:
            wraps += 1
            if escape_time is None:
                escape_time = s + 1
                m_stop = abs(d1) + abs(d2) - a_ki / (2 * n)
                v1_stop = d1 * d1 - escape_time / (2 * n)
            d1 = _rep(X[0][0] - X[2][0], n)
            d2 = _rep(X[0][1] - X[2][1], n)

    if escape_time is None:
        m_stop = abs(d1) + abs(d2) - a_ki / (2 * n)
        v1_stop = d1 * d1 - t / (2 * n)

    w_end = None
    if idealized:
        w_points = []
        for f in range(3):
            wx, wy = start[f]
            for s in range(ell2):
                ddx, ddy = DIRECTIONS[incr[f][s]]
                wx, wy = wx + ddx, wy + ddy
            w_points.append(Coord(wx % n, wy % n))
        w_end = tuple(w_points)

    return TrajectoryStats(
        steps=t,
        x_end=tuple(Coord(x, y) for x, y in X),  # type: ignore[arg-type]
        y_end=tuple(Coord(x, y) for x, y in Y),  # type: ignore[arg-type]
        w_end=w_end,  # type: ignore[arg-type]
        idealized=idealized,
        interference=tuple(interference),  # type: ignore[arg-type]
        a_ki=a_ki, a_kj=a_kj, a_ji=a_ji, a_k=a_k,
        wrap_count=wraps + 1,
        escape_time=escape_time,
        martingale_start=m_start,
        martingale_stopped=float(m_stop),
        v1_start=v1_start,
        v1_stopped=float(v1_stop),
        d1sq_increment=d1sq_increment,
        drift_steps=drift_steps,
        z_lift=(z_lift[0], z_lift[1]),
        z_super=float(z_lift[0] ** 2 + z_lift[1] ** 2 - 2 * interference[2]),
        divergence_unexplained=divergence,
    )


def default_focus(l: int) -> Tuple[int, int, int]:
    """Клетки B_ℓ, ближайшие к центрам трёх стартовых коробок, как тайлы (позиции)."""
    centres = ((l / 6, 5 * l / 6), (l / 2, l / 2), (5 * l / 6, l / 6))
    cells = [(min(l - 1, floor(cx + 0.5)), min(l - 1, floor(cy + 0.5))) for cx, cy in centres]
    if len(set(cells)) != 3:
        raise DomainError(f"Для ℓ={l} центры коробок совпадают: {cells}")
    return tuple(cells)  # type: ignore[return-value]


def focus_tiles(n: int, cells: Sequence[Tuple[int, int]]) -> Tuple[int, int, int]:
    return tuple(pos_index(Coord(x, y), n) for x, y in cells)  # type: ignore[return-value]


def _coupled_batch(task: BatchTask) -> List[TrajectoryStats]:
    n, t, focus = task.params["n"], task.params["t"], task.params["focus"]
    return [run_coupled(n, t, focus, ShuffleStream(task.seed, trial))
            for trial in range(task.first_trial, task.first_trial + task.size)]


def _collect(n: int, t: int, focus: Sequence[int], trials: int, seed: int,
             runner: Optional[TrialRunner]) -> List[TrajectoryStats]:
    chunks = default_runner(runner).run(_coupled_batch, trials, seed, n=n, t=t, focus=tuple(focus))
    return [item for chunk in chunks for item in chunk]


def interference_bound_check(n: int, l: int, trials: int, seed: int = 0,
                             runner: Optional[TrialRunner] = None,
                             focus: Optional[Sequence[int]] = None) -> CheckReport:
    """
    Оценка E[A^k/(2n)] при t = 2ℓ²n и проверка оценка + 3σ ≤ 128ℓ,
    а также E[wrap_count] + 3σ ≤ 32 и точного совпадения X и Y для тайла i.
    """
    if not 2 <= l <= n:
        raise DomainError(f"Требуется 2 ≤ ℓ ≤ n, получено ℓ={l}, n={n}")
    focus = tuple(focus) if focus else focus_tiles(n, default_focus(l))
    t = 2 * l * l * n
    started = time.perf_counter()
    runs = _collect(n, t, focus, trials, seed, runner)
    wall = time.perf_counter() - started
    ak = mean_report("A_k_over_2n", [r.a_k / (2 * n) for r in runs], seed, wall)
    nk = mean_report("N_k", [r.interference[2] for r in runs], seed, wall)
    wraps = mean_report("wrap_count", [r.wrap_count for r in runs], seed, wall)
    aki = mean_report("A_ki_over_2n", [r.a_ki / (2 * n) for r in runs], seed, wall)
    i_mismatch = sum(1 for r in runs if r.x_end[0] != r.y_end[0])
    unexplained = sum(r.divergence_unexplained for r in runs)
    bound_ok = ak.estimate + 3 * ak.stderr <= 128 * l
    wrap_ok = wraps.estimate + 3 * wraps.stderr <= 32
    passed = bound_ok and wrap_ok and i_mismatch == 0 and unexplained == 0
    logger.info("Проверка интерференции n=%d ℓ=%d: E[A^k/2n]=%.4f, E[N]=%.4f, итог=%s",
                n, l, ak.estimate, wraps.estimate, passed)
    return CheckReport(name="interference_bound", passed=passed,
                       details={"n": n, "l": l, "steps": t, "bound": 128 * l,
                                "tile_i_mismatches": i_mismatch,
                                "unexplained_divergence": unexplained,
                                "A_ki_bound": 64 * l},
                       estimates=[ak, nk, wraps, aki])


def martingale_drift_check(n: int, t: int, trials: int, seed: int = 0,
                           runner: Optional[TrialRunner] = None,
                           focus: Optional[Sequence[int]] = None) -> CheckReport:
    """
    Эмпирический дрейф остановленного мартингала M, супермартингала V₁,
    шаговый дрейф D₁² (не больше 1/(2n)) и супермартингала |Z|² − 2N^k.
    """
    focus = tuple(focus) if focus else (0, n, n + 1)
    started = time.perf_counter()
    runs = _collect(n, t, focus, trials, seed, runner)
    wall = time.perf_counter() - started
    m_drift = mean_report("M_drift", [r.martingale_stopped - r.martingale_start for r in runs], seed, wall)
    v1_drift = mean_report("V1_drift", [r.v1_stopped - r.v1_start for r in runs], seed, wall)
    step_drift = mean_report("D1sq_step_drift",
                             [r.d1sq_increment / r.drift_steps for r in runs if r.drift_steps],
                             seed, wall)
    z_super = mean_report("Z_supermartingale", [r.z_super for r in runs], seed, wall)
    m_ok = abs(m_drift.estimate) <= 3 * m_drift.stderr + 1e-12
    v1_ok = v1_drift.estimate <= 3 * v1_drift.stderr + 1e-12
    step_ok = step_drift.estimate <= 1 / (2 * n) + 3 * step_drift.stderr + 1e-12
    z_ok = z_super.estimate <= 3 * z_super.stderr + 1e-12
    passed = m_ok and v1_ok and step_ok and z_ok
    logger.info("Проверка мартингалов n=%d t=%d: M=%.4g±%.2g, V1=%.4g, итог=%s",
                n, t, m_drift.estimate, m_drift.stderr, v1_drift.estimate, passed)
    return CheckReport(name="martingale_drift", passed=passed,
                       details={"n": n, "steps": t, "m_ok": m_ok, "v1_ok": v1_ok,
                                "step_drift_ok": step_ok, "z_ok": z_ok,
                                "step_drift_bound": 1 / (2 * n),
                                "escaped": sum(1 for r in runs if r.escape_time is not None)},
                       estimates=[m_drift, v1_drift, step_drift, z_super])


@dataclass(frozen=True)
class Box:
    """Прямоугольник клеток [x_lo, x_hi] × [y_lo, y_hi] на торе (границы по модулю n)."""
    x_lo: int
    x_hi: int
    y_lo: int
    y_hi: int

    def contains(self, xs: np.ndarray, ys: np.ndarray, n: int) -> np.ndarray:
        return _axis_contains(xs, self.x_lo, self.x_hi, n) & _axis_contains(ys, self.y_lo, self.y_hi, n)


def _axis_contains(values: np.ndarray, lo: int, hi: int, n: int) -> np.ndarray:
    if hi - lo >= n - 1:
        return np.ones(np.shape(values), dtype=bool)
    return np.mod(np.asarray(values) - lo, n) <= hi - lo


def box_contains(box: Box, coord: Coord, n: int) -> bool:
    """Скалярная проверка принадлежности клетки коробке на торе."""
    return bool(box.contains(np.array([coord.x]), np.array([coord.y]), n)[0])


def stage1_boxes(l: int, c: float) -> Tuple[Box, Box, Box]:
    """
    Три коробки стороны cℓ с центрами (ℓ/6, 5ℓ/6), (ℓ/2, ℓ/2), (5ℓ/6, ℓ/6);
    границы округляются наружу.

    Raises:
        DomainError: Если cℓ < 1.
    """
    side = c * l
    if side < 1:
        raise DomainError(f"Геометрия невыполнима: cℓ = {side} < 1")
    centres = ((l / 6, 5 * l / 6), (l / 2, l / 2), (5 * l / 6, l / 6))
    return tuple(Box(floor(cx - side / 2), ceil(cx + side / 2),
                     floor(cy - side / 2), ceil(cy + side / 2)) for cx, cy in centres)  # type: ignore


def k_condition_holds(K: float) -> bool:
    """e^{−(2K−1)²/3} ≤ 1/(2e√3)."""
    return math.exp(-((2 * K - 1) ** 2) / 3) <= 1 / (2 * math.e * math.sqrt(3))


def _stage1_batch(task: BatchTask) -> int:
    p = task.params
    n = p["n"]
    streams = trial_streams(task.seed, task.first_trial, task.size)
    codes = stack_draws([s.moves_rng for s in streams], 8 * n, p["steps"])
    positions = TileTracker(n, p["starts"], task.size).run(codes)
    inside = np.ones(task.size, dtype=bool)
    for slot, box in enumerate(p["boxes"]):
        inside &= box.contains(positions[:, slot, 0], positions[:, slot, 1], n)
    return int(inside.sum())


def stage1_success(n: int, l: int, trials: int, seed: int = 0, c: float = 1 / 3,
                   runner: Optional[TrialRunner] = None,
                   starts: Optional[Sequence[Tuple[int, int]]] = None) -> EstimateReport:
    """
    Вероятность того, что после 2ℓ²n шагов все три фокусных тайла
    находятся в своих коробках, с интервалом Вильсона.
    """
    if not 1 <= l <= n:
        raise DomainError(f"Требуется 1 ≤ ℓ ≤ n, получено ℓ={l}, n={n}")
    boxes = stage1_boxes(l, c)
    starts = tuple(starts) if starts else default_focus(l)
    steps = 2 * l * l * n
    started = time.perf_counter()
    counts = default_runner(runner).run(_stage1_batch, trials, seed, n=n, steps=steps,
                                        starts=starts, boxes=boxes)
    successes = sum(counts)
    logger.info("Стадия 1 n=%d ℓ=%d c=%.3f: %d/%d", n, l, c, successes, trials)
    return wilson_report("stage1_success", successes, trials, seed, time.perf_counter() - started)
