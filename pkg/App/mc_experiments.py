"""
Модуль оценок Монте-Карло для вероятностных утверждений анализа
перемешивания: вероятность перехода тройки тайлов, статистика
сопоставлений двухшаговой цепи и подгонка показателя масштабирования.

Все оценки возвращают интервалы (Вильсона для долей) и не зависят ни от
числа процессов, ни от размера пакета: поток испытания задаётся ключом
(seed, trial).
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np  # type: ignore
from scipy import stats  # type: ignore

from .exceptions import DomainError
from .grid_core import Axis, Labeling, MoveTable, l_support, rotations
from .report_models import CheckReport, EstimateReport
from .shuffle_engine import (MatchBook, TileTracker, TwoStepBatch, l_collision_probability,
                             stack_draws, trial_streams)
from .statistics import wilson_report
from .trial_runner import BatchTask, TrialRunner, default_runner

logger = logging.getLogger(__name__)

EXPECTED_EXPONENT = 3.0
EXPONENT_TOLERANCE = 0.15
SCALED_RATIO_LIMIT = 10.0


def claim_window(n: int, k: int, C: float = 4.0) -> Tuple[int, int, int]:
    """
    Окно сопоставления для оболочки k.

    Returns:
        Tuple[int, int, int]: (ℓ_k, T, t), где 2T: наименьшее чётное ≥ 9Cnℓ_k²,
        t = T + ⌈nℓ_k²/6⌉.
    """
    if k < 1 or C <= 0:
        raise DomainError(f"Требуется k ≥ 1 и C > 0, получено k={k}, C={C}")
    lk = min(2 ** (k - 1), n)
    T = max(1, math.ceil(9 * C * n * lk * lk / 2))
    return lk, T, T + math.ceil(n * lk * lk / 6)


def shell_of_label(label: int) -> int:
    """Номер оболочки k, для которой метка лежит в I_k."""
    if label < 1:
        raise DomainError(f"Метка должна быть ≥ 1, получено {label}")
    return math.isqrt(label - 1).bit_length() + 1 if label > 1 else 1


def triple_steps(n: int, l: int, C: float) -> int:
    """Наименьшее чётное целое, не меньшее Cℓ²n."""
    steps = math.ceil(C * l * l * n)
    return steps + steps % 2


def _check_labels(labels: Sequence[int], l: int, what: str) -> None:
    if len(labels) != 3 or len(set(labels)) != 3:
        raise DomainError(f"{what}: нужны три различные метки, получено {labels}")
    bad = [x for x in labels if not 1 <= x <= l * l]
    if bad:
        raise DomainError(f"{what}: метки {bad} вне B_ℓ (1..{l * l})")


def random_sextuple(l: int, rng: np.random.Generator) -> Tuple[Tuple[int, int, int], Tuple[int, int, int]]:
    """Случайные (i, j, k) и (i′, j′, k′): по три различные метки из B_ℓ."""
    if l * l < 3:
        raise DomainError(f"В B_ℓ меньше трёх клеток при ℓ={l}")
    focus = rng.choice(l * l, size=3, replace=False) + 1
    targets = rng.choice(l * l, size=3, replace=False) + 1
    return tuple(int(v) for v in focus), tuple(int(v) for v in targets)  # type: ignore[return-value]


def _triple_batch(task: BatchTask) -> int:
    p = task.params
    streams = trial_streams(task.seed, task.first_trial, task.size)
    codes = stack_draws([s.moves_rng for s in streams], 8 * p["n"], p["steps"])
    positions = TileTracker(p["n"], p["starts"], task.size).run(codes)
    hit = np.all(positions == np.asarray(p["targets"], dtype=np.int64)[None, :, :], axis=(1, 2))
    return int(hit.sum())


def estimate_triple_prob(n: int, l: int, focus: Sequence[int], targets: Sequence[int],
                         trials: int, seed: int = 0, C: float = 4.0,
                         runner: Optional[TrialRunner] = None,
                         steps: Optional[int] = None) -> EstimateReport:
    """
    Доля испытаний обычной торической тасовки, в которых после T′ шагов тайлы
    с метками focus стоят в клетках с метками targets.

    Args:
        n (int): Сторона тора.
        l (int): Размер коробки B_ℓ.
        focus (Sequence[int]): Метки (i, j, k).
        targets (Sequence[int]): Метки (i′, j′, k′).
        trials (int): Число испытаний.
        seed (int): Master seed.
        C (float): Константа длины; T′: наименьшее чётное ≥ Cℓ²n.
        steps (Optional[int]): Явное чётное T′ вместо вычисленного.

    Raises:
        DomainError: При невыполнимых метках или нечётном T′.
    """
    if not 1 <= l <= n:
        raise DomainError(f"Требуется 1 ≤ ℓ ≤ n, получено ℓ={l}, n={n}")
    _check_labels(focus, l, "focus")
    _check_labels(targets, l, "targets")
    steps = triple_steps(n, l, C) if steps is None else steps
    if steps < 0 or steps % 2:
        raise DomainError(f"T′ должно быть неотрицательным и чётным, получено {steps}")
    labeling = Labeling(n)
    starts = [(c.x, c.y) for c in map(labeling.to_coord, focus)]
    goals = [(c.x, c.y) for c in map(labeling.to_coord, targets)]
    started = time.perf_counter()
    counts = default_runner(runner).run(_triple_batch, trials, seed, n=n, steps=steps,
                                        starts=starts, targets=goals)
    successes = sum(counts)
    logger.info("Тройка %s → %s, n=%d ℓ=%d T′=%d: %d/%d",
                tuple(focus), tuple(targets), n, l, steps, successes, trials)
    return wilson_report("triple_prob", successes, trials, seed, time.perf_counter() - started)


def scaled_triple_report(n: int, ls: Sequence[int], trials: int, seed: int = 0, C: float = 4.0,
                         runner: Optional[TrialRunner] = None) -> List[Dict[str, float]]:
    """
    Оценки ℓ⁶ · P для нескольких ℓ на одной и той же доске.

    Фокус: метки (1, 2, 3), цели: три последние метки B_ℓ в обратном порядке.
    """
    rows = []
    for l in ls:
        targets = (l * l, l * l - 1, l * l - 2)
        report = estimate_triple_prob(n, l, (1, 2, 3), targets, trials, seed, C, runner)
        scale = float(l ** 6)
        rows.append({"l": l, "steps": triple_steps(n, l, C), "targets": targets,
                     "estimate": report.estimate, "ci_low": report.ci_low, "ci_high": report.ci_high,
                     "successes": report.successes, "scaled": report.estimate * scale,
                     "scaled_low": report.ci_low * scale, "scaled_high": report.ci_high * scale,
                     "trials": trials})
    return rows


def scaled_ratio(rows: Sequence[Dict[str, float]]) -> float:
    """Отношение наибольшей ℓ⁶-оценки к наименьшей; inf, если какая-то оценка нулевая."""
    values = [float(row["scaled"]) for row in rows]
    if not values:
        raise DomainError("Нет строк для сравнения масштабированных оценок")
    if min(values) <= 0:
        return math.inf
    return max(values) / min(values)


@dataclass
class MatchTable:
    """
    Итог оценки сопоставлений для метки x.

    per_z[z]: оценка P(M₂(x) = z, M₁(x) < x); matched: P(x сопоставлен);
    a_hat = x · min_z P, a_hat_low: та же величина по нижним границам.
    """
    x_label: int
    horizon: int
    per_z: Dict[int, EstimateReport] = field(default_factory=dict)
    matched: Optional[EstimateReport] = None
    nicely: Optional[EstimateReport] = None
    a_hat: float = 0.0
    a_hat_low: float = 0.0


def _match_batch(task: BatchTask) -> Dict[str, object]:
    p = task.params
    n, horizon, size = p["n"], p["horizon"], task.size
    streams = trial_streams(task.seed, task.first_trial, size)
    if p["window_mode"] == "uniform":
        window = np.array([s.aux_rng.integers(1, p["window_max"] + 1) for s in streams], dtype=np.int64)
    else:
        window = np.full(size, p["window_start"], dtype=np.int64)
    codes = stack_draws([s.moves_rng for s in streams], 8 * n, (horizon, 2))
    coins = stack_draws([s.coins_rng for s in streams], 2, horizon)
    chain = TwoStepBatch(n, size, MoveTable(n))
    book = MatchBook(size, n * n, [p["x_tile"]])
    for step in range(1, horizon + 1):
        event, occupants = chain.step(codes[:, step - 1, 0], codes[:, step - 1, 1], coins[:, step - 1])
        book.record(step, window <= step, event, occupants)
    matched = book.matched()[:, 0]
    label_at = np.asarray(p["label_at"])
    front = np.maximum(book.front[:, 0], 0)
    back = np.maximum(book.back[:, 0], 0)
    lower = matched & (label_at[front] < p["x_label"])
    per_z = {z: int((lower & (back == tile)).sum()) for z, tile in p["z_tiles"].items()}
    nicely = {key: int((matched & book.middle[:, 0] & (front == y) & (back == z)).sum())
              for key, (y, z) in p["nicely_pairs"].items()}
    return {"matched": int(matched.sum()), "lower": int(lower.sum()), "per_z": per_z, "nicely": nicely}


def _match_counts(n: int, x_label: int, horizon: int, trials: int, seed: int,
                  window_start: int, window_mode: str, l: int, z_labels: Sequence[int],
                  nicely_pairs: Dict[str, Tuple[int, int]],
                  runner: Optional[TrialRunner]) -> Dict[str, object]:
    labeling = Labeling(n)
    if window_mode not in ("uniform", "fixed"):
        raise DomainError(f"Неизвестный режим окна: {window_mode}")
    window_max = horizon - math.ceil(n * l * l / 6)
    if window_mode == "uniform" and window_max < 1:
        raise DomainError(f"Пустое окно: t={horizon} не больше ⌈nℓ²/6⌉ при n={n}, ℓ={l}")
    if window_mode == "fixed" and window_start < 1:
        raise DomainError(f"Начало окна должно быть ≥ 1, получено {window_start}")
    params = dict(n=n, horizon=horizon, window_mode=window_mode, window_max=window_max,
                  window_start=window_start, x_label=x_label,
                  x_tile=labeling.tile_of_label(x_label), label_at=labeling.label_at.tolist(),
                  z_tiles={z: labeling.tile_of_label(z) for z in z_labels},
                  nicely_pairs=nicely_pairs)
    chunks = default_runner(runner).run(_match_batch, trials, seed, **params)
    total: Dict[str, object] = {"matched": 0, "lower": 0,
                                "per_z": {z: 0 for z in z_labels},
                                "nicely": {key: 0 for key in nicely_pairs}}
    for chunk in chunks:
        total["matched"] += chunk["matched"]  # type: ignore[operator]
        total["lower"] += chunk["lower"]  # type: ignore[operator]
        for z, count in chunk["per_z"].items():  # type: ignore[union-attr]
            total["per_z"][z] += count  # type: ignore[index]
        for key, count in chunk["nicely"].items():  # type: ignore[union-attr]
            total["nicely"][key] += count  # type: ignore[index]
    return total


def estimate_match_probs(n: int, x_label: int, candidates: Optional[Sequence[int]], trials: int,
                         seed: int = 0, horizon: Optional[int] = None, window_start: int = 1,
                         window_mode: str = "uniform", l: Optional[int] = None, C: float = 4.0,
                         runner: Optional[TrialRunner] = None) -> MatchTable:
    """
    Оценивает P(M₂(x) = z, M₁(x) < x) для каждого кандидата z по двухшаговой
    3-Monte цепи на окне {T, …, t}.

    По умолчанию ℓ и t берутся из окна оболочки, содержащей x, а T выбирается
    равномерно на {1, …, t − ⌈nℓ²/6⌉} независимо от тасовки.

    Raises:
        DomainError: При неверной метке, пустом окне или неизвестном режиме.
    """
    if not 1 <= x_label <= n * n:
        raise DomainError(f"Метка {x_label} вне диапазона 1..{n * n}")
    lk, _, claim_t = claim_window(n, shell_of_label(x_label), C)
    l = l or lk
    horizon = claim_t if horizon is None else horizon
    z_labels = list(candidates) if candidates else [z for z in range(1, x_label)]
    bad = [z for z in z_labels if z == x_label or not 1 <= z <= n * n]
    if bad:
        raise DomainError(f"Недопустимые кандидаты z: {bad}")
    table = MatchTable(x_label=x_label, horizon=horizon)
    if window_mode == "fixed" and horizon < window_start:
        for z in z_labels:
            table.per_z[z] = wilson_report(f"match_z{z}", 0, trials, seed)
        table.matched = wilson_report("matched", 0, trials, seed)
        return table
    started = time.perf_counter()
    counts = _match_counts(n, x_label, horizon, trials, seed, window_start, window_mode,
                           l, z_labels, {}, runner)
    wall = time.perf_counter() - started
    for z in z_labels:
        table.per_z[z] = wilson_report(f"match_z{z}", counts["per_z"][z], trials, seed, wall)  # type: ignore[index]
    table.matched = wilson_report("matched", counts["matched"], trials, seed, wall)  # type: ignore[arg-type]
    if table.per_z:
        table.a_hat = x_label * min(r.estimate for r in table.per_z.values())
        table.a_hat_low = x_label * min(r.ci_low for r in table.per_z.values())
    logger.info("Сопоставления x=%d, n=%d, t=%d: Â=%.4g (нижняя граница %.4g)",
                x_label, n, horizon, table.a_hat, table.a_hat_low)
    return table


def estimate_match_nicely(n: int, triple: Sequence[int], trials: int, seed: int = 0,
                          horizon: Optional[int] = None, window_start: int = 1,
                          window_mode: str = "uniform", l: int = 2, C: float = 4.0,
                          runner: Optional[TrialRunner] = None) -> EstimateReport:
    """
    Доля испытаний, в которых (x, y, z) сопоставлены и x был серединой L
    в момент T_xyz.

    Raises:
        DomainError: При совпадающих или невалидных метках.
    """
    if len(set(triple)) != 3:
        raise DomainError(f"Метки тройки должны различаться: {triple}")
    x, y, z = triple
    for label in triple:
        if not 1 <= label <= n * n:
            raise DomainError(f"Метка {label} вне диапазона 1..{n * n}")
    horizon = claim_window(n, (l - 1).bit_length() + 1, C)[2] if horizon is None else horizon
    if window_mode == "fixed" and horizon < window_start:
        return wilson_report("match_nicely", 0, trials, seed)
    labeling = Labeling(n)
    pair = (labeling.tile_of_label(y), labeling.tile_of_label(z))
    started = time.perf_counter()
    counts = _match_counts(n, x, horizon, trials, seed, window_start, window_mode, l, [],
                           {"nicely": pair}, runner)
    return wilson_report("match_nicely", counts["nicely"]["nicely"], trials, seed,  # type: ignore[index]
                         time.perf_counter() - started)


def l_collision_check(n: int) -> CheckReport:
    """
    Сверяет точную вероятность коллизии каждой L-конфигурации за один
    двухшаговый шаг с 1/(32n²).
    """
    target = 1 / (32 * n * n)
    seen = set()
    worst = 0.0
    for r in (m for m in rotations(n) if m.axis is Axis.ROW):
        for c in (m for m in rotations(n) if m.axis is Axis.COL):
            triple = l_support(r, c, n)
            if triple in seen:
                continue
            seen.add(triple)
            value = l_collision_probability(n, *triple)
            worst = max(worst, abs(float(value) - target))
    passed = worst == 0.0
    logger.info("Проверка коллизий L для n=%d: %d конфигураций, отклонение %.3g", n, len(seen), worst)
    return CheckReport(name="l_collision_rate", passed=passed,
                       details={"n": n, "configurations": len(seen), "expected": target,
                                "max_deviation": worst})


@dataclass(frozen=True)
class ScalingFit:
    """Наклон log t* против log n, его ошибка и наклон без наибольшего n."""
    slope: float
    stderr: float
    intercept: float
    jackknife_slope: float

    @property
    def jackknife_stable(self) -> bool:
        return abs(self.slope - self.jackknife_slope) <= 2 * self.stderr + 1e-12

    def within(self, target: float = EXPECTED_EXPONENT, tolerance: float = EXPONENT_TOLERANCE) -> bool:
        return abs(self.slope - target) <= tolerance


def fit_mixing_exponent(ns: Sequence[int], values: Sequence[float]) -> ScalingFit:
    """
    Подгоняет наклон методом наименьших квадратов на log-log осях.

    Raises:
        DomainError: Если размеров меньше трёх или значения неположительны.
    """
    if len(ns) != len(values):
        raise DomainError(f"Длины ns и values различаются: {len(ns)} и {len(values)}")
    if len(set(ns)) < 3:
        raise DomainError(f"Для подгонки нужно хотя бы 3 размера, получено {len(set(ns))}")
    if min(ns) <= 0 or min(values) <= 0:
        raise DomainError("Размеры и значения должны быть положительными")
    order = np.argsort(ns)
    xs = np.log(np.asarray(ns, dtype=np.float64)[order])
    ys = np.log(np.asarray(values, dtype=np.float64)[order])
    fit = stats.linregress(xs, ys)
    jack = stats.linregress(xs[:-1], ys[:-1])
    return ScalingFit(slope=float(fit.slope), stderr=float(fit.stderr),
                      intercept=float(fit.intercept), jackknife_slope=float(jack.slope))
