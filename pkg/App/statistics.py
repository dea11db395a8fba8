"""
Статистические помощники: интервалы Вильсона и нормальные интервалы средних.
"""
import math
from typing import Sequence, Tuple

import numpy as np  # type: ignore
from scipy import stats  # type: ignore

from .report_models import EstimateReport

Z95 = 1.959963984540054


def wilson_interval(successes: int, trials: int) -> Tuple[float, float]:
    """95% интервал Вильсона для доли; при trials = 0: [0, 1]."""
    if trials <= 0:
        return 0.0, 1.0
    ci = stats.binomtest(successes, trials).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def wilson_report(name: str, successes: int, trials: int, seed: int = 0,
                  wall_time: float = 0.0) -> EstimateReport:
    """Доля успехов с 95% интервалом Вильсона."""
    if trials <= 0:
        return EstimateReport(name=name, estimate=0.0, stderr=0.0, ci_low=0.0, ci_high=1.0,
                              trials=0, successes=0, seed=seed, wall_time=wall_time)
    p = successes / trials
    low, high = wilson_interval(successes, trials)
    return EstimateReport(name=name, estimate=p, stderr=math.sqrt(p * (1 - p) / trials),
                          ci_low=min(low, p), ci_high=max(high, p),
                          ci_method="wilson", trials=trials, successes=successes,
                          seed=seed, wall_time=wall_time)


def mean_report(name: str, values: Sequence[float], seed: int = 0,
                wall_time: float = 0.0) -> EstimateReport:
    """Выборочное среднее с нормальным 95% интервалом."""
    data = np.asarray(values, dtype=np.float64)
    if data.size == 0:
        return EstimateReport(name=name, estimate=0.0, stderr=0.0, ci_low=0.0, ci_high=0.0,
                              ci_method="normal", trials=0, seed=seed, wall_time=wall_time)
    mean = float(data.mean())
    stderr = float(stats.sem(data)) if data.size > 1 else 0.0
    if not math.isfinite(stderr):
        stderr = 0.0
    return EstimateReport(name=name, estimate=mean, stderr=stderr,
                          ci_low=mean - Z95 * stderr, ci_high=mean + Z95 * stderr,
                          ci_method="normal", trials=int(data.size), seed=seed,
                          wall_time=wall_time)
