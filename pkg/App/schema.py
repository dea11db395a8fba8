"""
Схема выходных CSV-файлов: версия и столбцы каждой подкоманды.
"""
from typing import Dict, List

SCHEMA_VERSION = 1

COLUMNS: Dict[str, List[str]] = {
    "simulate": ["trial", "steps", "sign", "fixed_points", "tile0_x", "tile0_y"],
    "exact": ["t", "tv", "ent"],
    "equiv-check": ["n", "gamma_probability", "discrepancy"],
    "gamma-check": ["n", "row", "row_direction", "col", "col_direction",
                    "middle", "front", "back", "support_size", "ok"],
    "match-stats": ["x", "z", "estimate", "ci_low", "ci_high", "successes", "trials"],
    "triple-prob": ["kind", "n", "l", "steps", "focus", "targets", "estimate", "ci_low", "ci_high",
                    "successes", "trials", "scaled"],
    "couple": ["check", "name", "estimate", "stderr", "ci_low", "ci_high", "trials"],
    "walk-dp": ["kind", "n", "r", "m", "value", "bound", "ok"],
    "mix-scaling": ["n", "t_star"],
    "entropy-decompose": ["law", "m", "total", "sign_term", "tilde_sum", "residual", "error"],
}


def columns_for(subcommand: str) -> List[str]:
    try:
        return COLUMNS[subcommand]
    except KeyError as err:
        raise KeyError(f"Нет схемы для подкоманды {subcommand}") from err
