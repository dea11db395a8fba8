"""
Модуль с иерархией исключений библиотеки torus-lab.

Каждый класс соответствует категории ошибки, которую ErrorHandler
переводит в код завершения CLI.
"""
from typing import Any, Dict, Optional


class TorusLabError(Exception):
    """Базовое исключение всех ошибок torus-lab."""


class DomainError(TorusLabError, ValueError):
    """
    Некорректный математический вход: координата вне решётки,
    несовпадение размеров, Hold в коммутаторе, совпадающие фокусные тайлы,
    пустое окно и т.п.
    """


class InfiniteDivergenceError(DomainError):
    """Относительная энтропия бесконечна: a_i > 0 при b_i = 0."""


class UndefinedQuantityError(DomainError):
    """Величина не определена (например, деление на нулевую энтропию)."""


class ResourceError(TorusLabError):
    """Запрос превышает пределы явного перебора (n > 3, m > 8)."""


class InvariantViolation(TorusLabError):
    """Нарушен внутренний инвариант (двойное представление, матрица мастер-тайлов и т.п.)."""


class UsageError(TorusLabError):
    """Неверное использование CLI или конфигурации."""


class CheckFailed(TorusLabError):
    """Проверка выполнилась, но её утверждение не подтвердилось (код выхода 1)."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.details = details
