"""
Модуль для управления конфигурацией экспериментов torus-lab.

Предоставляет классы ExperimentConfig и ConfigManager для определения,
валидации и загрузки настроек из плоского JSON-файла с наложением
флагов командной строки. Использует Pydantic для строгой типизации.
"""
import json
import os
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional
import logging

import aiofiles  # type: ignore
from pydantic import (BaseModel, ConfigDict, Field, ValidationError,  # type: ignore
                      field_validator, model_validator)

from .coupling_lab import k_condition_holds
from .exceptions import UsageError

logger = logging.getLogger(__name__)

SEED_ENV_VAR = "TORUSLAB_SEED"


class ExperimentConfig(BaseModel):
    """
    Модель конфигурации эксперимента.

    Неизвестные ключи запрещены. Поля без значения (None) разрешаются
    командой перед запуском, так что манифест не содержит неявных умолчаний.
    """
    model_config = ConfigDict(extra='forbid')

    n: int = Field(4, ge=2, description="Сторона тора")
    l: int = Field(2, ge=1, description="Размер коробки B_ℓ")
    steps: Optional[int] = Field(None, ge=0, description="Число шагов цепи (t или T′)")
    window_start: int = Field(1, ge=1, description="Начало окна сопоставления T (режим fixed)")
    horizon: Optional[int] = Field(None, ge=0, description="Конец окна сопоставления t")
    trials: int = Field(1000, ge=1, description="Число испытаний Монте-Карло")
    seed: int = Field(0, ge=0, description="Master seed")
    c: float = Field(1 / 3, gt=0, description="Доля стороны стартовых коробок")
    K: float = Field(2.0, gt=0, description="Множитель барьера ленивого блуждания")
    C: float = Field(4.0, gt=0, description="Константа длины T′ и окон сопоставления")
    threads: int = Field(1, ge=1, description="Число процессов")
    batch_size: int = Field(1000, ge=1, description="Размер пакета испытаний")
    focus: Optional[List[int]] = Field(None, description="Метки фокусных тайлов (i, j, k)")
    targets: Optional[List[int]] = Field(None, description="Метки целевых клеток (i′, j′, k′)")
    sextuples: int = Field(20, ge=1, description="Число случайных шестёрок в triple-prob без focus/targets")
    scaled_n: int = Field(12, ge=3, description="Сторона тора для сравнения ℓ⁶-оценок при ℓ и ℓ+1")
    match_label: Optional[int] = Field(None, ge=1, description="Метка x для статистики сопоставлений")
    candidates: Optional[List[int]] = Field(None, description="Метки кандидатов z")
    window_mode: Literal["uniform", "fixed"] = Field("uniform", description="Выбор T: равномерно или фиксированно")
    sizes: List[int] = Field(default_factory=lambda: [4, 8, 16, 32],
                             description="Размеры n для подгонки масштабирования")
    law_size: int = Field(4, ge=2, le=8, description="Размер колоды m для законов PermLaw")
    laws: int = Field(100, ge=1, description="Число случайных законов")
    gamma_probability: str = Field("1/2", description="Вероятность 3-цикла в 3-Monte шаге (дробь)")
    out_dir: str = Field("results", description="Каталог результатов")
    format: Literal["csv", "json"] = Field("csv", description="Формат строк результатов")
    debug: bool = Field(False, description="Режим отладки (True/False)")
    log_file_path: Optional[str] = Field(None, description="Путь к файлу логов. Если None, логи выводятся в stderr.")

    @field_validator('focus', 'targets')
    @classmethod
    def validate_triple(cls, v: Optional[List[int]]) -> Optional[List[int]]:
        """
        Проверяет, что тройка меток состоит из трёх различных положительных чисел.

        Raises:
            ValueError: Если меток не три, они повторяются или неположительны.
        """
        if v is None:
            return v
        if len(v) != 3 or len(set(v)) != 3 or min(v) < 1:
            raise ValueError(f"Нужны три различные метки ≥ 1, получено {v}")
        return v

    @field_validator('gamma_probability')
    @classmethod
    def validate_fraction(cls, v: str) -> str:
        try:
            value = Fraction(v)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"gamma_probability должна быть дробью: '{v}'") from exc
        if not 0 <= value <= 1:
            raise ValueError(f"gamma_probability вне [0, 1]: {v}")
        return v

    @model_validator(mode='after')
    def validate_ranges(self) -> 'ExperimentConfig':
        """
        Выполняет кросс-валидацию полей.

        Raises:
            ValueError: Если ℓ > n, T > t в режиме fixed или размеры меньше 2.
        """
        if self.l > self.n:
            raise ValueError(f"l ({self.l}) не может превышать n ({self.n})")
        if self.window_mode == "fixed" and self.horizon is not None and self.window_start > self.horizon:
            raise ValueError(f"window_start ({self.window_start}) должен быть ≤ horizon ({self.horizon})")
        if any(size < 2 for size in self.sizes):
            raise ValueError(f"Все размеры должны быть ≥ 2: {self.sizes}")
        return self

    @property
    def gamma_fraction(self) -> Fraction:
        return Fraction(self.gamma_probability)

    def k_condition_holds(self) -> bool:
        """Выполнено ли e^{−(2K−1)²/3} ≤ 1/(2e√3) для текущего K."""
        return k_condition_holds(self.K)


class ConfigManager:
    """
    Класс для загрузки и слияния конфигурации эксперимента.

    Порядок приоритета: флаги CLI > файл > переменная TORUSLAB_SEED (только
    для seed) > значения по умолчанию.
    """
    config_file_path: Optional[Path]
    config: ExperimentConfig

    def __init__(self, config_file_path: Optional[str] = None) -> None:
        """
        Инициализирует менеджер конфигурации.

        Args:
            config_file_path (Optional[str]): Путь к JSON-файлу. Если None,
                                              используются только умолчания и флаги.
        """
        self.config_file_path = Path(config_file_path) if config_file_path else None
        self.file_data: Dict[str, Any] = {}
        self.config: ExperimentConfig = ExperimentConfig.model_validate({})

    async def async_init(self, overrides: Optional[Dict[str, Any]] = None) -> None:
        """
        Загружает файл (если задан) и накладывает флаги командной строки.

        Raises:
            UsageError: При отсутствии файла, ошибке разбора или неизвестных ключах.
            ValidationError: Если итоговые значения не проходят валидацию.
        """
        self.file_data = await self._load_file()
        self.config = self.merge(overrides or {})

    async def _load_file(self) -> Dict[str, Any]:
        """
        Читает плоский JSON-документ.

        Returns:
            Dict[str, Any]: Ключи документа (пустой словарь без файла).
        """
        if self.config_file_path is None:
            return {}
        try:
            async with aiofiles.open(self.config_file_path, mode='r', encoding='utf-8') as f:
                content = await f.read()
        except FileNotFoundError as err:
            logger.error("Файл конфигурации %s не найден.", self.config_file_path)
            raise UsageError(f"Файл конфигурации не найден: {self.config_file_path}") from err
        except IOError as err:
            logger.error("Ошибка ввода/вывода при загрузке конфигурации %s: %s",
                         self.config_file_path, err, exc_info=True)
            raise UsageError(f"Не удалось прочитать {self.config_file_path}: {err}") from err
        try:
            data = json.loads(content) if content.strip() else {}
        except json.JSONDecodeError as err:
            logger.error("Ошибка разбора файла конфигурации %s: %s", self.config_file_path, err)
            raise UsageError(f"Некорректный JSON в {self.config_file_path}: {err}") from err
        if not isinstance(data, dict):
            raise UsageError(f"Конфигурация должна быть JSON-объектом: {self.config_file_path}")
        self._reject_unknown(data)
        logger.info("Конфигурация загружена из %s (%d ключей).", self.config_file_path, len(data))
        return data

    @staticmethod
    def _reject_unknown(data: Dict[str, Any]) -> None:
        unknown = sorted(set(data) - set(ExperimentConfig.model_fields))
        if unknown:
            raise UsageError(f"Неизвестные ключи конфигурации: {', '.join(unknown)}")

    def merge(self, overrides: Dict[str, Any]) -> ExperimentConfig:
        """
        Сливает умолчания, переменную окружения, файл и флаги CLI.

        Args:
            overrides (Dict[str, Any]): Значения флагов; None означает «не задано».

        Returns:
            ExperimentConfig: Валидированная конфигурация.
        """
        data: Dict[str, Any] = {}
        env_seed = os.environ.get(SEED_ENV_VAR)
        if env_seed is not None:
            try:
                data["seed"] = int(env_seed)
            except ValueError as err:
                raise UsageError(f"{SEED_ENV_VAR} должна быть целым числом: '{env_seed}'") from err
        data.update(self.file_data)
        explicit = {k: v for k, v in overrides.items() if v is not None}
        self._reject_unknown(explicit)
        data.update(explicit)
        try:
            return ExperimentConfig.model_validate(data)
        except ValidationError as err:
            logger.error("Ошибка валидации конфигурации: %s", err)
            raise

    def get_config(self) -> ExperimentConfig:
        """
        Возвращает текущую конфигурацию.

        Returns:
            ExperimentConfig: Объект с текущими настройками.
        """
        return self.config

    def resolve(self, **derived: Any) -> ExperimentConfig:
        """
        Фиксирует производные значения (шаги, окна) в конфигурации запуска.

        Returns:
            ExperimentConfig: Обновлённая конфигурация без неявных умолчаний.
        """
        self.config = ExperimentConfig.model_validate({**self.config.model_dump(), **derived})
        return self.config


async def load_config(path: Optional[str], overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Загружает конфигурацию из файла с наложением флагов командной строки.

    Args:
        path (Optional[str]): Путь к плоскому JSON-документу.
        overrides (Optional[Dict[str, Any]]): Значения флагов CLI.

    Returns:
        ExperimentConfig: Валидированная конфигурация.

    Raises:
        UsageError: При ошибке чтения или разбора файла и неизвестных ключах.
    """
    manager = ConfigManager(path)
    await manager.async_init(overrides)
    return manager.get_config()
