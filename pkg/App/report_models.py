"""
Модуль Pydantic-моделей результатов torus-lab.

Оценки Монте-Карло, отчёты проверок, манифест запуска и ответ об ошибке.
"""
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, model_validator  # type: ignore

TOOL_VERSION = "1.0.0"


class EstimateReport(BaseModel):
    """
    Модель точечной оценки с доверительным интервалом.

    Для долей используется интервал Вильсона, для средних: нормальный.
    """
    name: str = Field(..., description="Имя оцениваемой величины")
    estimate: float = Field(..., description="Точечная оценка")
    stderr: float = Field(..., ge=0, description="Стандартная ошибка")
    ci_low: float = Field(..., description="Нижняя граница 95% интервала")
    ci_high: float = Field(..., description="Верхняя граница 95% интервала")
    ci_method: Literal["wilson", "normal"] = Field("wilson", description="Метод интервала")
    trials: int = Field(..., ge=0, description="Число испытаний")
    successes: Optional[int] = Field(None, ge=0, description="Число успехов (для долей)")
    seed: int = Field(0, ge=0, description="Master seed")
    wall_time: float = Field(0.0, ge=0, description="Время счёта в секундах")

    @model_validator(mode='after')
    def validate_interval(self) -> 'EstimateReport':
        """
        Проверяет, что интервал содержит точечную оценку.

        Raises:
            ValueError: Если оценка вне интервала.
        """
        slack = 1e-12
        if not self.ci_low - slack <= self.estimate <= self.ci_high + slack:
            raise ValueError(f"Интервал [{self.ci_low}, {self.ci_high}] не содержит "
                             f"оценку {self.estimate}")
        return self

    @property
    def excludes_zero(self) -> bool:
        return self.ci_low > 0


class CheckReport(BaseModel):
    """Модель результата проверки: флаг, числовые детали и связанные оценки."""
    name: str
    passed: bool
    details: Dict[str, Any] = Field(default_factory=dict)
    estimates: List[EstimateReport] = Field(default_factory=list)


class RunManifest(BaseModel):
    """
    Модель манифеста запуска CLI.

    Содержит полностью разрешённую конфигурацию, пути к результатам, версию и статус.
    """
    subcommand: str
    config: Dict[str, Any]
    outputs: Dict[str, str] = Field(default_factory=dict)
    tool_version: str = TOOL_VERSION
    schema_version: int = 1
    timestamp: str
    status: Literal["ok", "failed", "error", "running"] = "running"
    exit_code: Optional[int] = None


class ErrorResponse(BaseModel):
    """
    Модель ответа об ошибке, печатаемого в stderr.
    """
    error: str = Field(..., description="Тип ошибки")
    message: str = Field(..., description="Сообщение об ошибке")
    details: Optional[Any] = Field(None, description="Дополнительные детали ошибки")
