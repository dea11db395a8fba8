"""
Модуль для централизованной обработки исключений командной строки.

Сопоставляет исключения кодам выхода и печатает ErrorResponse в stderr
в виде JSON.
"""
import json
import sys
from typing import Callable, Dict, TextIO, Tuple, Type
import logging

from pydantic import ValidationError  # type: ignore

from .exceptions import CheckFailed, DomainError, ResourceError, TorusLabError, UsageError
from .report_models import ErrorResponse

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

Handler = Callable[[BaseException], Tuple[ErrorResponse, int]]


class ErrorHandler:
    """
    Класс для централизованной обработки исключений.

    Обработчики хранятся в таблице по классу исключения; выбирается
    обработчик ближайшего класса в MRO.
    """

    def __init__(self, stream: TextIO = None):  # type: ignore[assignment]
        """
        Инициализирует обработчик ошибок и регистрирует обработчики по умолчанию.

        Args:
            stream (TextIO): Поток для ответа об ошибке. По умолчанию sys.stderr.
        """
        self.stream = stream
        self._handlers: Dict[Type[BaseException], Handler] = {}
        self.register_error_handlers()
        logger.debug("Класс ErrorHandler инициализирован и обработчики зарегистрированы.")

    def handle_usage(self, error: BaseException) -> Tuple[ErrorResponse, int]:
        """
        Обрабатывает ошибку использования (неверные флаги, ключи конфигурации).

        Returns:
            Tuple[ErrorResponse, int]: Ответ и код выхода 2.
        """
        logger.warning("Ошибка использования: %s", error)
        return ErrorResponse(error="Usage Error", message=str(error)), EXIT_USAGE

    def handle_domain(self, error: BaseException) -> Tuple[ErrorResponse, int]:
        """
        Обрабатывает недопустимый математический ввод.

        Returns:
            Tuple[ErrorResponse, int]: Ответ и код выхода 2.
        """
        logger.warning("Недопустимые входные данные: %s", error)
        return (ErrorResponse(error=type(error).__name__, message=str(error)), EXIT_USAGE)

    def handle_validation(self, error: BaseException) -> Tuple[ErrorResponse, int]:
        """
        Обрабатывает ошибку валидации конфигурации Pydantic.

        Returns:
            Tuple[ErrorResponse, int]: Ответ с перечнем ошибок и код выхода 2.
        """
        logger.warning("Ошибка валидации конфигурации: %s", error)
        details = None
        if isinstance(error, ValidationError):
            details = [{"loc": list(e["loc"]), "msg": e["msg"]} for e in error.errors()]
        return (ErrorResponse(error="Validation Error", message="Некорректная конфигурация",
                              details=details), EXIT_USAGE)

    def handle_check_failed(self, error: BaseException) -> Tuple[ErrorResponse, int]:
        """
        Обрабатывает проверку, которая выполнилась, но не прошла.

        Returns:
            Tuple[ErrorResponse, int]: Ответ и код выхода 1.
        """
        logger.error("Проверка не пройдена: %s", error)
        details = getattr(error, "details", None)
        return ErrorResponse(error="Check Failed", message=str(error), details=details), EXIT_FAILED

    def handle_generic_exception(self, error: BaseException) -> Tuple[ErrorResponse, int]:
        """
        Обрабатывает любые необработанные исключения.

        Логирует полную информацию об исключении и возвращает код выхода 1.

        Returns:
            Tuple[ErrorResponse, int]: Ответ и код выхода 1.
        """
        logger.error("Необработанная ошибка: %s", error, exc_info=error)
        return (ErrorResponse(error="Internal Error", message="An unexpected error occurred.",
                              details=str(error)), EXIT_FAILED)

    def add_custom_error_handler(self, exc_type: Type[BaseException], handler_func: Handler):
        """
        Динамически добавляет обработчик для класса исключения.

        Args:
            exc_type (Type[BaseException]): Класс исключения.
            handler_func (Handler): Функция, возвращающая (ErrorResponse, код выхода).
        """
        self._handlers[exc_type] = handler_func

    def register_error_handlers(self):
        """Регистрирует методы текущего класса как обработчики по умолчанию."""
        self.add_custom_error_handler(UsageError, self.handle_usage)
        self.add_custom_error_handler(DomainError, self.handle_domain)
        self.add_custom_error_handler(ResourceError, self.handle_domain)
        self.add_custom_error_handler(ValidationError, self.handle_validation)
        self.add_custom_error_handler(json.JSONDecodeError, self.handle_usage)
        self.add_custom_error_handler(CheckFailed, self.handle_check_failed)
        self.add_custom_error_handler(TorusLabError, self.handle_generic_exception)
        self.add_custom_error_handler(Exception, self.handle_generic_exception)

    def resolve(self, error: BaseException) -> Handler:
        for klass in type(error).__mro__:
            if klass in self._handlers:
                return self._handlers[klass]
        return self.handle_generic_exception

    def handle(self, error: BaseException) -> int:
        """
        Обрабатывает исключение: печатает ErrorResponse и возвращает код выхода.

        Args:
            error (BaseException): Исключение.

        Returns:
            int: Код выхода процесса.
        """
        response, code = self.resolve(error)(error)
        stream = self.stream or sys.stderr
        stream.write(response.model_dump_json() + "\n")
        stream.flush()
        return code
