"""
Модуль инициализации ядра приложения torus-lab.

Связывает менеджер конфигурации, жизненный цикл, маршрутизатор подкоманд
и обработчик ошибок в одну точку входа cli(argv) -> код выхода.
"""
import asyncio
import json
import logging
import sys
from typing import Optional, Sequence, TextIO

from .command_router import CommandRouter
from .config_manager import ConfigManager
from .error_handler import EXIT_OK, ErrorHandler
from .exceptions import CheckFailed
from .lifecycle_manager import LifecycleManager
from .logger_config import setup_logging

logger = logging.getLogger(__name__)


class AppCore:
    """
    Класс ядра приложения.

    Отвечает за разбор аргументов, загрузку конфигурации, запуск подкоманды
    и преобразование исключений в код выхода.
    """

    def __init__(self, router: Optional[CommandRouter] = None,
                 error_handler: Optional[ErrorHandler] = None,
                 stdout: Optional[TextIO] = None):
        """
        Инициализирует основные компоненты приложения.

        Args:
            router (Optional[CommandRouter]): Маршрутизатор подкоманд.
            error_handler (Optional[ErrorHandler]): Обработчик ошибок.
            stdout (Optional[TextIO]): Поток для сводки результатов. По умолчанию sys.stdout.
        """
        self.router = router or CommandRouter()
        self._error_handler = error_handler or ErrorHandler()
        self.stdout = stdout
        self.config_manager: Optional[ConfigManager] = None
        self.lifecycle_manager: Optional[LifecycleManager] = None

    @property
    def error_handler(self) -> ErrorHandler:
        """
        Возвращает экземпляр ErrorHandler.

        Returns:
            ErrorHandler: Обработчик ошибок приложения.
        """
        return self._error_handler

    def cli(self, argv: Sequence[str]) -> int:
        """
        Выполняет одну подкоманду.

        Args:
            argv (Sequence[str]): Аргументы командной строки без имени программы.

        Returns:
            int: 0: успех, 1: проверка не пройдена, 2: ошибка использования.
        """
        try:
            args = self.router.parse(argv)
        except SystemExit as exc:
            # argparse уже напечатал usage
            return int(exc.code) if isinstance(exc.code, int) else 2
        return asyncio.run(self._run(args))

    async def _run(self, args) -> int:
        self.config_manager = ConfigManager(args.config)
        self.lifecycle_manager = LifecycleManager(self.config_manager)
        code = EXIT_OK
        try:
            await self.config_manager.async_init(self.router.overrides(args))
            config = self.config_manager.get_config()
            setup_logging(debug=config.debug, log_file=config.log_file_path)
            logger.debug("Логирование перенастроено с учетом конфигурации (debug=%s).", config.debug)
            await self.lifecycle_manager.startup(args.command)
            result = await self.router.dispatch(args, config, self.lifecycle_manager.runner)  # type: ignore[arg-type]
            if result.resolved:
                self.config_manager.resolve(**result.resolved)
            await self.lifecycle_manager.write_results(result.rows, result.summary)
            out = self.stdout or sys.stdout
            out.write(json.dumps(result.summary, ensure_ascii=False, default=str) + "\n")
            if not result.passed:
                raise CheckFailed(result.failure or f"Проверка {args.command} не пройдена")
        except Exception as err:  # pylint: disable=broad-except
            code = self._error_handler.handle(err)
        finally:
            await self.lifecycle_manager.shutdown(code)
        return code
