"""
Настройка логирования torus-lab.

stdout занят сводкой результатов, поэтому журнал идёт в stderr или в файл.
Процессы пула испытаний настраиваются отдельно через worker_logging().
"""
import logging
import sys
from pathlib import Path
from typing import Iterable, Optional

# Короткий формат для терминала; в файл пишется и имя процесса пула
CONSOLE_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'
FILE_FORMAT = '%(asctime)s - %(processName)s - %(name)s - %(levelname)s - %(message)s'

# Библиотечные логгеры, которые на INFO только шумят
NOISY_LOGGERS = ("asyncio", "concurrent.futures", "aiofiles")


def quiet_loggers(names: Iterable[str] = NOISY_LOGGERS, level: int = logging.WARNING) -> None:
    """Поднимает уровень перечисленных логгеров до level."""
    for name in names:
        logging.getLogger(name).setLevel(level)


def _make_handler(log_file: Optional[str]) -> logging.Handler:
    if not log_file:
        handler: logging.Handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(CONSOLE_FORMAT))
        return handler
    Path(log_file).parent.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(log_file, encoding='utf-8')
    handler.setFormatter(logging.Formatter(FILE_FORMAT))
    return handler


def setup_logging(debug: bool = False, log_file: Optional[str] = None) -> logging.Handler:
    """
    Настраивает корневой логгер. Вызывается до загрузки конфигурации
    и повторно после неё, заменяя прежний обработчик.

    Args:
        debug (bool): DEBUG вместо INFO.
        log_file (Optional[str]): Файл журнала; каталоги создаются. Если None: stderr.

    Returns:
        logging.Handler: Установленный обработчик.
    """
    level = logging.DEBUG if debug else logging.INFO
    handler = _make_handler(log_file)
    logging.basicConfig(level=level, handlers=[handler], force=True)
    quiet_loggers()

    logger = logging.getLogger(__name__)
    logger.debug("Логирование настроено на уровень %s", logging.getLevelName(level))
    if log_file:
        logger.info("Логи будут записываться в файл: %s", log_file)
    return handler


def worker_logging(level: int = logging.WARNING) -> None:
    """Уровень корневого логгера в процессе пула: пакеты не засоряют журнал."""
    logging.getLogger().setLevel(level)
    quiet_loggers()
