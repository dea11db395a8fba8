"""
Основной скрипт запуска torus-lab.

Пример:
    python run.py equiv-check --n 3
    python run.py couple --n 8 --l 2 --trials 10000 --threads 4
"""

import logging
import sys

from App.init import AppCore
from App.logger_config import setup_logging

# Временно устанавливаем debug=False, так как конфигурация еще не загружена.
setup_logging(debug=False)
logger = logging.getLogger(__name__)


def main() -> int:
    try:
        return AppCore().cli(sys.argv[1:])
    except KeyboardInterrupt:
        logger.info("Запуск прерван пользователем")
        return 130


if __name__ == '__main__':
    sys.exit(main())
