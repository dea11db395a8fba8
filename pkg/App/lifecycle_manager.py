"""
Модуль для управления жизненным циклом одного запуска CLI.

Отвечает за подготовку исполнителя испытаний и каталога результатов,
а также за закрытие пула процессов и запись манифеста при завершении,
в том числе после ошибки.
"""
import datetime
import logging
from typing import Any, Dict, List, Optional

from .config_manager import ConfigManager
from .report_models import RunManifest
from .result_writer import ResultWriter
from .schema import SCHEMA_VERSION
from .trial_runner import TrialRunner

logger = logging.getLogger(__name__)


class LifecycleManager:
    """
    Управляет жизненным циклом запуска: startup → выполнение команды → shutdown.
    """

    def __init__(self, config_manager: ConfigManager):
        """
        Инициализирует LifecycleManager.

        Args:
            config_manager (ConfigManager): Экземпляр ConfigManager для доступа к конфигурации.
        """
        self.config_manager = config_manager
        self.subcommand: Optional[str] = None
        self.runner: Optional[TrialRunner] = None
        self.writer: Optional[ResultWriter] = None
        self.outputs: Dict[str, str] = {}
        self._started_at: Optional[str] = None

    def _initialize_runner(self, config: Any):
        """Создаёт исполнитель испытаний с заданным числом процессов."""
        self.runner = TrialRunner(threads=config.threads, batch_size=config.batch_size)
        logger.debug("Исполнитель испытаний создан: threads=%d, batch_size=%d.",
                     config.threads, config.batch_size)

    def _initialize_writer(self, config: Any):
        """Готовит каталог и объект записи результатов."""
        self.writer = ResultWriter(config.out_dir, self.subcommand or "run", config.format)
        self.writer.out_dir.mkdir(parents=True, exist_ok=True)
        logger.debug("Каталог результатов: %s", self.writer.out_dir)

    def _check_constants(self, config: Any):
        if not config.k_condition_holds():
            logger.warning("Условие на K не выполнено: e^{-(2K-1)^2/3} > 1/(2e√3) при K=%s", config.K)

    def _close_runner(self):
        """Останавливает пул процессов."""
        if self.runner:
            self.runner.close()
            logger.debug("Исполнитель испытаний закрыт.")
        else:
            logger.debug("Исполнитель испытаний не был создан.")

    def manifest(self, status: str, exit_code: Optional[int]) -> RunManifest:
        config = self.config_manager.get_config()
        return RunManifest(subcommand=self.subcommand or "", config=config.model_dump(),
                           outputs=dict(self.outputs), schema_version=SCHEMA_VERSION,
                           timestamp=self._started_at or _now(), status=status,  # type: ignore[arg-type]
                           exit_code=exit_code)

    async def startup(self, subcommand: str):
        """
        Выполняет операции запуска: исполнитель испытаний, каталог результатов,
        проверка констант.

        Args:
            subcommand (str): Имя выполняемой подкоманды.
        """
        self.subcommand = subcommand
        self._started_at = _now()
        config = self.config_manager.get_config()
        self._initialize_runner(config)
        self._initialize_writer(config)
        self._check_constants(config)
        logger.info("Запуск подкоманды %s (seed=%d, trials=%d).", subcommand, config.seed, config.trials)

    async def write_results(self, rows: List[Dict[str, Any]], summary: Dict[str, Any]):
        """Записывает строки и сводку; пути попадают в манифест."""
        if not self.writer:
            raise RuntimeError("ResultWriter не инициализирован перед записью результатов.")
        self.outputs = await self.writer.write(rows, summary)

    async def shutdown(self, exit_code: int):
        """
        Выполняет операции завершения: закрывает пул и пишет манифест
        (даже если команда завершилась ошибкой).

        Args:
            exit_code (int): Код выхода запуска.
        """
        self._close_runner()
        if self.writer is None:
            logger.info("Запуск завершён до инициализации, манифест не записан.")
            return
        status = {0: "ok", 1: "failed"}.get(exit_code, "error")
        try:
            await self.writer.write_manifest(self.manifest(status, exit_code))
            self.outputs.setdefault("manifest", str(self.writer.manifest_path))
        except IOError as err:
            logger.error("Не удалось записать манифест: %s", err, exc_info=True)
        logger.info("Подкоманда %s завершена с кодом %d.", self.subcommand, exit_code)


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
