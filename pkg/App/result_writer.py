"""
Модуль записи результатов запуска: CSV-строки, JSON-сводка и манифест.

Все файлы пишутся асинхронно через aiofiles; три файла одного запуска
пишутся параллельно внутри asyncio.TaskGroup.
"""
import asyncio
import csv
import io
import json
from pathlib import Path
from typing import Any, Dict, List, Optional
import logging

import aiofiles  # type: ignore

from .exceptions import InvariantViolation
from .report_models import RunManifest
from .schema import SCHEMA_VERSION, columns_for

logger = logging.getLogger(__name__)


def render_csv(subcommand: str, rows: List[Dict[str, Any]]) -> str:
    """
    Сериализует строки в CSV: разделитель ',', окончания '\\n', строка заголовка.

    Raises:
        InvariantViolation: Если набор ключей строки не совпадает со схемой.
    """
    columns = columns_for(subcommand)
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        if set(row) != set(columns):
            raise InvariantViolation(f"Строка {sorted(row)} не соответствует схеме {subcommand}: {columns}")
        writer.writerow(row)
    return buffer.getvalue()


class ResultWriter:
    """
    Класс записи результатов одного запуска в каталог out_dir.

    Имена файлов: <subcommand>.csv, <subcommand>.summary.json, <subcommand>.manifest.json.
    """

    def __init__(self, out_dir: str, subcommand: str, fmt: str = "csv"):
        self.out_dir = Path(out_dir)
        self.subcommand = subcommand
        self.fmt = fmt
        stem = subcommand.replace("-", "_")
        self.csv_path = self.out_dir / f"{stem}.csv"
        self.summary_path = self.out_dir / f"{stem}.summary.json"
        self.manifest_path = self.out_dir / f"{stem}.manifest.json"

    async def _write_text(self, path: Path, text: str) -> None:
        try:
            async with aiofiles.open(path, mode='w', encoding='utf-8', newline='') as f:
                await f.write(text)
            logger.debug("Файл записан: %s", path)
        except IOError as err:
            logger.error("Ошибка записи файла %s: %s", path, err, exc_info=True)
            raise

    def outputs(self) -> Dict[str, str]:
        files = {"summary": str(self.summary_path), "manifest": str(self.manifest_path)}
        if self.fmt == "csv":
            files["rows"] = str(self.csv_path)
        return files

    async def write(self, rows: List[Dict[str, Any]], summary: Dict[str, Any],
                    manifest: Optional[RunManifest] = None) -> Dict[str, str]:
        """
        Записывает строки, сводку и (если передан) манифест.

        При format == 'json' строки попадают в сводку под ключом "rows".

        Returns:
            Dict[str, str]: Пути записанных файлов.
        """
        self.out_dir.mkdir(parents=True, exist_ok=True)
        document = {"schema_version": SCHEMA_VERSION, "subcommand": self.subcommand, **summary}
        if self.fmt == "json":
            document["rows"] = rows
            csv_text = None
        else:
            csv_text = render_csv(self.subcommand, rows)
        failed: Optional[BaseException] = None
        try:
            async with asyncio.TaskGroup() as tg:
                if csv_text is not None:
                    tg.create_task(self._write_text(self.csv_path, csv_text))
                tg.create_task(self._write_text(self.summary_path,
                                                json.dumps(document, indent=4, ensure_ascii=False,
                                                           default=str) + "\n"))
                if manifest is not None:
                    tg.create_task(self.write_manifest(manifest))
        except* IOError as eg:
            for err in eg.exceptions:
                logger.error("Ошибка при записи результатов: %s", err)
            failed = eg.exceptions[0]
        if failed is not None:
            # наружу уходит первое исходное исключение, а не группа
            raise failed
        logger.info("Результаты записаны в %s", self.out_dir)
        return self.outputs()

    async def write_manifest(self, manifest: RunManifest) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        await self._write_text(self.manifest_path, manifest.model_dump_json(indent=4) + "\n")
