import logging
import sys

import pytest

from App.logger_config import (CONSOLE_FORMAT, FILE_FORMAT, NOISY_LOGGERS, quiet_loggers, setup_logging,
                               worker_logging)
from App.trial_runner import _init_worker


@pytest.fixture(autouse=True)
def _restore_root_logger():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    noisy = {name: logging.getLogger(name).level for name in NOISY_LOGGERS}
    yield
    for handler in root.handlers:
        if handler not in handlers:
            handler.close()
    root.handlers[:] = handlers
    root.setLevel(level)
    for name, value in noisy.items():
        logging.getLogger(name).setLevel(value)


def test_console_handler_by_default():
    handler = setup_logging()
    root = logging.getLogger()
    assert root.handlers == [handler]
    assert isinstance(handler, logging.StreamHandler) and handler.stream is sys.stderr
    assert handler.formatter._fmt == CONSOLE_FORMAT
    assert root.level == logging.INFO


def test_file_handler_creates_directories(tmp_path):
    target = tmp_path / "logs" / "nested" / "lab.log"
    handler = setup_logging(debug=True, log_file=str(target))
    assert isinstance(handler, logging.FileHandler)
    assert handler.formatter._fmt == FILE_FORMAT
    assert logging.getLogger().level == logging.DEBUG
    logging.getLogger("App.mc_experiments").info("оценка готова")
    handler.flush()
    text = target.read_text(encoding="utf-8")
    assert "MainProcess" in text and "оценка готова" in text


def test_repeated_setup_replaces_handler(tmp_path):
    first = setup_logging()
    second = setup_logging(log_file=str(tmp_path / "lab.log"))
    assert logging.getLogger().handlers == [second]
    assert first is not second


def test_noisy_loggers_are_quieted():
    for name in NOISY_LOGGERS:
        logging.getLogger(name).setLevel(logging.DEBUG)
    setup_logging(debug=True)
    assert all(logging.getLogger(name).level == logging.WARNING for name in NOISY_LOGGERS)
    quiet_loggers(["App.trial_runner"], logging.ERROR)
    assert logging.getLogger("App.trial_runner").level == logging.ERROR
    logging.getLogger("App.trial_runner").setLevel(logging.NOTSET)


def test_worker_logging_raises_root_level():
    setup_logging(debug=True)
    worker_logging()
    assert logging.getLogger().level == logging.WARNING
    logging.getLogger().setLevel(logging.DEBUG)
    _init_worker()
    assert logging.getLogger().level == logging.WARNING
