import io
import json

import pytest
from pydantic import ValidationError  # type: ignore

from App.config_manager import ExperimentConfig
from App.error_handler import EXIT_FAILED, EXIT_USAGE, ErrorHandler
from App.exceptions import (CheckFailed, DomainError, InfiniteDivergenceError, InvariantViolation,
                            ResourceError, UsageError)


def _handle(error):
    stream = io.StringIO()
    code = ErrorHandler(stream).handle(error)
    return code, json.loads(stream.getvalue())


@pytest.mark.parametrize("error, code", [
    (UsageError("bad flag"), EXIT_USAGE),
    (DomainError("n < 2"), EXIT_USAGE),
    (InfiniteDivergenceError("support"), EXIT_USAGE),
    (ResourceError("n > 3"), EXIT_USAGE),
    (CheckFailed("drift"), EXIT_FAILED),
    (InvariantViolation("broken"), EXIT_FAILED),
    (RuntimeError("boom"), EXIT_FAILED),
])
def test_exit_codes(error, code):
    assert _handle(error)[0] == code


def test_validation_details():
    with pytest.raises(ValidationError) as info:
        ExperimentConfig.model_validate({"trials": 0})
    code, body = _handle(info.value)
    assert code == EXIT_USAGE
    assert body["error"] == "Validation Error"
    assert body["details"][0]["loc"] == ["trials"]


def test_check_failed_carries_details():
    code, body = _handle(CheckFailed("M drift", {"m_ok": False}))
    assert code == EXIT_FAILED
    assert body == {"error": "Check Failed", "message": "M drift", "details": {"m_ok": False}}


def test_custom_handler_overrides_default():
    handler = ErrorHandler(io.StringIO())
    handler.add_custom_error_handler(InfiniteDivergenceError, handler.handle_check_failed)
    assert handler.handle(InfiniteDivergenceError("x")) == EXIT_FAILED
    assert handler.handle(DomainError("y")) == EXIT_USAGE
