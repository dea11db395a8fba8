import asyncio
import json

import pytest
from pydantic import ValidationError  # type: ignore

from App.config_manager import SEED_ENV_VAR, ConfigManager, ExperimentConfig, load_config
from App.exceptions import UsageError


def _load(path=None, overrides=None):
    return asyncio.run(load_config(str(path) if path else None, overrides))


@pytest.fixture(autouse=True)
def _no_env_seed(monkeypatch):
    monkeypatch.delenv(SEED_ENV_VAR, raising=False)


def test_defaults_without_file():
    config = _load()
    assert config == ExperimentConfig()
    assert config.n == 4 and config.K == 2.0 and config.window_mode == "uniform"


def test_empty_document_gives_defaults(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{}", encoding="utf-8")
    assert _load(path) == ExperimentConfig()


def test_file_values(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"n": 8, "seed": 42}), encoding="utf-8")
    config = _load(path)
    assert (config.n, config.seed) == (8, 42)


def test_file_values_and_cli_precedence(tmp_path, monkeypatch):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"n": 8, "seed": 42, "trials": 50}), encoding="utf-8")
    monkeypatch.setenv(SEED_ENV_VAR, "7")
    config = _load(path, {"trials": 99, "seed": None})
    assert (config.n, config.seed, config.trials) == (8, 42, 99)


def test_env_seed_is_fallback(monkeypatch):
    monkeypatch.setenv(SEED_ENV_VAR, "17")
    assert _load().seed == 17
    assert _load(overrides={"seed": 3}).seed == 3
    monkeypatch.setenv(SEED_ENV_VAR, "abc")
    with pytest.raises(UsageError):
        _load()


def test_unknown_key_is_named(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"trialz": 10}), encoding="utf-8")
    with pytest.raises(UsageError, match="trialz"):
        _load(path)


@pytest.mark.parametrize("content", ["{not json", "[1, 2]"])
def test_malformed_documents(tmp_path, content):
    path = tmp_path / "config.json"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(UsageError):
        _load(path)


def test_missing_file(tmp_path):
    with pytest.raises(UsageError):
        _load(tmp_path / "absent.json")


@pytest.mark.parametrize("data", [
    {"l": 9, "n": 8},
    {"steps": -1},
    {"focus": [1, 1, 2]},
    {"gamma_probability": "abc"},
    {"gamma_probability": "3/2"},
    {"window_mode": "fixed", "window_start": 10, "horizon": 5},
    {"sizes": [1, 4, 8]},
    {"sextuples": 0},
    {"scaled_n": 2},
])
def test_invalid_values(data):
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate(data)


def test_resolve_fills_derived_values():
    manager = ConfigManager()
    asyncio.run(manager.async_init({"n": 3}))
    resolved = manager.resolve(steps=27, horizon=40)
    assert resolved.steps == 27 and resolved.horizon == 40
    assert manager.get_config().model_dump()["steps"] == 27


def test_helpers():
    config = ExperimentConfig(gamma_probability="1/3", K=1.0)
    assert config.gamma_fraction.denominator == 3
    assert not config.k_condition_holds()
