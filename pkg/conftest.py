"""Корневой conftest: регистрация маркеров pytest."""


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: долгие статистические и переборные проверки")
