import logging

from lagland.utils.logging import configure_third_party_logging, initialize_logging, resolve_log_level


def test_flag_beats_environment(monkeypatch):
    monkeypatch.setenv("LOG_LEVEL", "ERROR")
    assert resolve_log_level("debug") == logging.DEBUG
    assert resolve_log_level() == logging.ERROR


def test_unknown_level_falls_back_to_info(monkeypatch):
    monkeypatch.setenv("LOG_LEVEL", "chatty")
    assert resolve_log_level() == logging.INFO


def test_backends_stay_quiet_unless_debug():
    configure_third_party_logging(enable_verbose=False, logger_names=["jax"])
    assert logging.getLogger("jax").level == logging.WARNING
    configure_third_party_logging(enable_verbose=True, logger_names=["jax"])
    assert logging.getLogger("jax").level == logging.DEBUG


def test_initialize_sets_root_level():
    initialize_logging("WARNING")
    assert logging.getLogger().level == logging.WARNING
    assert logging.getLogger("absl").level == logging.WARNING
    initialize_logging("INFO")
