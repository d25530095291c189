"""
Logging setup for the verification tool and its numerical dependencies.

jax and absl log backend selection and compilation cache notices at INFO;
those stay at WARNING unless LOG_LEVEL=DEBUG.
"""
import logging
import os
from typing import Dict, List, Optional

VERBOSE_LOGGERS = [
    "jax",
    "jax._src",
    "jax._src.xla_bridge",
    "jax._src.dispatch",
    "absl",
]

LOG_LEVEL_MAP: Dict[str, int] = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
    "CRITICAL": logging.CRITICAL,
}

DEFAULT_LOG_LEVEL = "INFO"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def resolve_log_level(name: Optional[str] = None) -> int:
    """
    Level from ``name`` or the LOG_LEVEL environment variable; unknown names fall back to INFO.
    """
    name = (name or os.environ.get("LOG_LEVEL", DEFAULT_LOG_LEVEL)).upper()
    return LOG_LEVEL_MAP.get(name, logging.INFO)


def configure_third_party_logging(enable_verbose: bool = False, logger_names: Optional[List[str]] = None) -> None:
    """
    Set jax/absl loggers to DEBUG when ``enable_verbose``, otherwise to WARNING.

    Args:
        enable_verbose: let the numerical backends log everything.
        logger_names: loggers to configure; defaults to VERBOSE_LOGGERS.
    """
    level = logging.DEBUG if enable_verbose else logging.WARNING
    for logger_name in logger_names or VERBOSE_LOGGERS:
        third_party = logging.getLogger(logger_name)
        third_party.setLevel(level)
        for handler in third_party.handlers:
            handler.setLevel(level)


def initialize_logging(level: Optional[str] = None) -> None:
    """
    Configure the root logger; later calls only change the level.

    The run report goes to stdout; log records go to stderr so that
    ``--format json`` output stays machine readable.
    """
    log_level = resolve_log_level(level)
    logging.basicConfig(level=log_level, format=LOG_FORMAT)
    logging.getLogger().setLevel(log_level)
    configure_third_party_logging(enable_verbose=log_level <= logging.DEBUG)
    logging.getLogger(__name__).debug(f"logging initialized at {logging.getLevelName(log_level)}")
