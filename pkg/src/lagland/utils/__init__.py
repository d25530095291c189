"""
Utility module initialization.
Sets up logging configuration based on environment variables.
"""

from .logging import VERBOSE_LOGGERS, configure_third_party_logging, initialize_logging, resolve_log_level

# Initialize logging when the module is imported
initialize_logging()

__all__ = [
    "VERBOSE_LOGGERS",
    "configure_third_party_logging",
    "initialize_logging",
    "resolve_log_level",
]
