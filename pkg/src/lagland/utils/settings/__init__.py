from .base import ABCBaseSettings, check_env_file, find_env_file_if_exists
from .core import ModelSettings, NumericSettings, RunSettings

__all__ = [
    "ABCBaseSettings",
    "ModelSettings",
    "NumericSettings",
    "RunSettings",
    "check_env_file",
    "find_env_file_if_exists",
]
