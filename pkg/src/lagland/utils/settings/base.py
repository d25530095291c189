import os
from pathlib import Path
from typing import Iterable, Self

from dotenv import dotenv_values
from loguru import logger
from pydantic_settings import BaseSettings, SettingsConfigDict

ENV_FILE_VARIABLE = "LAGLAND_ENV_FILE"
DEFAULT_ENV_PATH = Path(".envs")
DEFAULT_ENV_FILE_CANDIDATES = [
    DEFAULT_ENV_PATH.joinpath("local.env"),
    DEFAULT_ENV_PATH.joinpath("dev.env"),
]


def find_env_file_if_exists() -> Path | None:
    """
    Locate the settings file read at import time.

    LAGLAND_ENV_FILE wins when it is set and points at an existing file;
    otherwise the first existing default candidate is used. None means the
    process environment alone.
    """
    override = os.environ.get(ENV_FILE_VARIABLE)
    if override:
        if Path(override).exists():
            logger.info(f"Using env file from {ENV_FILE_VARIABLE}: {override}")
            return Path(override)
        logger.warning(f"{ENV_FILE_VARIABLE}={override} does not exist, falling back to defaults")
    for env_path in DEFAULT_ENV_FILE_CANDIDATES:
        if env_path.exists():
            logger.info(f"Found env file: {env_path}")
            return env_path
    logger.debug("Loading settings from System Environment")
    return None


def settings_keys(classes: Iterable[type[BaseSettings]]) -> set[str]:
    return {name.upper() for cls in classes for name in cls.model_fields}


def check_env_file(env_path: str | Path, classes: Iterable[type[BaseSettings]]) -> dict[str, str]:
    """
    Read a key=value settings file and check it against the settings classes
    that will load it.

    Keys without a value are an error. Keys no class knows are logged and
    ignored, as the settings classes themselves ignore them.

    Returns:
        The key/value pairs, keys upper-cased.

    Raises:
        FileNotFoundError: the file does not exist.
        ValueError: a key has no value.
    """
    env_path = Path(env_path)
    if not env_path.exists():
        raise FileNotFoundError(f"Env file {env_path} does not exist.")

    values = {key.upper(): value for key, value in dotenv_values(env_path).items()}
    missing = sorted(key for key, value in values.items() if value is None)
    if missing:
        raise ValueError(f"{env_path}: no value for {', '.join(missing)} (expected KEY=value)")

    unknown = sorted(set(values) - settings_keys(classes))
    if unknown:
        logger.warning(f"{env_path}: ignoring unknown keys {', '.join(unknown)}")
    return values


class ABCBaseSettings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=find_env_file_if_exists(),
        env_file_encoding="utf-8",
        extra="ignore",
        case_sensitive=False,
    )

    @classmethod
    def from_env_file(cls, env_path: str | Path) -> Self:
        """
        Load settings from a specific key=value file, on top of the process
        environment.

        Raises:
            FileNotFoundError: the file does not exist.
            pydantic.ValidationError: a value does not validate.
        """
        env_path = Path(env_path)
        if not env_path.exists():
            raise FileNotFoundError(f"Env file {env_path} does not exist.")

        class CustomSettings(cls):  # dynamically override model_config
            model_config = SettingsConfigDict(
                env_file=env_path,
                env_file_encoding="utf-8",
                extra="ignore",
                case_sensitive=False,
            )

        logger.debug(f"Loaded {cls.__name__} from {env_path}")
        return CustomSettings()
