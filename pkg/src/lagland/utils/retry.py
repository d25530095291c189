import logging
from dataclasses import dataclass
from enum import Enum
from typing import Type

from tenacity import Retrying, before_sleep_log, retry_if_exception_type, stop_after_attempt, wait_none

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RetrySettings:
    """Configuration for numeric retry loops."""
    max_attempts: int
    # relative size of the deterministic seed perturbation on reseeding
    jitter: float
    # factor applied to step counts when a discretized computation is repeated
    step_multiplier: int


class RetryConfig(Enum):
    """Predefined retry configurations for Newton reseeding and loop transport."""

    STRICT = RetrySettings(max_attempts=1, jitter=0.0, step_multiplier=1)
    DEFAULT = RetrySettings(max_attempts=3, jitter=1e-3, step_multiplier=2)
    PERSISTENT = RetrySettings(max_attempts=6, jitter=1e-2, step_multiplier=2)

    @property
    def settings(self) -> RetrySettings:
        """Get the retry settings for this configuration."""
        return self.value


def retrying(config: RetryConfig, exception: Type[Exception]) -> Retrying:
    """
    Build a tenacity retry loop for a numeric computation.

    Usage::

        for attempt in retrying(RetryConfig.DEFAULT, ConvergenceError):
            with attempt:
                k = attempt.retry_state.attempt_number
                ...

    Args:
        config: Retry preset.
        exception: Exception type that triggers another attempt.

    Returns:
        Retrying: iterator of attempts; the last failure is re-raised.
    """
    settings = config.settings
    return Retrying(
        retry=retry_if_exception_type(exception),
        wait=wait_none(),
        stop=stop_after_attempt(settings.max_attempts),
        before_sleep=before_sleep_log(logger, logging.DEBUG),
        reraise=True,
    )
