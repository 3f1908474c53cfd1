import time
from typing import Callable, Tuple, Type, TypeVar

from utils.logger import get_logger

logger = get_logger(__name__)

T = TypeVar("T")


def call_with_retries(
    fn: Callable[[], T],
    retries: int,
    backoff_base: float,
    retry_on: Tuple[Type[BaseException], ...],
    what: str,
    sleep: Callable[[float], None] = time.sleep,
) -> T:
    """
    Call `fn`, retrying on the given exceptions with exponential backoff.

    Args:
        fn: Zero-argument callable performing one request
        retries: Extra tries after the first call fails
        backoff_base: Delay before the second try; doubles after each failure
        retry_on: Exception types that trigger a retry
        what: Short description used in log lines

    Returns:
        The first successful result

    Raises:
        The last exception once every attempt has failed
    """
    attempts = retries + 1
    for attempt in range(1, attempts + 1):
        try:
            return fn()
        except retry_on as e:
            if attempt == attempts:
                logger.warning("%s failed after %d attempts: %s", what, attempts, e)
                raise
            delay = backoff_base * (2 ** (attempt - 1))
            logger.warning("%s failed (attempt %d/%d): %s; retrying in %.2fs", what, attempt, attempts, e, delay)
            sleep(delay)
    raise RuntimeError("unreachable")
