"""Wall clock time tracking for long tasks.

Dataset generation, training runs and evaluation sweeps are wrapped in
:py:func:`timed_task` so their duration shows up in the logs.
"""

import contextlib
import datetime
import logging
from contextlib import contextmanager

logger = logging.getLogger(__name__)


@contextmanager
def timed_task(task_name: str, **context_info) -> contextlib.AbstractContextManager[None]:
    """Log the start and the duration of a task.

    .. code-block:: python

        with timed_task("train", steps=500):
            train(...)
    """
    started = datetime.datetime.now(datetime.timezone.utc)
    if context_info:
        logger.info("Starting task %s, context is %s", task_name, context_info)
    else:
        logger.info("Starting task %s", task_name)

    try:
        yield
    finally:
        duration = datetime.datetime.now(datetime.timezone.utc) - started
        logger.info("Ended task %s, took %s", task_name, duration)
