"""Console logging for command-line runs and the test suite."""

import logging
from logging import Logger

try:
    import coloredlogs
except ImportError:
    # The core library runs without the cli extra,
    # see test_optional_dependencies.py
    pass


def quiet_libraries():
    # Font cache and backend chatter on import
    logging.getLogger("matplotlib").setLevel(logging.WARNING)
    logging.getLogger("PIL").setLevel(logging.WARNING)


def setup_logging(log_level: str | int = logging.INFO) -> Logger:
    """Setup root logger and quiet some levels.

    :param log_level:
        Level name or number. `disabled` leaves logging untouched for unit tests.
    """

    if log_level == "disabled":
        # Special unit test marker, don't mess with loggers
        return logging.getLogger()

    if isinstance(log_level, str):
        log_level = log_level.upper()

    logger = logging.getLogger()

    # Set log format to display the logger name to hunt down verbose modules
    fmt = "%(asctime)s %(name)-50s %(levelname)-8s %(message)s"

    coloredlogs.install(level=log_level, fmt=fmt, logger=logger)

    quiet_libraries()

    return logger


def setup_pytest_logging(request=None) -> logging.Logger:
    """Setup logger in pytest environment.

    :param request:
        pytest.fixtures.SubRequest instance

    :return:
        Test logger - though please use module specific logger
    """
    quiet_libraries()
    return logging.getLogger("test")
