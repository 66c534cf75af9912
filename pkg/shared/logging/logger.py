"""
Logger Implementation
=====================

Configures structlog for the engine's command line and scripts:
- log lines on stderr only, so stdout stays free for tables and JSON
- JSON lines (`--json-logs`) or a colored console renderer
- run context (command, config hash) bound per invocation
- tensors, numpy scalars, paths and enums rendered as plain values

Version: 0.1.0
"""

import logging
import sys
from collections.abc import Iterator
from contextlib import contextmanager
from enum import Enum
from pathlib import PurePath
from typing import TYPE_CHECKING, Any

import structlog
from structlog.types import EventDict, Processor, WrappedLogger


if TYPE_CHECKING:
    from structlog.stdlib import BoundLogger


ENGINE_NAME = "feedback-engine"
ENGINE_VERSION = "0.1.0"

# third-party loggers that chatter at INFO while plotting
_QUIET_LOGGERS = ("matplotlib", "PIL")


def _engine_context(_: WrappedLogger, __: str, event_dict: EventDict) -> EventDict:
    event_dict.setdefault("service", ENGINE_NAME)
    event_dict.setdefault("version", ENGINE_VERSION)
    return event_dict


def _plain_value(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, PurePath):
        return str(value)
    item = getattr(value, "item", None)
    if callable(item) and getattr(value, "ndim", None) == 0:
        return item()
    if isinstance(value, tuple):
        return [_plain_value(v) for v in value]
    return value


def _plain_values(_: WrappedLogger, __: str, event_dict: EventDict) -> EventDict:
    """Render 0-d tensors, numpy scalars, paths and enums as JSON-friendly values."""
    for key, value in list(event_dict.items()):
        event_dict[key] = _plain_value(value)
    return event_dict


def _level(log_level: str) -> int:
    level = logging.getLevelName(log_level.upper())
    if not isinstance(level, int):
        raise ValueError(f"unknown log level {log_level!r}")
    return level


def _renderer(json_logs: bool) -> tuple[Processor, Processor]:
    """Exception processor and final renderer for the chosen output."""
    if json_logs:
        return structlog.processors.format_exc_info, structlog.processors.JSONRenderer()
    console = structlog.dev.ConsoleRenderer(
        colors=sys.stderr.isatty(),
        exception_formatter=structlog.dev.RichTracebackFormatter(show_locals=False, max_frames=10),
    )
    return structlog.dev.set_exc_info, console


def setup_logging(
    log_level: str = "INFO",
    json_logs: bool = False,
    service_name: str = ENGINE_NAME,
) -> None:
    """
    Configure structlog and the stdlib root logger.

    Args:
        log_level: DEBUG, INFO, WARNING, ERROR or CRITICAL
        json_logs: One JSON object per line instead of console output
        service_name: Bound as ``service`` on every line

    Raises:
        ValueError: If the log level is unknown
    """
    level = _level(log_level)
    for name in _QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)

    exc_processor, renderer = _renderer(json_logs)
    shared_processors: list[Processor] = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        structlog.processors.TimeStamper(fmt="iso", utc=True, key="timestamp"),
        _engine_context,
        _plain_values,
        structlog.processors.StackInfoRenderer(),
        structlog.processors.UnicodeDecoder(),
        exc_processor,
    ]

    structlog.configure(
        processors=[*shared_processors, structlog.stdlib.ProcessorFormatter.wrap_for_formatter],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(
        structlog.stdlib.ProcessorFormatter(
            foreign_pre_chain=shared_processors,
            processors=[structlog.stdlib.ProcessorFormatter.remove_processors_meta, renderer],
        )
    )
    root = logging.getLogger()
    root.handlers.clear()
    root.addHandler(handler)
    root.setLevel(level)
    bind_context(service=service_name)


def get_logger(name: str | None = None) -> "BoundLogger":
    """
    Structured logger for a module.

    Example:
        logger = get_logger(__name__)
        logger.info("train_step", batch=12, loss=3.41)
    """
    return structlog.stdlib.get_logger(name)


def bind_context(**kwargs: Any) -> None:
    """
    Bind values to every later log line of this context.

    Example:
        bind_context(config_hash="3fa2c0d19e7b4411")
        logger.info("bler_point")  # carries config_hash
    """
    structlog.contextvars.bind_contextvars(**kwargs)


def clear_context() -> None:
    structlog.contextvars.clear_contextvars()


@contextmanager
def run_context(**kwargs: Any) -> Iterator[None]:
    """
    Bind values for one command; on exit the context is restored to what it was,
    including anything bound inside the block.

    Example:
        with run_context(command="sweep"):
            ...
    """
    previous = structlog.contextvars.get_contextvars()
    bind_context(**kwargs)
    try:
        yield
    finally:
        clear_context()
        bind_context(**previous)
