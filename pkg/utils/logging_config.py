"""
Logging setup for the CLI and library modules.

Library code logs through logging.getLogger(__name__). Long-running loops
(training epochs, rescue branches) wrap their logger in a ContextLogger so
run id, mode and epoch travel with every record: as key=value pairs on the
console, as top-level keys in JSON lines.
"""
import json
import logging
import sys
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

LINE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
# Record attribute holding the run context
CONTEXT_ATTR = "context"


def _record_context(record: logging.LogRecord) -> Dict[str, Any]:
    return getattr(record, CONTEXT_ATTR, None) or {}


class JSONFormatter(logging.Formatter):
    """One JSON object per record; run context keys are merged at top level"""

    def format(self, record: logging.LogRecord) -> str:
        payload = {
            "timestamp": datetime.fromtimestamp(record.created, timezone.utc).isoformat().replace("+00:00", "Z"),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "function": record.funcName,
            "line": record.lineno,
        }
        if record.exc_info:
            payload["exception"] = self.formatException(record.exc_info)
        for key, value in _record_context(record).items():
            payload.setdefault(key, value)
        return json.dumps(payload, default=str)


class ColoredFormatter(logging.Formatter):
    """Console lines with a coloured level name and trailing key=value context"""

    COLORS = {
        'DEBUG': '\033[36m',
        'INFO': '\033[32m',
        'WARNING': '\033[33m',
        'ERROR': '\033[31m',
        'CRITICAL': '\033[35m',
    }
    RESET = '\033[0m'

    def __init__(self, fmt: str = LINE_FORMAT, use_color: bool = True):
        super().__init__(fmt)
        self.use_color = use_color

    def format(self, record: logging.LogRecord) -> str:
        # Work on a copy: other handlers see the same record
        record = logging.makeLogRecord(record.__dict__)
        if self.use_color:
            record.levelname = f"{self.COLORS.get(record.levelname, '')}{record.levelname}{self.RESET}"
        line = super().format(record)
        context = _record_context(record)
        if context:
            line += " [" + " ".join(f"{key}={value}" for key, value in context.items()) + "]"
        return line


def _handler(handler: logging.Handler, json_logs: bool, use_color: bool) -> logging.Handler:
    handler.setLevel(logging.DEBUG)
    handler.setFormatter(JSONFormatter() if json_logs else ColoredFormatter(use_color=use_color))
    return handler


def setup_logging(
    level: str = "INFO",
    json_logs: bool = False,
    log_file: Optional[str] = None
) -> logging.Logger:
    """
    Configure the root logger. Calling it again replaces earlier handlers.

    Args:
        level: DEBUG, INFO, WARNING, ERROR or CRITICAL
        json_logs: one JSON object per line instead of coloured text
        log_file: also append records here (never coloured)

    Returns:
        The root logger

    Raises:
        ValueError: unknown level name
    """
    numeric = logging.getLevelName(level.upper())
    if not isinstance(numeric, int):
        raise ValueError(f"unknown log level {level!r}")

    root = logging.getLogger()
    root.setLevel(numeric)
    for old in list(root.handlers):
        root.removeHandler(old)
        old.close()

    # stdout carries command output (JSON summaries, CSV tables)
    handlers: List[logging.Handler] = [
        _handler(logging.StreamHandler(sys.stderr), json_logs, use_color=sys.stderr.isatty()),
    ]
    if log_file:
        handlers.append(_handler(logging.FileHandler(log_file, encoding="utf-8"), json_logs, use_color=False))
    for handler in handlers:
        root.addHandler(handler)
    return root


class ContextLogger:
    """Logger wrapper that stamps run context (run id, mode, epoch...) on every record"""

    def __init__(self, logger: logging.Logger, **context: Any):
        self.logger = logger
        self.context: Dict[str, Any] = dict(context)

    def set_context(self, **kwargs: Any) -> None:
        self.context.update(kwargs)

    def clear_context(self) -> None:
        self.context.clear()

    def bind(self, **kwargs: Any) -> "ContextLogger":
        """A new logger carrying this context plus kwargs"""
        return ContextLogger(self.logger, **{**self.context, **kwargs})

    def _log(self, level: int, message: str, **kwargs: Any) -> None:
        if self.logger.isEnabledFor(level):
            self.logger.log(level, message, extra={CONTEXT_ATTR: {**self.context, **kwargs}}, stacklevel=3)

    def debug(self, message: str, **kwargs: Any) -> None:
        self._log(logging.DEBUG, message, **kwargs)

    def info(self, message: str, **kwargs: Any) -> None:
        self._log(logging.INFO, message, **kwargs)

    def warning(self, message: str, **kwargs: Any) -> None:
        self._log(logging.WARNING, message, **kwargs)

    def error(self, message: str, **kwargs: Any) -> None:
        self._log(logging.ERROR, message, **kwargs)
