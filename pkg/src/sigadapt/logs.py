"""
Line-delimited structured log events.

Library modules only create loggers; :func:`configure_logging` is called by the command line.
Structured fields travel in ``extra={"fields": {...}}``.
"""
import json
import logging
import sys
from typing import Any, Dict, Optional, TextIO

from sigadapt.manifest import dumps_record

ROOT_LOGGER = "sigadapt"


class JsonLinesFormatter(logging.Formatter):
    """
    One JSON object per record: ``level``, ``logger``, ``event`` and the record's structured fields.

    .. code-block:: python3

        >>> rec = logging.LogRecord("sigadapt.x", logging.WARNING, "", 0, "short stream", None, None)
        >>> rec.fields = {"samples": 10}
        >>> JsonLinesFormatter().format(rec)
        '{"event":"short stream","level":"warning","logger":"sigadapt.x","samples":10}'
    """

    def format(self, record: logging.LogRecord) -> str:
        event: Dict[str, Any] = {
            "level": record.levelname.lower(),
            "logger": record.name,
            "event": record.getMessage(),
        }
        extra = getattr(record, "fields", None)
        if isinstance(extra, dict):
            for key, value in extra.items():
                event.setdefault(key, value)
        if record.exc_info and record.exc_info[1] is not None:
            event["error"] = str(record.exc_info[1])
        try:
            return dumps_record(event)
        except (TypeError, ValueError):
            return json.dumps(event, sort_keys=True, default=str)


def configure_logging(level: int = logging.INFO, stream: Optional[TextIO] = None) -> logging.Handler:
    """Send sigadapt events at *level* and above to *stream* (standard error by default)"""
    handler = logging.StreamHandler(stream if stream is not None else sys.stderr)
    handler.setFormatter(JsonLinesFormatter())
    logger = logging.getLogger(ROOT_LOGGER)
    for old in list(logger.handlers):
        if isinstance(old.formatter, JsonLinesFormatter):
            logger.removeHandler(old)
    logger.addHandler(handler)
    logger.setLevel(level)
    return handler
