import io
import json
import logging
import sys

from sigadapt.logs import ROOT_LOGGER, JsonLinesFormatter, configure_logging


def test_formatter_fields() -> None:
    record = logging.LogRecord("sigadapt.edf", logging.INFO, "", 0, "read %d records", (3,), None)
    record.fields = {"path": "a.edf", "level": "overridden"}
    event = json.loads(JsonLinesFormatter().format(record))
    assert event == {"level": "info", "logger": "sigadapt.edf", "event": "read 3 records", "path": "a.edf"}


def test_formatter_exception() -> None:
    try:
        raise ValueError("boom")
    except ValueError:
        record = logging.LogRecord("sigadapt", logging.ERROR, "", 0, "failed", None, sys.exc_info())
    assert json.loads(JsonLinesFormatter().format(record))["error"] == "boom"


def test_formatter_unserializable_field() -> None:
    record = logging.LogRecord("sigadapt", logging.INFO, "", 0, "x", None, None)
    record.fields = {"what": object()}
    assert json.loads(JsonLinesFormatter().format(record))["what"].startswith("<object")


def test_configure_logging() -> None:
    stream = io.StringIO()
    logger = logging.getLogger(ROOT_LOGGER)
    handler = configure_logging(logging.WARNING, stream)
    try:
        # reconfiguring replaces the earlier handler
        handler = configure_logging(logging.WARNING, stream)
        assert sum(isinstance(h.formatter, JsonLinesFormatter) for h in logger.handlers) == 1
        logging.getLogger("sigadapt.text").info("hidden")
        logging.getLogger("sigadapt.text").warning("shown", extra={"fields": {"id": "x"}})
        lines = stream.getvalue().splitlines()
        assert len(lines) == 1
        assert json.loads(lines[0]) == {
            "level": "warning",
            "logger": "sigadapt.text",
            "event": "shown",
            "id": "x",
        }
    finally:
        logger.removeHandler(handler)
        logger.setLevel(logging.NOTSET)
