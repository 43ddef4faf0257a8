"""
Logging setup for the voxel scene completion pipeline.

Messages are rendered with a bracketed tag, e.g. ``[TRAIN] step 10 ...`` or
``[REGISTRY ERROR] ...``. Set ``SSC_SILENT=1`` to drop informational output
and ``SSC_LOG_LEVEL`` to pick an explicit level.
"""

import logging
import os
import sys

_ROOT_NAME = "ssc"
_CONFIGURED = False


class TagFormatter(logging.Formatter):
    """Format records as ``[TAG] message`` with a level suffix for problems."""

    def format(self, record: logging.LogRecord) -> str:
        tag = record.name.rsplit(".", 1)[-1].upper()
        if record.levelno >= logging.ERROR:
            tag = f"{tag} ERROR"
        elif record.levelno >= logging.WARNING:
            tag = f"{tag} WARNING"
        message = f"[{tag}] {record.getMessage()}"
        if record.exc_info:
            message = f"{message}\n{self.formatException(record.exc_info)}"
        return message


def _resolve_level() -> int:
    explicit = os.getenv("SSC_LOG_LEVEL")
    if explicit:
        level = logging.getLevelName(explicit.upper())
        if isinstance(level, int):
            return level
    if os.getenv("SSC_SILENT"):
        return logging.WARNING
    return logging.INFO


def configure_logging(force: bool = False) -> None:
    """Attach the stderr handler to the package root logger (idempotent)."""
    global _CONFIGURED
    if _CONFIGURED and not force:
        return

    root = logging.getLogger(_ROOT_NAME)
    for handler in list(root.handlers):
        root.removeHandler(handler)

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(TagFormatter())
    root.addHandler(handler)
    root.setLevel(_resolve_level())
    root.propagate = False
    _CONFIGURED = True


def get_logger(tag: str) -> logging.Logger:
    """
    Get a tagged logger.

    Args:
        tag: Short component name, rendered upper-cased in brackets

    Returns:
        Logger under the package root
    """
    configure_logging()
    return logging.getLogger(f"{_ROOT_NAME}.{tag.lower()}")
