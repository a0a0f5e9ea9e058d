# pcpolab/utils/logging.py
from __future__ import annotations
import logging
import os

ENV_VAR = "PCPO_LOG"
LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "warning": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}
FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

_configured = False


def configure(level: str | None = None) -> None:
    """Attach one stream handler to the package root logger.

    `level` wins over the PCPO_LOG environment variable; both default to info.
    """
    global _configured
    root = logging.getLogger("pcpolab")
    raw = (level or os.environ.get(ENV_VAR) or "info").strip().lower()
    lvl = LEVELS.get(raw)
    if not _configured:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(FORMAT))
        root.addHandler(handler)
        root.propagate = False
        _configured = True
    root.setLevel(lvl if lvl is not None else logging.INFO)
    if lvl is None:
        root.warning("unknown %s=%r, using info", ENV_VAR, raw)


def get_logger(name: str) -> logging.Logger:
    if not _configured:
        configure()
    return logging.getLogger(name)
