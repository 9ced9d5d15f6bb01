"""
cployo.settings
~~~~~~~~~~~~~~~

Runtime settings for the nodule detection stack.

Values come from the environment (or a ``.env`` file) through
python-decouple, so CI and laptops can tune threads and logging
without touching code.
"""

import logging
import logging.config
from pathlib import Path
from typing import Any, Dict

from decouple import config

BASE_DIR = Path(__file__).resolve().parent.parent

DEBUG = config("CPLOYO_DEBUG", default=False, cast=bool)

# 0 leaves torch's own default in place
THREADS = config("CPLOYO_THREADS", default=0, cast=int)

DETERMINISTIC = config("CPLOYO_DETERMINISTIC", default=True, cast=bool)

LOG_FILE = config("CPLOYO_LOG_FILE", default="")

DOCS_DIR = BASE_DIR / "docs"

LOG_LEVEL = "DEBUG" if DEBUG else "INFO"


def _build_logging() -> Dict[str, Any]:
    handlers: Dict[str, Any] = {
        "console": {
            "level": LOG_LEVEL,
            "class": "logging.StreamHandler",
            "formatter": "detailed",
            # stdout belongs to the CLI's JSON documents
            "stream": "ext://sys.stderr",
        },
    }
    if LOG_FILE:
        handlers["file"] = {
            "level": LOG_LEVEL,
            "class": "logging.FileHandler",
            "filename": LOG_FILE,
            "formatter": "verbose",
        }

    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "verbose": {
                "format": "{levelname} {asctime} {module} {process:d} {thread:d} {message}",
                "style": "{",
            },
            "detailed": {
                "format": (
                    "%(asctime)s [%(levelname)s] %(name)s (%(filename)s:%(lineno)d) %(message)s"
                )
            },
            "simple": {"format": "%(asctime)s::%(name)s::%(levelname)s::%(message)s"},
        },
        "handlers": handlers,
        "loggers": {
            "": {
                "handlers": list(handlers),
                "level": LOG_LEVEL,
                "propagate": True,
            },
        },
    }


LOGGING = _build_logging()


def configure_logging() -> None:
    """Install the ``LOGGING`` dictConfig for the current process."""
    logging.config.dictConfig(LOGGING)


def configure_threads() -> None:
    """Apply ``CPLOYO_THREADS`` and the determinism switch to torch.

    Imported lazily so that settings stay cheap to load for tools that
    never touch a tensor.
    """
    import torch

    if THREADS > 0:
        torch.set_num_threads(THREADS)
    if DETERMINISTIC:
        torch.use_deterministic_algorithms(True, warn_only=True)
