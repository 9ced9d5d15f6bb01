"""
cli.output
~~~~~~~~~~

Result documents and the exception to exit-code mapping shared by every
command.

In ``json`` mode a command writes exactly one document to stdout:
``{"status": "success", "command": ..., "data": {...}}`` or
``{"status": "error", "command": ..., "error": ..., "error_type": ...,
"exit_code": ...}``. Logs go to stderr.
"""

import functools
import json
import logging
from typing import Any, Callable, Dict, List, Mapping, NoReturn, Optional

import click
import pandas as pd
from pydantic import ValidationError

from cployo.errors import DataError, NumericError

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

FORMATS = ("json", "text")


def format_option(func: Callable) -> Callable:
    """Add the shared ``--format json|text`` option."""
    return click.option(
        "--format",
        "fmt",
        type=click.Choice(FORMATS),
        default="json",
        show_default=True,
        help="Machine-readable JSON or plain text.",
    )(func)


def frame_records(df: pd.DataFrame) -> List[Dict[str, Any]]:
    """DataFrame rows as plain JSON values (numpy scalars converted, NaN as null)."""
    return json.loads(df.to_json(orient="records"))


def _text_lines(data: Mapping[str, Any], prefix: str = "") -> List[str]:
    lines: List[str] = []
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            lines.extend(_text_lines(value, f"{name}."))
        elif isinstance(value, list) and value and all(isinstance(v, Mapping) for v in value):
            lines.append(f"{name}:")
            lines.append(pd.json_normalize(value).to_string(index=False))
        else:
            lines.append(f"{name}: {value}")
    return lines


def emit(command: str, data: Mapping[str, Any], fmt: str) -> None:
    """Write a success document, or ``key: value`` lines for text output."""
    if fmt == "json":
        doc = {"status": "success", "command": command, "data": data}
        click.echo(json.dumps(doc, sort_keys=True))
    else:
        click.echo("\n".join(_text_lines(data)))


def fail(command: str, exc: BaseException, code: int, fmt: str) -> NoReturn:
    """Report ``exc`` in the requested format and stop with ``code``."""
    log.debug("%s failed with exit code %d", command, code, exc_info=exc)
    if fmt == "json":
        doc = {
            "status": "error",
            "command": command,
            "error": str(exc),
            "error_type": type(exc).__name__,
            "exit_code": code,
        }
        click.echo(json.dumps(doc, sort_keys=True))
    else:
        click.echo(f"Error: {exc}", err=True)
    raise click.exceptions.Exit(code)


def handled(func: Callable[..., Optional[Mapping[str, Any]]]) -> Callable[..., None]:
    """Emit a command's returned data, or map its exception to an exit code.

    ``NumericError`` exits 3; ``DataError``, ``OSError`` and pydantic
    validation failures exit 2.
    """

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> None:
        """Run the command and emit its data or its failure."""
        fmt = kwargs.get("fmt", "json")
        command = click.get_current_context().info_name or func.__name__
        try:
            data = func(*args, **kwargs)
        except NumericError as exc:
            fail(command, exc, EXIT_NUMERIC, fmt)
        except (DataError, OSError, ValidationError) as exc:
            fail(command, exc, EXIT_DATA, fmt)
        emit(command, data or {}, fmt)

    return wrapper
