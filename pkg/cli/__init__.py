"""
cli
~~~

The ``cployo`` command line.
"""

from .commands import cli, main
from .gradsuite import GradSuiteFactory, check_block, run_suite
from .output import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE

__all__ = [
    "EXIT_DATA",
    "EXIT_NUMERIC",
    "EXIT_OK",
    "EXIT_USAGE",
    "GradSuiteFactory",
    "check_block",
    "cli",
    "main",
    "run_suite",
]
