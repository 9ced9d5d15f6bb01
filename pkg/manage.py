#!/usr/bin/env python
"""Command-line utility for the nodule detection stack."""
import sys


def main():
    """Run the ``cployo`` command group."""
    try:
        from cli import main as run_cli
    except ImportError as exc:
        raise ImportError(
            "Couldn't import the detection stack. Are torch and the packages in "
            "requirements-prod.txt installed and available on your PYTHONPATH?"
        ) from exc
    run_cli(sys.argv[1:])


if __name__ == "__main__":
    main()
