#!/usr/bin/env python
"""
Command-line utility for the planning service: migrations, the development
server, the test runner and the ``wisemove`` run/evaluate/verify/render command.
"""
import os
import sys


def main():
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "wisemove_service.settings")
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Install the dependencies with "
            "'pip install -r requirements.txt' inside the project's virtual environment."
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == "__main__":
    main()
