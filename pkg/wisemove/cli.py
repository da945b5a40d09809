"""
``python -m wisemove`` entry point.  Delegates to the ``wisemove``
management command and maps its failures onto exit codes: 0 on success,
1 on a usage error, 2 on a runtime error.
"""
import sys
from typing import List, Optional

from django.core.management import call_command, get_commands, load_command_class
from django.core.management.base import CommandError

USAGE_ERROR = 1


def _synopsis() -> str:
    command = load_command_class(get_commands()['wisemove'], 'wisemove')
    return command.create_parser('wisemove', 'wisemove').format_usage()


def cli(argv: Optional[List[str]] = None, stdout=None, stderr=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        call_command('wisemove', *argv, stdout=stdout, stderr=stderr)
    except CommandError as e:
        stderr.write(f"{e}\n")
        if e.returncode == USAGE_ERROR:
            stderr.write(_synopsis())
        return e.returncode
    return 0
