import os
import sys

import django


def main():
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "wisemove_service.settings")
    django.setup()

    from wisemove.cli import cli

    sys.exit(cli())


if __name__ == "__main__":
    main()
