"""The ``ronin`` console script: ``ronin run ...`` is ``manage.py run ...``."""
import os
import sys


def main(argv=None):
    """Run a ronin command."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'core.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    argv = list(sys.argv[1:] if argv is None else argv)
    execute_from_command_line(['ronin', *argv])


if __name__ == '__main__':
    main()
