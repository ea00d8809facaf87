#!/usr/bin/env python
"""Django's command-line utility; also exposes the ronin commands."""
import sys

from core.cli import main


if __name__ == '__main__':
    main(sys.argv[1:])
