#!/usr/bin/env python3
"""Entry point: ``python seanet.py <command> [flags]`` (see services/cli.py)."""

import sys

from services.cli import main

if __name__ == "__main__":
    sys.exit(main())
