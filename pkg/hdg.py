#!/usr/bin/env python3
"""
hdlab - run one experiment per invocation.

    python hdg.py shell-prob --n 1000 --alpha 0.01 --samples 100000 --seed 7
    python hdg.py report runs/shell-prob runs/dilation --output runs/report
"""
import sys

import config
from commands.cli import main

if __name__ == "__main__":
    config.setup_logging()
    sys.exit(main())
