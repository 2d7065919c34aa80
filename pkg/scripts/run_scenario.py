#!/usr/bin/env python3
"""Run one command for one scenario config.

Thin wrapper over the package front end, kept separate so experiments can
be launched without installing console scripts::

    python3 scripts/run_scenario.py --config scenarios/pendulum.yaml \
        --command homogenize --out-dir out/pendulum
"""

import sys

from effham.cli import main

if __name__ == "__main__":
    sys.exit(main())
