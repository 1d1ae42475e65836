#!/usr/bin/env python3
"""Run the nettmle CLI from a source checkout without installing.

Usage:
    python run.py run --config configs/smoke.yaml
    python run.py series --summary results/smoke/summary.csv --metric bias
"""

import os
import sys

_PROJECT_ROOT = os.path.dirname(os.path.abspath(__file__))

# Add src/ so the package imports without pip install.
sys.path.insert(0, os.path.join(_PROJECT_ROOT, "src"))

from nettmle.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
