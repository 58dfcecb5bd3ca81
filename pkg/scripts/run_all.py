"""Run every experiment with default settings into runs/<experiment>."""

import sys

from qmlkit.cli import main
from qmlkit.experiments import EXPERIMENTS

if __name__ == "__main__":
    failed = [name for name in EXPERIMENTS if main([name, *sys.argv[1:]]) != 0]
    if failed:
        print("failed:", ", ".join(failed), file=sys.stderr)
    raise SystemExit(1 if failed else 0)
