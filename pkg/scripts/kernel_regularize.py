"""Run the kernel-regularize experiment; extra arguments are passed to the CLI."""

import sys

from qmlkit.cli import main

if __name__ == "__main__":
    raise SystemExit(main(["kernel-regularize", *sys.argv[1:]]))
