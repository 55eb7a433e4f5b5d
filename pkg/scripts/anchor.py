"""Run the anchor experiment; extra arguments go to the CLI (e.g. --seed 3 --out runs)."""

import sys

from dualmind.cli import main

if __name__ == "__main__":
    sys.exit(main(["experiment", "anchor", *sys.argv[1:]]))
