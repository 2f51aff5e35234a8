#!/usr/bin/env python3
"""Emit the allowable-failure-ratio curve as CSV figure data."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from sleepy_tob.cli import main

if __name__ == "__main__":
    args = sys.argv[1:] or ["--beta", "1/3", "--steps", "100", "--out", "beta_tilde_curve.csv"]
    sys.exit(main(["sweep-beta", *args]))
