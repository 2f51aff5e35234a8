#!/usr/bin/env python3
"""Randomized adversarial campaign under the bounded-churn model: many
generated schedules, both built-in window attacks, aggregated verdicts."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from sleepy_tob.cli import main

if __name__ == "__main__":
    args = sys.argv[1:] or [
        "--seeds", "50", "--seed", "0", "--n", "20", "--n-byz", "4",
        "--horizon", "20", "--tau", "4", "--eta", "4", "--pi", "2",
        "--r-a", "6", "--gamma", "1/10", "--strategies", "prop1,split_decision",
    ]
    sys.exit(main(["campaign", *args]))
