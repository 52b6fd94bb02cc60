#!/usr/bin/env python3
"""Compare mixture / linear / product interpolation schemes on bias-variance
scatter at three MI levels (the fig7 panels)."""

import sys
from pathlib import Path

from mib import harness

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("results/interp_compare")
config = harness.load_config(Path(__file__).parent.parent / "configs" / "interp_compare.json")
harness.run_experiment(config, out)
