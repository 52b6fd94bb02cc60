#!/usr/bin/env python3
"""Evaluate every estimator at its analytic optimal critic over a grid of
batch sizes and MI levels, recording bias/variance/MSE (the fig3 panels)."""

import sys
from pathlib import Path

from mib import harness

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("results/optimal_sweep")
config = harness.load_config(Path(__file__).parent.parent / "configs" / "optimal_sweep.json")
harness.run_experiment(config, out)
