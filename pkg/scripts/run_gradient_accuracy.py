#!/usr/bin/env python3
"""Measure encoder-gradient MSE per estimator and the best interpolation
weight per (batch size, MI) cell (the fig4 panels)."""

import sys
from pathlib import Path

from mib import harness

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("results/gradient")
config = harness.load_config(Path(__file__).parent.parent / "configs" / "gradient.json")
harness.run_experiment(config, out)
