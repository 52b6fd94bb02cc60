#!/usr/bin/env python3
"""Train every estimator on the stepped-MI Gaussian and cubic problems and
write the raw/smoothed trace CSVs (the fig2 panels)."""

import sys
from pathlib import Path

from mib import harness

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("results/fig2")
config = harness.load_config(Path(__file__).parent.parent / "configs" / "fig2.json")
harness.run_experiment(config, out)
print(f"traces in {out}; render with: mib-plot fig2 --in {out}")
