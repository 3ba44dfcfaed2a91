#!/usr/bin/env python3
"""Run the full analysis pipeline (validate/esp/stationary/forgetting/clt/couple)
for a set of zoo models and write one JSON report per model.

Usage: python scripts/run_full_report.py [--out DIR] [--seed N] [model ...]
"""

import argparse
import sys
from pathlib import Path

from qtraj.cli import run
from qtraj.config import ExperimentConfig
from qtraj.models import MODELS, ModelSpec


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("models", nargs="*", default=[], help="zoo models (default: all)")
    parser.add_argument("--out", default="reports")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--steps", type=int, default=1000)
    parser.add_argument("--trajectories", type=int, default=2000)
    args = parser.parse_args(argv)

    names = args.models or sorted(MODELS)
    worst = 0
    for name in names:
        cfg = ExperimentConfig(
            task="report",
            model=ModelSpec(name),
            n_steps=args.steps,
            n_trajectories=args.trajectories,
            seed=args.seed,
            out=str(Path(args.out) / name),
        )
        code, out = run(cfg)
        worst = max(worst, code)
        print(f"{name:26s} exit={code}")
    return worst


if __name__ == "__main__":
    sys.exit(main())
