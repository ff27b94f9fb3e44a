#!/usr/bin/env python3
"""Run the prevalence-misspecification studies (common and rare disease)
and render the sensitivity scatter figures.

Usage:
    python3 scripts/run_sensitivity_study.py --out results/sensitivity [--replicates N]
"""

import argparse
import os
import shutil
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent

STUDIES = (
    ("common", "sensitivity_common.cfg"),
    ("rare", "sensitivity_rare.cfg"),
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/sensitivity")
    parser.add_argument("--replicates", type=int, default=None)
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    args = parser.parse_args()

    for name, config in STUDIES:
        out = Path(args.out) / name
        cmd = [
            sys.executable, "-m", "epifam.cli", "sensitivity",
            "--config", str(ROOT / "configs" / config),
            "--out", str(out), "--workers", str(args.workers),
        ]
        if args.replicates is not None:
            cmd += ["--replicates", str(args.replicates)]
        subprocess.run(cmd, check=True)
        if shutil.which("epifam-plots") is not None:
            subprocess.run(
                ["epifam-plots", "--kind", "sensitivity-scatter",
                 "--input", str(out / "sensitivity_records.csv"),
                 "--out", str(out / "figures" / "sensitivity_scatter")],
                check=True,
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())
