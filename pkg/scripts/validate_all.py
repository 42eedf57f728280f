"""
validate_all.py

One-command end-to-end validation runner for the edict pipeline.

This script executes the CLI steps in a fixed order against one run config:
1) Dataset generation
2) EDICT training
3) Calibration evaluation (interpolation + extrapolation)
4) Classifier training
5) Noise sweep (skippable)

It is designed to be:
- easy to run locally
- CI-friendly (exits non-zero on failure)
- readable (prints clear step-by-step output)

Usage:
  python scripts/validate_all.py
  python scripts/validate_all.py --config configs/synthetic.json
  python scripts/validate_all.py --skip-sweep
"""

from __future__ import annotations

import argparse
import subprocess
import sys
from dataclasses import dataclass
from typing import List


@dataclass
class Step:
    name: str
    cmd: List[str]


def run_step(step: Step) -> None:
    print(f"\n=== {step.name} ===")
    print("$ " + " ".join(step.cmd))
    res = subprocess.run(step.cmd)
    if res.returncode != 0:
        raise RuntimeError(f"Step failed: {step.name} (exit code {res.returncode})")


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--config", default="configs/quick.json", help="Run configuration.")
    parser.add_argument("--out", default=None, help="Override the output directory.")
    parser.add_argument("--skip-sweep", action="store_true", help="Skip the noise sweep (faster local runs).")
    args = parser.parse_args()

    def edict(command: str) -> List[str]:
        cmd = [sys.executable, "-m", "edict.cli", command, "--config", args.config, "--overwrite"]
        if args.out:
            cmd += ["--out", args.out]
        return cmd

    steps: List[Step] = [
        Step("Dataset generation", edict("generate")),
        Step("EDICT training", edict("train")),
        Step("Calibration evaluation", edict("eval-calibration")),
        Step("Classifier training", edict("train-classifier")),
    ]
    if not args.skip_sweep:
        steps.append(Step("Noise sweep", edict("noise-sweep")))

    failures: List[str] = []

    for step in steps:
        try:
            run_step(step)
            print("✅ PASS")
        except Exception as e:
            print("❌ FAIL")
            print(str(e), file=sys.stderr)
            failures.append(step.name)
            break  # fail fast

    print("\n=== Summary ===")
    if not failures:
        print("All validations passed ✅")
        return 0

    print("Failed step(s):")
    for name in failures:
        print(f"- {name}")
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
