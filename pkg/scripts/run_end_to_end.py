#!/usr/bin/env python3
"""Walk the full lobkit pipeline on synthetic data.

Runs generate -> build -> preprocess -> train -> evaluate -> transfer via the
same entry point as the ``lobkit`` console command and prints where each
artifact landed. Deterministic: re-running with the same arguments reproduces
every output byte for byte.

Usage:
    python3 scripts/run_end_to_end.py [--out DIR] [--profile P] [--seed N]
                                      [--epochs N]
"""

import argparse
import sys
from pathlib import Path

from lobkit.cli import main as lobkit


def run(args):
    out = Path(args.out)
    flow = out / "flow.csv"
    series = out / "series.bin"
    data = out / "data"
    run_dir = out / "train"
    eval_dir = out / "eval"
    xfer_dir = out / "transfer"

    steps = [
        ("generate", ["generate", "--profile", args.profile,
                      "--seed", str(args.seed), "--out", str(flow)]),
        ("build", ["build", "--flow", str(flow), "--out", str(series)]),
        ("preprocess", ["preprocess", "--series", str(series),
                        "--out", str(data)]),
        ("train", ["train", "--data", str(data), "--task", "prediction",
                   "--out", str(run_dir), "--epochs", str(args.epochs),
                   "--step", "10", "--latent", "64", "--batch-size", "32"]),
        ("evaluate", ["evaluate", "--data", str(data),
                      "--checkpoint", str(run_dir / "checkpoint.bin"),
                      "--step", "10", "--out", str(eval_dir)]),
        ("transfer", ["transfer",
                      "--checkpoint", str(run_dir / "checkpoint.bin"),
                      "--data", str(data), "--budget", "50", "--step", "10",
                      "--out", str(xfer_dir)]),
    ]
    for name, argv in steps:
        print(f"== lobkit {' '.join(argv)}")
        code = lobkit(argv)
        if code != 0:
            print(f"step {name!r} failed with exit code {code}",
                  file=sys.stderr)
            return code
    print("\nArtifacts:")
    for p in sorted(out.rglob("*")):
        if p.is_file():
            print(f"  {p} ({p.stat().st_size} bytes)")
    report = (eval_dir / "report.txt").read_text().strip()
    print("\nEvaluation report:")
    print("  " + report.replace("\n", "\n  "))
    return 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="e2e_out")
    ap.add_argument("--profile", default="sz000001")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=5)
    sys.exit(run(ap.parse_args()))
