#!/usr/bin/env python3
"""Run every shipped preset and collect outputs under results/.

Skips a preset when its output directory already holds a manifest, so the
script can resume after an interruption.  Runs the cheap presets first and
prints wall-clock timings.
"""
import argparse
import os
import subprocess
import sys
import time

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
PRESETS = os.path.join(ROOT, "presets")
RESULTS = os.path.join(ROOT, "results")

JOBS = [
    # (name, subcommand)
    ("oracle_n2", "oracle"),
    ("oracle_n3", "oracle"),
    ("fig2a", "run"),
    ("fig2c", "run"),
    ("fig4a", "sweep"),
    ("fig4b_k0", "sweep"),
    ("fig4b_k1", "sweep"),
    ("fig3", "sweep"),
    ("fig2a_halfdt", "run"),
    ("fig2b", "run"),
]


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--only", nargs="*", default=None, help="subset of preset names")
    ap.add_argument("--force", action="store_true", help="rerun even if outputs exist")
    args = ap.parse_args()

    failures = 0
    for name, sub in JOBS:
        if args.only and name not in args.only:
            continue
        out = os.path.join(RESULTS, name)
        if not args.force and os.path.exists(os.path.join(out, "manifest.cfg")):
            print(f"[skip] {name}: {out}/manifest.cfg exists", flush=True)
            continue
        cfg = os.path.join(PRESETS, f"{name}.cfg")
        cmd = [sys.executable, "-m", "srcool.cli", sub, "--config", cfg, "--out", out]
        print(f"[run ] {name}: {' '.join(cmd)}", flush=True)
        t0 = time.perf_counter()
        rc = subprocess.run(cmd).returncode
        print(f"[done] {name}: rc={rc} in {time.perf_counter() - t0:.0f}s", flush=True)
        if rc != 0:
            failures += 1
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
