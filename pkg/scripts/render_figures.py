#!/usr/bin/env python3
"""Render the three figure panels from the preset outputs in results/."""
import os
import subprocess
import sys

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
RESULTS = os.path.join(ROOT, "results")
FIGDIR = os.path.join(ROOT, "figures")
OUT = os.path.join(RESULTS, "figures")


def res(name, filename):
    path = os.path.join(RESULTS, name, filename)
    if not os.path.exists(path):
        sys.exit(f"missing {path}; run scripts/reproduce_all.py first")
    return path


def run(script, *argv):
    cmd = [sys.executable, os.path.join(FIGDIR, script), *argv]
    print(" ".join(cmd), flush=True)
    rc = subprocess.run(cmd, cwd=FIGDIR).returncode
    if rc != 0:
        sys.exit(rc)


def main() -> int:
    os.makedirs(OUT, exist_ok=True)
    for panel in ("fig2a", "fig2b", "fig2c"):
        if not os.path.exists(os.path.join(RESULTS, panel, "manifest.cfg")):
            print(f"skipping {panel} (no output yet)")
            continue
        fit_path = os.path.join(RESULTS, panel, "fit.csv")
        args = []
        if not os.path.exists(fit_path):
            rc = subprocess.run(
                [sys.executable, "-m", "srcool.cli", "fit",
                 "--series", res(panel, "series.csv"), "--out", fit_path],
                cwd=ROOT,
            ).returncode
        if os.path.exists(fit_path):
            args = ["--fit", fit_path]
        run(
            "plot_fig2.py", "--series", res(panel, "series.csv"),
            "--hist", res(panel, "hist_final.csv"),
            "--manifest", res(panel, "manifest.cfg"),
            "--expect", panel, "--out", os.path.join(OUT, f"{panel}.png"), *args,
        )
    run(
        "plot_fig3.py", "--sweep", res("fig3", "sweep.csv"),
        "--manifest", res("fig3", "manifest.cfg"),
        "--out", os.path.join(OUT, "fig3.png"),
    )
    run(
        "plot_fig4.py", "--sweep-a", res("fig4a", "sweep.csv"),
        "--manifest-a", res("fig4a", "manifest.cfg"),
        "--sweep-b0", res("fig4b_k0", "sweep.csv"),
        "--manifest-b0", res("fig4b_k0", "manifest.cfg"),
        "--sweep-b1", res("fig4b_k1", "sweep.csv"),
        "--manifest-b1", res("fig4b_k1", "manifest.cfg"),
        "--out", os.path.join(OUT, "fig4.png"),
    )
    print(f"figures in {OUT}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
