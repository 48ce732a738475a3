#!/usr/bin/env python3
"""Cooling-series figure: <p^2>(t) with exponential fit, histogram inset.

Inputs are the series/histogram CSVs and manifest of a single `srcool run`,
plus optionally the fit CSV from `srcool fit`.  The inset overlays both a
Gaussian matched to the histogram moments and the uniform recoil-interval
prediction, so the crossover regime is visible at a glance.
"""
from __future__ import annotations

import argparse
import math
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from figtools import check_manifest, read_fit, read_histogram, read_series


def render(series_csv, hist_csv, fit_csv, manifest, expect, out_path):
    check_manifest(manifest, expect)
    series = read_series(series_csv)
    hist = read_histogram(hist_csv)

    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.plot(series["t"], series["p2_mean"], ".", ms=3, color="crimson", label="ensemble")
    if fit_csv:
        fit = read_fit(fit_csv)
        t0 = series["t"][0]
        tt = [t0 + i * (series["t"][-1] - t0) / 400.0 for i in range(401)]
        yy = [fit["amplitude"] * math.exp(-fit["rate"] * (t - t0)) + fit["asymptote"] for t in tt]
        ax.plot(tt, yy, "-", color="royalblue", lw=1.5,
                label=f"fit: R = {fit['rate']:.3g}, C = {fit['asymptote']:.3g}")
    ax.set_xlabel("t (1/unit frequency)")
    ax.set_ylabel(r"$\langle p^2\rangle$  ($\hbar^2 k^2$)")
    ax.set_yscale("log")
    ax.legend(loc="upper right", fontsize=8)

    inset = fig.add_axes([0.24, 0.25, 0.3, 0.3])
    widths = [r - l for l, r in zip(hist["bin_left"], hist["bin_right"])]
    centers = [0.5 * (l + r) for l, r in zip(hist["bin_left"], hist["bin_right"])]
    total = sum(hist["count"])
    dens = [c / (total * w) for c, w in zip(hist["count"], widths)]
    inset.bar(centers, dens, width=widths, color="salmon", edgecolor="none")
    mean = sum(c * d * w for c, d, w in zip(centers, dens, widths))
    var = sum((c - mean) ** 2 * d * w for c, d, w in zip(centers, dens, widths))
    sig = math.sqrt(var)
    xs = [min(centers) + i * (max(centers) - min(centers)) / 300.0 for i in range(301)]
    inset.plot(xs, [math.exp(-0.5 * ((x - mean) / sig) ** 2) / (sig * math.sqrt(2 * math.pi)) for x in xs],
               color="royalblue", lw=1.2)
    if sig < 2.0:
        inset.plot([-1, -1, 1, 1], [0.0, 0.5, 0.5, 0.0], color="k", lw=1.0, ls="--")
    inset.set_xlabel(r"p ($\hbar k$)", fontsize=7)
    inset.set_ylabel("density", fontsize=7)
    inset.tick_params(labelsize=6)

    fig.savefig(out_path, dpi=160, bbox_inches="tight")
    plt.close(fig)
    return out_path


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--series", required=True)
    ap.add_argument("--hist", required=True)
    ap.add_argument("--fit", default=None)
    ap.add_argument("--manifest", required=True)
    ap.add_argument("--expect", required=True, help="fig2a | fig2b | fig2c")
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    try:
        render(args.series, args.hist, args.fit, args.manifest, args.expect, args.out)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
