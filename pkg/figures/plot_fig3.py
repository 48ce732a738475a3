#!/usr/bin/env python3
"""Atom-number figure: cooling rate (in single-atom units) and final width.

Consumes the sweep table of the n_atoms sweep.  Panel (a) shows the fitted
rate divided by the position-averaged single-atom rate at that row's repump;
panel (b) overlays the final momentum width and the spin-spin correlation on
twin axes.
"""
from __future__ import annotations

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from figtools import check_manifest, eta_from_manifest, read_sweep, single_atom_rate


def render(sweep_csv, manifest_path, out_path):
    manifest = check_manifest(manifest_path, "fig3")
    table = read_sweep(sweep_csv)
    eta = eta_from_manifest(manifest)
    gamma_c = float(manifest["gamma_c"])
    n_vals = table["value"]
    norm = [r / single_atom_rate(w, gamma_c, eta) for r, w in zip(table["rate"], table["w"])]

    fig, (ax_a, ax_b) = plt.subplots(2, 1, figsize=(5.0, 5.6), sharex=True)
    ax_a.plot(n_vals, norm, "o-", color="royalblue")
    ax_a.set_ylabel(r"cooling rate / $R_S$")
    ax_a.axhline(1.0, color="gray", lw=0.8, ls=":")

    ax_b.plot(n_vals, table["final_dp"], "s-", color="royalblue", label=r"$\Delta p$")
    ax_b.set_xlabel("atom number N")
    ax_b.set_ylabel(r"$\Delta p$  ($\hbar k$)", color="royalblue")
    ax_b.set_yscale("log")
    ax_c = ax_b.twinx()
    corr = [(n, c) for n, c in zip(n_vals, table["corrE"]) if c == c]  # drop NaN (N = 1)
    ax_c.plot([n for n, _ in corr], [c for _, c in corr], "o--", color="crimson", label="correlation")
    ax_c.set_ylabel("spin-spin correlation", color="crimson")

    fig.tight_layout()
    fig.savefig(out_path, dpi=160)
    plt.close(fig)
    return out_path


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sweep", required=True)
    ap.add_argument("--manifest", required=True)
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    try:
        render(args.sweep, args.manifest, args.out)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
