#!/usr/bin/env python3
"""Temperature-limit figure: final width versus decay rate and repump strength.

Panel (a) consumes the gamma_c sweep; panel (b) compares the two repump
sweeps (k' = 0 and k' = k).  A guide line proportional to sqrt(Gamma_C) shows
the linear-in-Gamma_C temperature scaling in panel (a).
"""
from __future__ import annotations

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from figtools import check_manifest, read_sweep


def render(sweep_a, manifest_a, sweep_b0, manifest_b0, sweep_b1, manifest_b1, out_path):
    check_manifest(manifest_a, "fig4a")
    check_manifest(manifest_b0, "fig4b_k0")
    check_manifest(manifest_b1, "fig4b_k1")
    ta = read_sweep(sweep_a)
    t0 = read_sweep(sweep_b0)
    t1 = read_sweep(sweep_b1)

    fig, (ax_a, ax_b) = plt.subplots(1, 2, figsize=(8.0, 3.4))
    ax_a.plot(ta["value"], ta["final_dp"], "s-", color="royalblue")
    ref = ta["final_dp"][0] / ta["value"][0] ** 0.5
    xs = sorted(ta["value"])
    ax_a.plot(xs, [ref * x**0.5 for x in xs], ":", color="gray", lw=1.0,
              label=r"$\Delta p \propto \sqrt{\Gamma_C}$")
    ax_a.set_xlabel(r"$\Gamma_C$")
    ax_a.set_ylabel(r"$\Delta p$  ($\hbar k$)")
    ax_a.set_xscale("log")
    ax_a.set_yscale("log")
    ax_a.legend(fontsize=8)

    ax_b.plot(t0["value"], t0["final_dp"], "s-", color="royalblue", label=r"$k' = 0$")
    ax_b.plot(t1["value"], t1["final_dp"], "o-", color="crimson", label=r"$k' = k$")
    ax_b.set_xlabel("repump rate w")
    ax_b.set_ylabel(r"$\Delta p$  ($\hbar k$)")
    ax_b.set_xscale("log")
    ax_b.set_yscale("log")
    ax_b.legend(fontsize=8)

    fig.tight_layout()
    fig.savefig(out_path, dpi=160)
    plt.close(fig)
    return out_path


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sweep-a", required=True)
    ap.add_argument("--manifest-a", required=True)
    ap.add_argument("--sweep-b0", required=True)
    ap.add_argument("--manifest-b0", required=True)
    ap.add_argument("--sweep-b1", required=True)
    ap.add_argument("--manifest-b1", required=True)
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    try:
        render(args.sweep_a, args.manifest_a, args.sweep_b0, args.manifest_b0,
               args.sweep_b1, args.manifest_b1, args.out)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
