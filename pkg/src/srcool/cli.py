"""Command-line surface: run / sweep / oracle / fit.

Exit codes: 0 success, 1 user or configuration error, 2 numerical failure
(the failing trajectory's seed triple is printed so it can be reproduced).
"""
from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from .config import ConfigError, manifest_text, parse_config_file, resolve
from .ensemble import (
    EnsembleFailure,
    FitDegenerateError,
    SweepOverrides,
    fit_cooling_rate,
    final_width,
    run_ensemble,
    sweep,
)
from .io import SweepWriter, atomic_write_text, emit_fit, emit_histogram, emit_series, fmt, read_series
from .oracle import CapacityError, LiouvillianSpec, compare_cumulant
from .params import ConfigurationError

__all__ = ["main"]


def _out_dir(args, cfg_path: str, cfg_out: str) -> str:
    if args.out:
        return args.out
    if cfg_out:
        return cfg_out
    stem = os.path.splitext(os.path.basename(cfg_path))[0]
    return os.path.join("runs", stem)


def _load(args, motion_enabled=True):
    cfg = parse_config_file(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.values["seed"] = args.seed
        cfg.provenance["seed"] = "user"
    run = resolve(cfg, motion_enabled=motion_enabled)
    for msg in run.warnings:
        print(f"warning: {msg}", file=sys.stderr)
    return run


def _cmd_run(args) -> int:
    t0 = time.perf_counter()
    run = _load(args)
    out = _out_dir(args, args.config, run.cfg.values["out_dir"])
    os.makedirs(out, exist_ok=True)
    t_setup = time.perf_counter()
    result = run_ensemble(run.params, run.step, run.init, run.ens)
    t_compute = time.perf_counter()
    emit_series(result.series, os.path.join(out, "series.csv"))
    emit_histogram(result.histogram, os.path.join(out, "hist_final.csv"))
    p2f, p2f_sem = final_width(result.series)
    meta = {
        "command": "run",
        "wall_clock_s": time.perf_counter() - t0,
        "setup_s": t_setup - t0,
        "compute_s": t_compute - t_setup,
        "clamped_mass_total": result.clamped_mass,
        "max_pop_overshoot": result.max_overshoot,
        "final_p2": p2f,
        "final_p2_sem": p2f_sem,
    }
    atomic_write_text(os.path.join(out, "manifest.cfg"), manifest_text(run, meta))
    print(f"run complete: {run.ens.n_traj} trajectories, final <p^2> = {p2f:.6g} +- {p2f_sem:.2g}")
    print(f"outputs in {out}: series.csv, hist_final.csv, manifest.cfg")
    return 0


def _cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    run = _load(args)
    v = run.cfg.values
    axis = args.axis or v["sweep_axis"]
    values = [float(x) for x in args.values.split(",")] if args.values else v["sweep_values"]
    if not axis or not values:
        print("error: sweep needs --axis/--values or sweep_axis/sweep_values in the config", file=sys.stderr)
        return 1
    overrides = SweepOverrides(
        w=v["sweep_w"] or None,
        t_final=v["sweep_t_final"] or None,
        n_traj=v["sweep_n_traj"] or None,
        dp0=v["sweep_dp0"] or None,
    )
    if args.values and overrides != SweepOverrides():
        ok = all(lst is None or len(lst) == len(values) for lst in
                 (overrides.w, overrides.t_final, overrides.n_traj, overrides.dp0))
        if not ok:
            print("error: sweep_* override lists in the config do not match --values length", file=sys.stderr)
            return 1
    out = _out_dir(args, args.config, v["out_dir"])
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "sweep.csv")
    with SweepWriter(path) as writer:
        rows = sweep(
            axis, values, run.params, run.step, run.init, run.ens,
            overrides=overrides, on_row=writer.write_row,
            auto_dt_per_value=(v["dt"] == "auto"),
        )
    n_failed = sum(1 for r in rows if r.status != "ok")
    meta = {
        "command": "sweep",
        "sweep_axis_used": axis,
        "sweep_values_used": list(values),
        "wall_clock_s": time.perf_counter() - t0,
        "rows_failed": n_failed,
    }
    atomic_write_text(os.path.join(out, "manifest.cfg"), manifest_text(run, meta))
    for r in rows:
        print(
            f"{axis}={r.value:g}: status={r.status} dp={r.final_dp:.4g} "
            f"corrE={r.corrE:.4g} rate={r.rate:.4g} {r.error}"
        )
    print(f"sweep table in {path}")
    return 0 if n_failed == 0 else 2


def _cmd_oracle(args) -> int:
    t0 = time.perf_counter()
    run = _load(args, motion_enabled=False)
    v = run.cfg.values
    n = run.params.n_atoms
    positions = v["positions"] or [0.0] * n
    if len(positions) != n:
        print(f"error: positions must list {n} entries", file=sys.stderr)
        return 1
    spec = LiouvillianSpec.from_rates(run.rates, run.params.w, positions)
    t_final = None if v["oracle_t_final"] == "auto" else v["oracle_t_final"]
    cmp = compare_cumulant(spec, t_final=t_final)
    out = _out_dir(args, args.config, v["out_dir"])
    os.makedirs(out, exist_ok=True)
    lines = ["moment,exact_re,exact_im,cumulant_re,cumulant_im,rel_err"]
    ss_exact_pop = cmp.exact_pop[-1]
    ss_cum_pop = cmp.cumulant_pop[-1]
    for j in range(n):
        e, c = ss_exact_pop[j], ss_cum_pop[j]
        rel = abs(e - c) / max(abs(e), 1e-12)
        lines.append(f"pop_{j},{fmt(e)},0.0,{fmt(c)},0.0,{fmt(rel)}")
    for j in range(n):
        for l in range(j + 1, n):
            e = cmp.exact_coh[-1][j, l]
            c = cmp.cumulant_coh[-1][j, l]
            rel = abs(e - c) / max(abs(e), 1e-12)
            lines.append(
                f"coh_{j}_{l},{fmt(e.real)},{fmt(e.imag)},{fmt(c.real)},{fmt(c.imag)},{fmt(rel)}"
            )
    atomic_write_text(os.path.join(out, "oracle.csv"), "\n".join(lines) + "\n")
    meta = {
        "command": "oracle",
        "positions_used": list(map(float, positions)),
        "max_pop_rel": cmp.max_pop_rel,
        "max_coh_rel": cmp.max_coh_rel,
        "steady_pop_rel": cmp.steady_pop_rel,
        "steady_coh_rel": cmp.steady_coh_rel,
        "wall_clock_s": time.perf_counter() - t0,
    }
    atomic_write_text(os.path.join(out, "manifest.cfg"), manifest_text(run, meta))
    print(
        f"oracle comparison (N={n}): steady pop rel err {cmp.steady_pop_rel:.3g}, "
        f"steady coh rel err {cmp.steady_coh_rel:.3g}"
    )
    print(f"fixture in {os.path.join(out, 'oracle.csv')}")
    return 0


def _cmd_fit(args) -> int:
    data = read_series(args.series)
    window = None
    if args.window:
        lo, _, hi = args.window.partition(":")
        window = (float(lo), float(hi))
    fit = fit_cooling_rate(data["t"], data["p2_mean"], window=window)
    print(
        f"rate R = {fit.rate:.6g}, asymptote C = {fit.asymptote:.6g}, "
        f"amplitude A = {fit.amplitude:.6g}, rms residual = {fit.rms_residual:.3g}, "
        f"window = [{fit.window[0]:g}, {fit.window[1]:g}]"
    )
    if args.out:
        emit_fit(fit, args.out)
        print(f"fit written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="srcool", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one trajectory ensemble")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="one ensemble per parameter value")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--axis", choices=["n_atoms", "gamma_c", "w"], default=None)
    p_sweep.add_argument("--values", default=None, help="comma-separated values")
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--out", default=None)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_or = sub.add_parser("oracle", help="exact-vs-cumulant comparison (N <= 3)")
    p_or.add_argument("--config", required=True)
    p_or.add_argument("--out", default=None)
    p_or.set_defaults(func=_cmd_oracle)

    p_fit = sub.add_parser("fit", help="exponential-decay fit of a series file")
    p_fit.add_argument("--series", required=True)
    p_fit.add_argument("--window", default=None, help="A:B time window")
    p_fit.add_argument("--out", default=None)
    p_fit.set_defaults(func=_cmd_fit)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ConfigurationError, CapacityError, FitDegenerateError,
            FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except EnsembleFailure as exc:
        print(
            f"numerical failure: {exc}\n"
            f"reproduce with master_seed={exc.master_seed} run_id={exc.run_id} "
            f"traj_index={exc.traj_index}",
            file=sys.stderr,
        )
        return 2


if __name__ == "__main__":
    sys.exit(main())
