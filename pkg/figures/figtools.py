"""Shared plumbing for the figure scripts.

The scripts are file-format consumers only: they read the CSV series,
histogram, fit, and sweep tables plus the run manifest, and never invoke the
simulation package.  A manifest is checked against the expectation table for
the requested figure before anything is drawn, so plots cannot silently mix
runs.
"""
from __future__ import annotations

import csv
import math


class ManifestMismatchError(ValueError):
    """Manifest parameters do not match the requested figure preset."""


class EmptyDataError(ValueError):
    """An input table has a header but no rows."""


# figure -> required manifest key/values (checked with tolerant float compare)
EXPECTATIONS = {
    "fig2a": {"n_atoms": 1, "kappa": 200.0, "delta": 100.0, "gamma_c": 0.1, "w": 0.15, "omega_r": 0.25},
    "fig2b": {"n_atoms": 20, "kappa": 200.0, "delta": 100.0, "gamma_c": 0.1, "w": 0.28, "omega_r": 0.25},
    "fig2c": {"n_atoms": 60, "kappa": 200.0, "delta": 100.0, "gamma_c": 0.1, "w": 1.3, "omega_r": 0.25},
    "fig3": {"sweep_axis": "n_atoms", "kappa": 200.0, "delta": 100.0, "gamma_c": 0.1, "omega_r": 0.25},
    "fig4a": {"sweep_axis": "gamma_c", "n_atoms": 40, "kappa": 400.0, "delta": 200.0, "omega_r": 0.25},
    "fig4b_k0": {"sweep_axis": "w", "n_atoms": 40, "kappa": 400.0, "gamma_c": 0.5, "kprime_ratio": 0.0},
    "fig4b_k1": {"sweep_axis": "w", "n_atoms": 40, "kappa": 400.0, "gamma_c": 0.5, "kprime_ratio": 1.0},
}


def read_manifest(path: str) -> dict:
    """Parse the flat key = value manifest (comments stripped)."""
    out: dict = {}
    with open(path, encoding="utf-8") as f:
        for raw in f:
            line = raw.split("#", 1)[0].strip()
            if not line or "=" not in line:
                continue
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            try:
                num = float(val)
                out[key] = int(num) if num == int(num) and "." not in val and "e" not in val.lower() else num
            except ValueError:
                out[key] = val
    return out


def check_manifest(path: str, figure: str) -> dict:
    if figure not in EXPECTATIONS:
        raise ValueError(f"unknown figure {figure!r}; known: {sorted(EXPECTATIONS)}")
    manifest = read_manifest(path)
    problems = []
    for key, want in EXPECTATIONS[figure].items():
        got = manifest.get(key)
        if got is None:
            problems.append(f"{key} missing (want {want})")
        elif isinstance(want, str):
            if got != want:
                problems.append(f"{key} = {got!r} (want {want!r})")
        elif not math.isclose(float(got), float(want), rel_tol=1e-9, abs_tol=1e-12):
            problems.append(f"{key} = {got} (want {want})")
    if problems:
        raise ManifestMismatchError(
            f"{path} does not match preset {figure}: " + "; ".join(problems)
        )
    return manifest


def _read_table(path: str, required: list[str]) -> dict[str, list]:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise EmptyDataError(f"{path}: no data rows")
    missing = [c for c in required if c not in rows[0]]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    out: dict[str, list] = {c: [] for c in rows[0]}
    for row in rows:
        for c, v in row.items():
            out[c].append(v)
    return out


def _floats(table: dict[str, list], col: str) -> list[float]:
    return [float(v) for v in table[col]]


def read_series(path: str) -> dict[str, list[float]]:
    t = _read_table(path, ["t", "p2_mean", "p2_sem", "corrE_mean", "inversion_mean"])
    return {k: _floats(t, k) for k in t}


def read_histogram(path: str) -> dict[str, list[float]]:
    t = _read_table(path, ["bin_left", "bin_right", "count"])
    return {k: _floats(t, k) for k in t}


def read_fit(path: str) -> dict[str, float]:
    t = _read_table(path, ["rate", "asymptote", "amplitude"])
    return {k: float(v[0]) for k, v in t.items()}


def read_sweep(path: str) -> dict[str, list]:
    t = _read_table(path, ["value", "status", "w", "final_dp", "corrE", "rate"])
    keep = [i for i, s in enumerate(t["status"]) if s == "ok"]
    out: dict[str, list] = {}
    for k, vals in t.items():
        if k in ("status", "error"):
            out[k] = [vals[i] for i in keep]
        else:
            out[k] = [float(vals[i]) for i in keep]
    return out


def single_atom_rate(w: float, gamma_c: float, eta: float) -> float:
    """Position-averaged single-atom cooling rate used to normalize sweep rates."""
    return eta * gamma_c * math.sqrt(w / (w + gamma_c))


def eta_from_manifest(manifest: dict) -> float:
    kappa = float(manifest["kappa"])
    delta = float(manifest["delta"])
    omega_r = float(manifest["omega_r"])
    return 4.0 * omega_r * delta / (kappa**2 / 4.0 + delta**2)
