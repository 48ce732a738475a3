"""Run configuration: flat key = value files, resolution, and manifests.

The config format is a flat, diff-friendly key = value text file ('#' starts
a comment, lists are comma-separated).  Unknown keys are rejected so typos
fail loudly.  A run manifest is the same format with every key resolved
(auto values replaced by the chosen numbers) plus tool/platform/timing
metadata as structured comments, so ``parse_config(manifest_text)``
reproduces the resolved configuration exactly.
"""
from __future__ import annotations

import math
import os
import platform
from dataclasses import dataclass, field
from typing import Any

from . import __version__
from .ensemble import EnsembleConfig
from .params import DerivedRates, PhysParams, derive_rates, validate_timescales
from .trajectory import InitConfig, StepConfig, auto_dt

__all__ = [
    "ConfigError",
    "RunConfig",
    "ResolvedRun",
    "parse_config",
    "parse_config_file",
    "resolve",
    "manifest_text",
    "read_manifest_params",
]


class ConfigError(ValueError):
    """Malformed configuration; message names the key and the constraint."""


def _parse_bool_auto_float(s: str):
    return "auto" if s == "auto" else float(s)


def _parse_auto_int(s: str):
    return "auto" if s == "auto" else int(s)


def _parse_list_float(s: str):
    return [float(v) for v in s.split(",") if v.strip() != ""]


def _parse_list_int(s: str):
    return [int(v) for v in s.split(",") if v.strip() != ""]


# key -> (parser, default); _REQUIRED marks keys that must be present
_REQUIRED = object()
_SCHEMA: dict[str, tuple[Any, Any]] = {
    # physics
    "n_atoms": (int, _REQUIRED),
    "kappa": (float, _REQUIRED),
    "delta": (float, _REQUIRED),
    "w": (float, _REQUIRED),
    "omega_r": (float, _REQUIRED),
    "gamma_c": (float, None),
    "g": (float, None),
    "kprime_ratio": (float, 0.0),
    "u2bar": (float, 0.4),
    # run
    "n_traj": (int, _REQUIRED),
    "t_final": (float, _REQUIRED),
    "seed": (int, _REQUIRED),
    "dt": (_parse_bool_auto_float, "auto"),
    "sample_stride": (_parse_auto_int, "auto"),
    "dp0": (float, 15.0),
    "position_law": (str, "uniform"),
    "spin_scheme": (str, "rk4"),
    "spin_substeps": (int, 1),
    "refactor_interval": (int, 1),
    "noise_factor": (str, "exact"),
    "histogram_mode": (str, "auto"),
    "workers": (_parse_auto_int, "auto"),
    "engine": (str, "fast"),
    "out_dir": (str, ""),
    # sweep
    "sweep_axis": (str, ""),
    "sweep_values": (_parse_list_float, []),
    "sweep_w": (_parse_list_float, []),
    "sweep_t_final": (_parse_list_float, []),
    "sweep_n_traj": (_parse_list_int, []),
    "sweep_dp0": (_parse_list_float, []),
    # oracle
    "positions": (_parse_list_float, []),
    "oracle_t_final": (_parse_bool_auto_float, "auto"),
}


@dataclass
class RunConfig:
    values: dict[str, Any]
    provenance: dict[str, str]  # key -> "user" | "default"

    def __getattr__(self, name: str):
        try:
            return self.values[name]
        except KeyError:
            raise AttributeError(name) from None


def parse_config(text: str) -> RunConfig:
    values: dict[str, Any] = {}
    provenance: dict[str, str] = {}
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        parser, _default = _SCHEMA[key]
        try:
            values[key] = parser(val)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
        provenance[key] = "user"
    missing = [k for k, (_p, d) in _SCHEMA.items() if d is _REQUIRED and k not in values]
    if "gamma_c" not in values and "g" not in values:
        missing.append("gamma_c (or g)")
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(sorted(missing))}")
    if "gamma_c" in values and "g" in values:
        raise ConfigError("give exactly one of gamma_c and g, not both")
    for key, (_p, default) in _SCHEMA.items():
        if key not in values and default is not _REQUIRED:
            values[key] = default
            provenance[key] = "default"
    return RunConfig(values=values, provenance=provenance)


def parse_config_file(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read())


@dataclass
class ResolvedRun:
    cfg: RunConfig
    params: PhysParams
    rates: DerivedRates
    step: StepConfig
    init: InitConfig
    ens: EnsembleConfig
    warnings: list[str] = field(default_factory=list)

    def resolved_values(self) -> dict[str, Any]:
        out = dict(self.cfg.values)
        out["dt"] = self.step.dt
        out["sample_stride"] = self.ens.sample_stride
        out["workers"] = self.ens.workers
        return out


def resolve(cfg: RunConfig, motion_enabled: bool = True) -> ResolvedRun:
    """Validate and resolve every 'auto' into a concrete value."""
    v = cfg.values
    try:
        params = PhysParams(
            n_atoms=v["n_atoms"],
            kappa=v["kappa"],
            delta=v["delta"],
            w=v["w"],
            omega_r=v["omega_r"],
            gamma_c=v.get("gamma_c"),
            g=v.get("g"),
            kprime_ratio=v["kprime_ratio"],
            u2bar=v["u2bar"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rates = derive_rates(params)
    warnings = validate_timescales(params, motion_enabled=motion_enabled)
    init = InitConfig(dp0=v["dp0"], position_law=v["position_law"])
    dt = v["dt"] if v["dt"] != "auto" else auto_dt(params, rates, init.dp0)
    step = StepConfig(
        dt=dt,
        spin_scheme=v["spin_scheme"],
        spin_substeps=v["spin_substeps"],
        refactor_interval=v["refactor_interval"],
        noise_factor=v["noise_factor"],
    )
    n_steps = max(1, int(math.ceil(v["t_final"] / dt - 1e-9)))
    stride = v["sample_stride"]
    if stride == "auto":
        stride = max(1, int(round(n_steps / 400)))
    workers = v["workers"]
    if workers == "auto":
        workers = os.cpu_count() or 1
    ens = EnsembleConfig(
        n_traj=v["n_traj"],
        t_final=v["t_final"],
        sample_stride=stride,
        master_seed=v["seed"],
        workers=workers,
        engine=v["engine"],
        histogram_mode=v["histogram_mode"],
    )
    if v["engine"] not in ("fast", "reference"):
        raise ConfigError(f"engine must be 'fast' or 'reference', got {v['engine']!r}")
    for name in ("sweep_w", "sweep_t_final", "sweep_n_traj", "sweep_dp0"):
        if v[name] and len(v[name]) != len(v["sweep_values"]):
            raise ConfigError(f"{name} must have the same length as sweep_values")
    if v["sweep_axis"] and v["sweep_axis"] not in ("n_atoms", "gamma_c", "w"):
        raise ConfigError(f"sweep_axis must be n_atoms, gamma_c or w, got {v['sweep_axis']!r}")
    return ResolvedRun(cfg=cfg, params=params, rates=rates, step=step, init=init, ens=ens, warnings=warnings)


def _fmt_value(v: Any) -> str:
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
    return str(v)


def manifest_text(run: ResolvedRun, meta: dict[str, Any] | None = None) -> str:
    """Resolved config plus metadata comments; parses back to the same config."""
    resolved = run.resolved_values()
    lines = ["# srcool run manifest (parseable as a config; '# meta:' lines are informational)"]
    for key in _SCHEMA:
        if key not in resolved:
            continue
        val = resolved[key]
        if key in ("gamma_c", "g") and val is None:
            continue
        if isinstance(val, list) and not val:
            continue
        if key == "out_dir" and not val:
            continue
        if key == "sweep_axis" and not val:
            continue
        tag = run.cfg.provenance.get(key, "resolved")
        if key in ("dt", "sample_stride", "workers") and run.cfg.values[key] == "auto":
            tag = "auto"
        lines.append(f"{key} = {_fmt_value(val)}  # {tag}")
    lines.append(f"# meta: tool_version = {__version__}")
    lines.append(f"# meta: platform = {platform.platform()} python{platform.python_version()}")
    lines.append(f"# meta: gamma_c_resolved = {run.rates.gamma_c!r}")
    lines.append(f"# meta: gamma_delta = {run.rates.gamma_delta!r}")
    lines.append(f"# meta: eta = {run.rates.eta!r}")
    lines.append(f"# meta: mass = {run.rates.mass!r}")
    lines.append(f"# meta: g_resolved = {run.rates.g!r}")
    for wmsg in run.warnings:
        lines.append(f"# meta: warning = {wmsg}")
    for k, val in (meta or {}).items():
        lines.append(f"# meta: {k} = {_fmt_value(val)}")
    return "\n".join(lines) + "\n"


def read_manifest_params(path: str) -> dict[str, Any]:
    """Parse a manifest (or config) back into its resolved key/value dict."""
    cfg = parse_config_file(path)
    return dict(cfg.values)
