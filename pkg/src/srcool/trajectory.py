"""Single-trajectory integration: Ito motion plus deterministic spin moments.

One step is operator-split: (1) the spin moments advance by dt with a
classical scheme at frozen positions, (2) drift force and diffusion are
evaluated from the updated moments, (3) momenta receive drift plus a
correlated noise kick, (4) positions advance ballistically with the new
momenta.  Euler-Maruyama for (x, p) is first-order weak; the diffusion's
state dependence is through slowly varying moments, so no Milstein
correction is used.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .motion import DiffusionFactor, diffusion_matrix, drift_force, psd_project_and_factor, sample_kick
from .params import ConfigurationError, DerivedRates, PhysParams
from .spins import SpinMoments, spin_rhs

__all__ = [
    "StepConfig",
    "InitConfig",
    "TrajectoryState",
    "TrajectorySeries",
    "TrajectoryFailure",
    "POP_OVERSHOOT_LIMIT",
    "max_update_rate",
    "auto_dt",
    "validate_step_config",
    "make_trajectory_rng",
    "init_trajectory",
    "integrate_spins",
    "step",
    "run_trajectory",
]

# Populations may transiently leave [0, 1] at finite dt; beyond this the
# cumulant closure is considered broken and the trajectory aborts.
POP_OVERSHOOT_LIMIT = 1e-6

SPIN_SCHEMES = ("rk4", "euler")
NOISE_FACTORS = ("exact", "structured")


class TrajectoryFailure(RuntimeError):
    """A trajectory produced unphysical state; carries diagnostics."""

    def __init__(self, message: str, step_index: int, t: float, diagnostics: dict):
        super().__init__(f"{message} (step {step_index}, t={t:g})")
        self.step_index = step_index
        self.t = t
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class StepConfig:
    """Time-stepping knobs.

    ``noise_factor`` selects how the kick factor is obtained: "exact"
    factorizes the full diffusion matrix (and ``refactor_interval`` reuses
    that factor wholesale), while "structured" factorizes only the slowly
    varying spin part and applies the instantaneous sin(kx) projection each
    step, which keeps the position dependence of the noise exact when the
    factorization is amortized.
    """

    dt: float
    spin_scheme: str = "rk4"
    spin_substeps: int = 1
    refactor_interval: int = 1
    noise_factor: str = "exact"


@dataclass(frozen=True)
class InitConfig:
    """Initial ensemble: positions uniform over a wavelength, momenta Gaussian."""

    dp0: float = 15.0
    position_law: str = "uniform"


def max_update_rate(params: PhysParams, rates: DerivedRates, dp0: float) -> float:
    """Fastest cavity-independent rate the stepper must resolve.

    Includes the pump, the collective and single-atom emission rates, and the
    Doppler rate k*dp0/m of the initial momentum spread.
    """
    return max(
        params.w,
        params.n_atoms * rates.gamma_c,
        rates.gamma_c,
        rates.gamma_delta,
        dp0 / rates.mass,
    )


def auto_dt(params: PhysParams, rates: DerivedRates, dp0: float) -> float:
    return 0.1 / max_update_rate(params, rates, dp0)


def validate_step_config(
    cfg: StepConfig, params: PhysParams, rates: DerivedRates, dp0: float
) -> None:
    if not (cfg.dt > 0.0):
        raise ConfigurationError(f"dt must be positive, got {cfg.dt}")
    rate = max_update_rate(params, rates, dp0)
    if cfg.dt * rate > 0.1 * (1.0 + 1e-12):
        raise ConfigurationError(
            f"dt={cfg.dt:g} too coarse: dt*max_rate={cfg.dt * rate:g} exceeds 0.1 "
            f"(max_rate={rate:g})"
        )
    if cfg.spin_substeps < 1:
        raise ConfigurationError("spin_substeps must be >= 1")
    if cfg.refactor_interval < 1:
        raise ConfigurationError("refactor_interval must be >= 1")
    if cfg.spin_scheme not in SPIN_SCHEMES:
        raise ConfigurationError(f"spin_scheme must be one of {SPIN_SCHEMES}")
    if cfg.noise_factor not in NOISE_FACTORS:
        raise ConfigurationError(f"noise_factor must be one of {NOISE_FACTORS}")


@dataclass
class TrajectoryState:
    """One stochastic realization; rng advances in place as steps are taken."""

    t: float
    x: np.ndarray
    p: np.ndarray
    spins: SpinMoments
    rng: np.random.Generator
    clamped_mass: float = 0.0
    max_overshoot: float = 0.0
    step_index: int = 0
    _factor: DiffusionFactor | None = field(default=None, repr=False)


def make_trajectory_rng(master_seed: int, traj_index: int, run_id: int = 0) -> np.random.Generator:
    """Counter-based per-trajectory stream.

    The Philox key is (master_seed, run_id * 2^32 + traj_index), so streams
    for different trajectories never overlap and adding trajectories does not
    perturb existing ones.
    """
    if traj_index < 0 or traj_index >= 2**32:
        raise ValueError(f"traj_index out of range: {traj_index}")
    key = np.array(
        [np.uint64(master_seed % 2**64), np.uint64(run_id) << np.uint64(32) | np.uint64(traj_index)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def init_trajectory(
    params: PhysParams,
    init_cfg: InitConfig,
    master_seed: int,
    traj_index: int = 0,
    run_id: int = 0,
    rates: DerivedRates | None = None,
) -> TrajectoryState:
    """Draw initial (x, p), set spins to the local single-atom steady state.

    Draw order (part of the determinism contract): positions first, then
    momenta; the same stream then supplies the per-step noise.
    """
    if init_cfg.position_law != "uniform":
        raise ConfigurationError(f"unsupported position law {init_cfg.position_law!r}")
    from .params import derive_rates

    r = rates if rates is not None else derive_rates(params)
    rng = make_trajectory_rng(master_seed, traj_index, run_id)
    n = params.n_atoms
    x = rng.random(n) * (2.0 * math.pi)
    p = init_cfg.dp0 * rng.standard_normal(n)
    pop = params.w / (params.w + r.gamma_c * np.cos(x) ** 2)
    spins = SpinMoments(pop, np.zeros((n, n), dtype=complex))
    return TrajectoryState(t=0.0, x=x, p=p, spins=spins, rng=rng)


def integrate_spins(
    m: SpinMoments,
    x: np.ndarray,
    rates: DerivedRates,
    w: float,
    dt: float,
    scheme: str = "rk4",
    substeps: int = 1,
) -> SpinMoments:
    """Advance the deterministic cumulant moments by dt at frozen positions."""
    h = dt / substeps
    cur = m
    for _ in range(substeps):
        if scheme == "euler":
            d = spin_rhs(cur, x, rates, w)
            cur = SpinMoments(cur.pop + h * d.pop, cur.coh + h * d.coh)
        elif scheme == "rk4":
            k1 = spin_rhs(cur, x, rates, w)
            m2 = SpinMoments(cur.pop + 0.5 * h * k1.pop, cur.coh + 0.5 * h * k1.coh)
            k2 = spin_rhs(m2, x, rates, w)
            m3 = SpinMoments(cur.pop + 0.5 * h * k2.pop, cur.coh + 0.5 * h * k2.coh)
            k3 = spin_rhs(m3, x, rates, w)
            m4 = SpinMoments(cur.pop + h * k3.pop, cur.coh + h * k3.coh)
            k4 = spin_rhs(m4, x, rates, w)
            cur = SpinMoments(
                cur.pop + (h / 6.0) * (k1.pop + 2 * k2.pop + 2 * k3.pop + k4.pop),
                cur.coh + (h / 6.0) * (k1.coh + 2 * k2.coh + 2 * k3.coh + k4.coh),
            )
        else:
            raise ConfigurationError(f"unknown spin scheme {scheme!r}")
    return cur


def _clamp_populations(m: SpinMoments) -> float:
    """Clamp populations to [0, 1] in place; returns the worst overshoot."""
    over = float(np.max(np.maximum(-m.pop, m.pop - 1.0), initial=0.0))
    np.clip(m.pop, 0.0, 1.0, out=m.pop)
    return over


def _structured_kick(
    state: TrajectoryState,
    params: PhysParams,
    rates: DerivedRates,
    cfg: StepConfig,
    sn: np.ndarray,
) -> np.ndarray:
    """Kick from the spin-part factor with the instantaneous mode projection."""
    if (state.step_index % cfg.refactor_interval) == 0 or state._factor is None:
        f = psd_project_and_factor(np.real(state.spins.matrix()))
        state._factor = DiffusionFactor(
            d_raw=f.d_raw,
            d_psd=f.d_psd,
            factor=f.factor,
            clamped_mass=rates.gamma_c * f.clamped_mass,
        )
        state.clamped_mass += state._factor.clamped_mass
    n = params.n_atoms
    z = state.rng.standard_normal(n)
    kick = math.sqrt(rates.gamma_c * cfg.dt) * sn * (state._factor.factor @ z)
    kp2 = params.kprime_ratio**2
    if kp2 > 0.0:
        z2 = state.rng.standard_normal(n)
        rep = kp2 * params.w * params.u2bar * (1.0 - state.spins.pop)
        kick = kick + np.sqrt(cfg.dt * rep) * z2
    return kick


def step(
    state: TrajectoryState,
    params: PhysParams,
    rates: DerivedRates,
    cfg: StepConfig,
) -> TrajectoryState:
    """Advance one coupled step; returns the same state object, mutated."""
    dt = cfg.dt
    spins = integrate_spins(
        state.spins, state.x, rates, params.w, dt, cfg.spin_scheme, cfg.spin_substeps
    )
    over = _clamp_populations(spins)
    state.max_overshoot = max(state.max_overshoot, over)
    if over > POP_OVERSHOOT_LIMIT:
        raise TrajectoryFailure(
            f"population overshoot {over:g} exceeds {POP_OVERSHOOT_LIMIT:g}",
            state.step_index,
            state.t,
            {"clamped_mass": state.clamped_mass, "max_overshoot": state.max_overshoot},
        )
    state.spins = spins

    sn = np.sin(state.x)
    f = drift_force(state.x, state.p, spins, rates)
    if cfg.noise_factor == "structured":
        kick = _structured_kick(state, params, rates, cfg, sn)
    else:
        if (state.step_index % cfg.refactor_interval) == 0 or state._factor is None:
            d = diffusion_matrix(state.x, spins, rates, params)
            state._factor = psd_project_and_factor(d)
            state.clamped_mass += state._factor.clamped_mass
        kick = sample_kick(state._factor, dt, state.rng)

    state.p = state.p + f * dt + kick
    state.x = state.x + (state.p / rates.mass) * dt
    state.t += dt
    state.step_index += 1
    if not (np.all(np.isfinite(state.p)) and np.all(np.isfinite(state.x))):
        raise TrajectoryFailure(
            "non-finite state",
            state.step_index,
            state.t,
            {"clamped_mass": state.clamped_mass, "max_overshoot": state.max_overshoot},
        )
    return state


@dataclass
class TrajectorySeries:
    """Per-trajectory observables on the sample grid plus the final phase point."""

    times: np.ndarray
    p2: np.ndarray
    corr: np.ndarray
    inversion: np.ndarray
    final_x: np.ndarray
    final_p: np.ndarray
    clamped_mass: float
    max_overshoot: float


def _observables(state: TrajectoryState, n: int) -> tuple[float, float, float]:
    p2 = float(np.mean(state.p**2))
    inv = float(np.mean(state.spins.pop))
    if n > 1:
        c = np.cos(state.x)
        sr = np.real(state.spins.matrix()) @ c
        corr = float((c @ sr - np.sum(state.spins.pop * c * c)) / (n * (n - 1)))
    else:
        corr = math.nan
    return p2, corr, inv


def sample_steps(n_steps: int, stride: int) -> np.ndarray:
    """Global step indices at which observables are recorded."""
    idx = list(range(0, n_steps, stride))
    if not idx or idx[-1] != n_steps:
        idx.append(n_steps)
    return np.asarray(idx, dtype=np.int64)


def run_trajectory(
    state: TrajectoryState,
    params: PhysParams,
    rates: DerivedRates,
    cfg: StepConfig,
    t_final: float,
    sample_stride: int = 1,
    recorder=None,
) -> TrajectorySeries:
    """Step until t >= t_final, recording observables every ``sample_stride`` steps.

    The initial state and the final step are always recorded.  ``recorder``,
    if given, is called with the state at each record point.
    """
    if t_final < 0.0:
        raise ValueError("t_final must be >= 0")
    n_steps = int(math.ceil(t_final / cfg.dt - 1e-9)) if t_final > 0.0 else 0
    rec = sample_steps(n_steps, max(1, sample_stride))
    n = params.n_atoms
    times = np.empty(rec.size)
    p2 = np.empty(rec.size)
    corr = np.empty(rec.size)
    inv = np.empty(rec.size)

    k = 0
    for target in rec:
        while state.step_index < target:
            step(state, params, rates, cfg)
        times[k] = state.step_index * cfg.dt
        p2[k], corr[k], inv[k] = _observables(state, n)
        if recorder is not None:
            recorder(state)
        k += 1
    return TrajectorySeries(
        times=times,
        p2=p2,
        corr=corr,
        inversion=inv,
        final_x=state.x.copy(),
        final_p=state.p.copy(),
        clamped_mass=state.clamped_mass,
        max_overshoot=state.max_overshoot,
    )
