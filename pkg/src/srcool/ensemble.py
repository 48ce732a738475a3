"""Trajectory ensembles: parallel execution, statistics, fits, and sweeps.

Trajectories are independent and run on a thread pool (the compiled stepper
releases the GIL); aggregation is done in trajectory-index order so results
never depend on scheduling.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import curve_fit
from scipy.stats import chi2 as chi2_dist
from scipy.stats import norm as norm_dist

from .engine import run_trajectory_fast
from .params import PhysParams, derive_rates
from .trajectory import (
    InitConfig,
    StepConfig,
    TrajectoryFailure,
    TrajectorySeries,
    init_trajectory,
    run_trajectory,
    validate_step_config,
)

__all__ = [
    "EnsembleConfig",
    "EnsembleSeries",
    "MomentumHistogram",
    "EnsembleResult",
    "EnsembleFailure",
    "FitResult",
    "FitDegenerateError",
    "InsufficientDataError",
    "ShapeVerdict",
    "SweepRow",
    "run_ensemble",
    "fit_cooling_rate",
    "shape_verdict",
    "sweep",
    "final_width",
]

HIST_WIDE = (81, 20.0)
HIST_RECOIL = (41, 2.0)


class EnsembleFailure(RuntimeError):
    """A trajectory failed; carries enough seed information to reproduce it."""

    def __init__(self, message: str, master_seed: int, traj_index: int, run_id: int):
        super().__init__(message)
        self.master_seed = master_seed
        self.traj_index = traj_index
        self.run_id = run_id


class FitDegenerateError(RuntimeError):
    """The series does not span enough decay for an exponential fit."""


class InsufficientDataError(RuntimeError):
    """Too few pooled samples for a distribution-shape verdict."""


@dataclass(frozen=True)
class EnsembleConfig:
    n_traj: int
    t_final: float
    sample_stride: int
    master_seed: int
    workers: int | None = None
    engine: str = "fast"  # fast | reference
    run_id: int = 0
    histogram_mode: str = "auto"  # auto | wide | recoil


@dataclass
class EnsembleSeries:
    """Time-gridded ensemble statistics (atom- and trajectory-averaged)."""

    times: np.ndarray
    p2_mean: np.ndarray
    p2_sem: np.ndarray
    corrE_mean: np.ndarray
    corrE_sem: np.ndarray
    inversion_mean: np.ndarray
    n_traj: int


@dataclass
class MomentumHistogram:
    """Pooled final-momentum histogram; counts conserve n_traj * n_atoms."""

    edges: np.ndarray
    counts: np.ndarray
    total: int

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])


@dataclass
class EnsembleResult:
    series: EnsembleSeries
    histogram: MomentumHistogram
    final_p: np.ndarray  # pooled, (n_traj * n_atoms,)
    clamped_mass: float
    max_overshoot: float


def _one_trajectory(
    params: PhysParams, rates, step_cfg: StepConfig, init_cfg: InitConfig,
    cfg: EnsembleConfig, idx: int,
) -> TrajectorySeries:
    if cfg.engine == "reference":
        state = init_trajectory(params, init_cfg, cfg.master_seed, idx, cfg.run_id, rates=rates)
        return run_trajectory(state, params, rates, step_cfg, cfg.t_final, cfg.sample_stride)
    return run_trajectory_fast(
        params, rates, step_cfg, init_cfg, cfg.t_final, cfg.sample_stride,
        cfg.master_seed, idx, cfg.run_id,
    )


def make_histogram(p_pooled: np.ndarray, mode: str = "auto") -> MomentumHistogram:
    """Histogram pooled momenta; samples beyond the range land in the edge bins."""
    if mode == "auto":
        mode = "recoil" if math.sqrt(float(np.mean(p_pooled**2))) < 2.0 else "wide"
    nbins, half = HIST_RECOIL if mode == "recoil" else HIST_WIDE
    edges = np.linspace(-half, half, nbins + 1)
    clipped = np.clip(p_pooled, -half * (1 - 1e-12), half * (1 - 1e-12))
    counts, _ = np.histogram(clipped, bins=edges)
    return MomentumHistogram(edges=edges, counts=counts, total=int(p_pooled.size))


def run_ensemble(
    params: PhysParams,
    step_cfg: StepConfig,
    init_cfg: InitConfig,
    cfg: EnsembleConfig,
) -> EnsembleResult:
    """Run cfg.n_traj independent trajectories and aggregate.

    Any trajectory failure aborts the whole ensemble; the exception names the
    (master_seed, run_id, trajectory index) triple that reproduces it.
    """
    rates = derive_rates(params)
    validate_step_config(step_cfg, params, rates, init_cfg.dp0)
    workers = cfg.workers or os.cpu_count() or 1

    def job(idx: int) -> TrajectorySeries:
        return _one_trajectory(params, rates, step_cfg, init_cfg, cfg, idx)

    results: list[TrajectorySeries | None] = [None] * cfg.n_traj
    if workers == 1:
        for i in range(cfg.n_traj):
            try:
                results[i] = job(i)
            except TrajectoryFailure as exc:
                raise EnsembleFailure(
                    f"trajectory {i} (master_seed={cfg.master_seed}, run_id={cfg.run_id}) "
                    f"failed: {exc}",
                    cfg.master_seed, i, cfg.run_id,
                ) from exc
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(job, i): i for i in range(cfg.n_traj)}
            for fut, i in futures.items():
                try:
                    results[i] = fut.result()
                except TrajectoryFailure as exc:
                    raise EnsembleFailure(
                        f"trajectory {i} (master_seed={cfg.master_seed}, run_id={cfg.run_id}) "
                        f"failed: {exc}",
                        cfg.master_seed, i, cfg.run_id,
                    ) from exc

    p2 = np.stack([r.p2 for r in results])  # (n_traj, n_rec)
    corr = np.stack([r.corr for r in results])
    inv = np.stack([r.inversion for r in results])
    nt = cfg.n_traj
    sem = p2.std(axis=0, ddof=1) / math.sqrt(nt) if nt > 1 else np.zeros(p2.shape[1])
    if params.n_atoms > 1 and nt > 1:
        corr_sem = corr.std(axis=0, ddof=1) / math.sqrt(nt)
    else:
        corr_sem = np.zeros(p2.shape[1])
    series = EnsembleSeries(
        times=results[0].times,
        p2_mean=p2.mean(axis=0),
        p2_sem=sem,
        corrE_mean=corr.mean(axis=0),
        corrE_sem=corr_sem,
        inversion_mean=inv.mean(axis=0),
        n_traj=nt,
    )
    final_p = np.concatenate([r.final_p for r in results])
    hist = make_histogram(final_p, cfg.histogram_mode)
    return EnsembleResult(
        series=series,
        histogram=hist,
        final_p=final_p,
        clamped_mass=float(sum(r.clamped_mass for r in results)),
        max_overshoot=float(max(r.max_overshoot for r in results)),
    )


def final_width(series: EnsembleSeries, tail_fraction: float = 0.1) -> tuple[float, float]:
    """Time-averaged late-time (<p^2>, sem) over the last ``tail_fraction`` of samples."""
    k = max(1, int(round(tail_fraction * series.times.size)))
    return float(series.p2_mean[-k:].mean()), float(np.mean(series.p2_sem[-k:]) / math.sqrt(k))


@dataclass
class FitResult:
    """Exponential-decay fit p2(t) = amplitude * exp(-rate t) + asymptote."""

    rate: float
    asymptote: float
    amplitude: float
    rms_residual: float
    window: tuple[float, float]


def _exp_model(t, a, r, c):
    return a * np.exp(-r * t) + c


def _fit_once(
    t: np.ndarray, y: np.ndarray, c_fixed: float | None = None
) -> tuple[float, float, float]:
    """One bounded least-squares pass; the asymptote is >= 0 (it is a <p^2>).

    With ``c_fixed`` the asymptote is frozen and only (amplitude, rate) are
    fitted: on a window truncated before the tail the asymptote is not
    identifiable, so the standardized second pass pins it to the full-window
    value.
    """
    c0 = float(y[-1]) if c_fixed is None else c_fixed
    a0 = max(float(y[0] - c0), 1e-12)
    mid = y[len(y) // 2] - c0
    t_mid = t[len(t) // 2] - t[0]
    if mid > 0 and mid < a0 and t_mid > 0:
        r0 = -math.log(mid / a0) / t_mid
    else:
        r0 = 1.0 / max(t[-1] - t[0], 1e-30)
    r0 = max(r0, 1e-3 / max(t[-1] - t[0], 1e-30))
    if c_fixed is None:
        popt, _ = curve_fit(
            _exp_model, t - t[0], y, p0=(a0, r0, max(c0, 0.0)), maxfev=20000,
            bounds=((0.0, 0.0, 0.0), (np.inf, np.inf, np.inf)),
        )
        return float(popt[0]), float(popt[1]), float(popt[2])
    popt, _ = curve_fit(
        lambda tt, a, r: _exp_model(tt, a, r, c_fixed), t - t[0], y,
        p0=(a0, r0), maxfev=20000, bounds=((0.0, 0.0), (np.inf, np.inf)),
    )
    return float(popt[0]), float(popt[1]), c_fixed


def fit_cooling_rate(
    times: np.ndarray, p2: np.ndarray, window: tuple[float, float] | None = None
) -> FitResult:
    """Least-squares exponential fit with a deterministic two-pass window.

    Unless an explicit window is given, the fit is repeated on the span from
    t = 0 to the first time p2 reaches asymptote + 0.1 * amplitude, which
    standardizes the notion of "cooling rate" across runs.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(p2, dtype=float)
    if window is not None:
        m = (t >= window[0]) & (t <= window[1])
        t, y = t[m], y[m]
    if t.size < 4:
        raise FitDegenerateError("too few samples in fit window")
    ymax, ymin = float(np.max(y)), float(np.min(y))
    if not (ymax > 1.5 * max(ymin, 1e-30)) or ymin == ymax:
        raise FitDegenerateError("series is too flat to fit a decay")
    a, r, c = _fit_once(t, y)
    if y[0] <= 2.0 * c:
        raise FitDegenerateError(
            f"initial p2 {y[0]:g} does not exceed twice the asymptote {c:g}"
        )
    if window is None:
        # truncate to the standardized window and refit with the asymptote
        # pinned to the full-window value
        cross = np.nonzero(y <= c + 0.1 * a)[0]
        if cross.size and cross[0] > 3:
            t2, y2 = t[: cross[0] + 1], y[: cross[0] + 1]
            a, r, c = _fit_once(t2, y2, c_fixed=c)
            t, y = t2, y2
    if not (r > 0.0) or not math.isfinite(r):
        raise FitDegenerateError(f"fit produced a non-positive rate {r:g}")
    resid = y - _exp_model(t - t[0], a, r, c)
    return FitResult(
        rate=r,
        asymptote=c,
        amplitude=a,
        rms_residual=float(np.sqrt(np.mean(resid**2))),
        window=(float(t[0]), float(t[-1])),
    )


@dataclass
class ShapeVerdict:
    mode: str
    passed: bool
    chi2: float
    chi2_pvalue: float
    dof: int
    excess_kurtosis: float | None = None
    kurtosis_z: float | None = None
    tail_fraction: float | None = None
    details: str = ""


def _binned_moments(h: MomentumHistogram) -> tuple[float, float, float]:
    """Mean, variance and 4th central moment with Sheppard's grouping corrections."""
    c = h.centers
    w = h.counts / h.total
    step = float(np.diff(h.edges).mean())
    mean = float(np.sum(w * c))
    var_raw = float(np.sum(w * (c - mean) ** 2))
    m4_raw = float(np.sum(w * (c - mean) ** 4))
    var = max(var_raw - step**2 / 12.0, step**2 / 100.0)
    m4 = max(m4_raw - 0.5 * step**2 * var_raw + (7.0 / 240.0) * step**4, step**4 / 100.0)
    return mean, var, m4


def shape_verdict(
    h: MomentumHistogram,
    mode: str,
    significance: float = 0.01,
    tail_limit: float = 0.02,
) -> ShapeVerdict:
    """Goodness-of-fit verdict for the pooled momentum distribution.

    gaussian: chi-square against a Gaussian fitted from the binned moments,
    plus a two-sided excess-kurtosis test; both must be compatible.
    uniform: chi-square for flatness over the interior of [-hbar k, hbar k]
    (bins straddling or adjacent to the +-1 edges are excluded, since a
    finite-dt simulation rounds the shoulders) plus a tail-mass limit outside
    [-1.2, 1.2].
    """
    if h.total < 1000:
        raise InsufficientDataError(f"need >= 1000 pooled samples, got {h.total}")
    if mode == "gaussian":
        mean, var, m4 = _binned_moments(h)
        sigma = math.sqrt(var)
        # the outermost bins absorb clipped samples and are excluded; the
        # chi-square is conditional on the interior region, with (mean, sigma)
        # fitted to the interior so a clipped range does not bias the verdict
        interior = np.zeros(h.counts.size, dtype=bool)
        interior[1:-1] = True
        n_int = h.counts[interior].sum()
        counts = h.counts[interior].astype(float)

        def conditional_expected(mu, sg):
            frac = np.diff(norm_dist.cdf(h.edges, loc=mu, scale=sg))
            mass = frac[interior].sum()
            return frac, frac[interior] / max(mass, 1e-300) * n_int

        def residuals(theta):
            _, e = conditional_expected(theta[0], math.exp(theta[1]))
            return (counts - e) / np.sqrt(np.maximum(e, 1e-12))

        from scipy.optimize import least_squares

        sol = least_squares(residuals, x0=(mean, math.log(max(sigma, 1e-12))), method="lm")
        mean, sigma = float(sol.x[0]), float(math.exp(sol.x[1]))
        expected_frac, expected = conditional_expected(mean, sigma)
        keep = expected >= 5.0
        # merge low-expectation bins into one pooled cell
        chi_counts = list(counts[keep])
        chi_expect = list(expected[keep])
        if np.any(~keep):
            chi_counts.append(counts[~keep].sum())
            chi_expect.append(expected[~keep].sum())
        chi_counts = np.array(chi_counts)
        chi_expect = np.array(chi_expect)
        ok_cells = chi_expect > 0
        chi2 = float(np.sum((chi_counts[ok_cells] - chi_expect[ok_cells]) ** 2 / chi_expect[ok_cells]))
        dof = int(np.sum(ok_cells)) - 3
        pval = float(chi2_dist.sf(chi2, dof)) if dof > 0 else 0.0
        # the kurtosis moment test is only meaningful when the histogram range
        # holds essentially all of the fitted distribution
        clipped_mass = 1.0 - float(expected_frac.sum())
        g2 = m4 / var**2 - 3.0
        se = math.sqrt(24.0 / h.total)
        zcrit = float(norm_dist.isf(significance / 2.0))
        kurtosis_applies = clipped_mass < 1e-3
        ok = pval >= significance and (not kurtosis_applies or abs(g2) <= zcrit * se)
        return ShapeVerdict(
            mode=mode, passed=bool(ok), chi2=chi2, chi2_pvalue=pval, dof=dof,
            excess_kurtosis=g2, kurtosis_z=g2 / se,
            details=(
                f"chi2={chi2:.1f} (dof={dof}, p={pval:.3g}), kurtosis z={g2 / se:.2f}"
                + ("" if kurtosis_applies else " (kurtosis skipped: range-limited)")
            ),
        )
    if mode == "uniform":
        width = float(np.diff(h.edges).mean())
        inner = (h.edges[:-1] >= -1.0 + 1.5 * width) & (h.edges[1:] <= 1.0 - 1.5 * width)
        counts = h.counts[inner]
        if counts.size < 4:
            raise InsufficientDataError("histogram too coarse for the uniform verdict")
        expected = np.full(counts.size, counts.sum() / counts.size)
        chi2 = float(np.sum((counts - expected) ** 2 / expected))
        dof = counts.size - 1
        pval = float(chi2_dist.sf(chi2, dof))
        tails = h.counts[(h.edges[1:] <= -1.2) | (h.edges[:-1] >= 1.2)].sum()
        tail_frac = float(tails / h.total)
        ok = pval >= significance and tail_frac <= tail_limit
        return ShapeVerdict(
            mode=mode, passed=bool(ok), chi2=chi2, chi2_pvalue=pval, dof=dof,
            tail_fraction=tail_frac,
            details=(
                f"chi2={chi2:.1f} (dof={dof}, p={pval:.3g}), "
                f"tail(|p|>1.2)={tail_frac:.4f}"
            ),
        )
    raise ValueError(f"unknown shape mode {mode!r}")


@dataclass
class SweepRow:
    value: float
    status: str  # "ok" | "failed"
    w: float
    n_traj: int
    final_dp: float = math.nan
    final_p2: float = math.nan
    final_p2_sem: float = math.nan
    corrE: float = math.nan
    corrE_sem: float = math.nan
    rate: float = math.nan
    rate_asymptote: float = math.nan
    clamped_mass: float = math.nan
    error: str = ""


@dataclass(frozen=True)
class SweepOverrides:
    """Optional per-value settings; each list must match len(values)."""

    w: list[float] | None = None
    t_final: list[float] | None = None
    n_traj: list[int] | None = None
    dp0: list[float] | None = None


def sweep(
    axis: str,
    values: list[float],
    base_params: PhysParams,
    step_cfg: StepConfig | None,
    init_cfg: InitConfig,
    ens_cfg: EnsembleConfig,
    overrides: SweepOverrides = SweepOverrides(),
    on_row=None,
    auto_dt_per_value: bool = True,
) -> list[SweepRow]:
    """One ensemble per value of ``axis`` in {n_atoms, gamma_c, w}.

    Per-value failures are recorded in the row and the sweep continues.  Each
    row gets its own run_id so its trajectory seeds are independent of the
    other rows.  ``on_row`` is called after each row completes, which lets the
    caller persist partial results.
    """
    if axis not in ("n_atoms", "gamma_c", "w"):
        raise ValueError(f"unknown sweep axis {axis!r}")
    if not values:
        raise ValueError("sweep values must be nonempty")
    for name in ("w", "t_final", "n_traj", "dp0"):
        lst = getattr(overrides, name)
        if lst is not None and len(lst) != len(values):
            raise ValueError(f"override list {name} must match values length")
    from .trajectory import auto_dt as _auto_dt

    rows: list[SweepRow] = []
    for i, v in enumerate(values):
        if axis == "n_atoms":
            params = replace(base_params, n_atoms=int(v))
        elif axis == "gamma_c":
            params = replace(base_params, gamma_c=float(v), g=None)
        else:
            params = replace(base_params, w=float(v))
        if overrides.w is not None:
            params = replace(params, w=float(overrides.w[i]))
        icfg = init_cfg if overrides.dp0 is None else replace(init_cfg, dp0=float(overrides.dp0[i]))
        ecfg = replace(
            ens_cfg,
            run_id=ens_cfg.run_id + i + 1,
            n_traj=ens_cfg.n_traj if overrides.n_traj is None else int(overrides.n_traj[i]),
            t_final=ens_cfg.t_final if overrides.t_final is None else float(overrides.t_final[i]),
        )
        rates = derive_rates(params)
        if step_cfg is None or auto_dt_per_value:
            dt = _auto_dt(params, rates, icfg.dp0)
            scfg = StepConfig(dt=dt) if step_cfg is None else replace(step_cfg, dt=dt)
        else:
            scfg = step_cfg
        row = SweepRow(value=float(v), status="ok", w=params.w, n_traj=ecfg.n_traj)
        try:
            res = run_ensemble(params, scfg, icfg, ecfg)
            p2f, p2f_sem = final_width(res.series)
            row.final_p2 = p2f
            row.final_p2_sem = p2f_sem
            row.final_dp = math.sqrt(p2f)
            k = max(1, res.series.times.size // 10)
            if params.n_atoms > 1:
                row.corrE = float(res.series.corrE_mean[-k:].mean())
                row.corrE_sem = float(np.mean(res.series.corrE_sem[-k:]) / math.sqrt(k))
            row.clamped_mass = res.clamped_mass
            try:
                fit = fit_cooling_rate(res.series.times, res.series.p2_mean)
                row.rate = fit.rate
                row.rate_asymptote = fit.asymptote
            except FitDegenerateError as exc:
                row.error = f"no rate fit: {exc}"
        except EnsembleFailure as exc:
            row.status = "failed"
            row.error = str(exc)
        rows.append(row)
        if on_row is not None:
            on_row(row)
    return rows
