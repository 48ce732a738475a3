"""Compiled per-trajectory integrator used for production ensembles.

Mirrors the reference implementation in :mod:`srcool.trajectory` formula for
formula, with the moment matrix split into real and imaginary parts for SIMD
throughput and the noise normals pre-generated in chunks from the same
per-trajectory Philox stream.  A short-run agreement test against the
reference path pins the two implementations together.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from .params import DerivedRates, PhysParams
from .trajectory import (
    InitConfig,
    POP_OVERSHOOT_LIMIT,
    StepConfig,
    TrajectoryFailure,
    TrajectorySeries,
    make_trajectory_rng,
    sample_steps,
)

__all__ = ["run_trajectory_fast"]

_CHUNK = 4096

_STATUS_OK = 0
_STATUS_OVERSHOOT = 1
_STATUS_NONFINITE = 2


@njit(cache=True, nogil=True, fastmath=True, inline="always")
def _spin_deriv(mr, mi, c, w, gc, gd, rr, ri, sr, si):
    """Cumulant RHS on the real/imag split Hermitian moment matrix."""
    n = mr.shape[0]
    for j in range(n):
        ar = 0.0
        ai = 0.0
        for l in range(n):
            ar += mr[j, l] * c[l]
            ai += mi[j, l] * c[l]
        sr[j] = ar
        si[j] = ai
    for j in range(n):
        rr[j, j] = w * (1.0 - mr[j, j]) - c[j] * (gc * sr[j] + gd * si[j])
        ri[j, j] = 0.0
    for j in range(n):
        aj_r = gc * c[j] * c[j] * mr[j, j]
        aj_i = gd * c[j] * c[j] * mr[j, j]
        uj_r = 0.5 * gc * c[j] * (2.0 * mr[j, j] - 1.0)
        uj_i = 0.5 * gd * c[j] * (2.0 * mr[j, j] - 1.0)
        for l in range(j + 1, n):
            al_r = gc * c[l] * c[l] * mr[l, l]
            al_i = gd * c[l] * c[l] * mr[l, l]
            ul_r = 0.5 * gc * c[l] * (2.0 * mr[l, l] - 1.0)
            ul_i = 0.5 * gd * c[l] * (2.0 * mr[l, l] - 1.0)
            wr = w + aj_r + al_r
            wi = aj_i - al_i
            dr = (
                -(wr * mr[j, l] - wi * mi[j, l])
                + uj_r * sr[l] + uj_i * si[l]
                + sr[j] * ul_r + si[j] * ul_i
            )
            di = (
                -(wr * mi[j, l] + wi * mr[j, l])
                + uj_i * sr[l] - uj_r * si[l]
                + si[j] * ul_r - sr[j] * ul_i
            )
            rr[j, l] = dr
            ri[j, l] = di
            rr[l, j] = dr
            ri[l, j] = -di


@njit(cache=True, nogil=True, fastmath=True, inline="always")
def _advance_spins(
    mr, mi, c, w, gc, gd, dt, scheme, substeps,
    k1r, k1i, k2r, k2i, k3r, k3i, k4r, k4i, tr, ti, sr, si,
):
    n = mr.shape[0]
    h = dt / substeps
    for _ in range(substeps):
        if scheme == 0:  # euler
            _spin_deriv(mr, mi, c, w, gc, gd, k1r, k1i, sr, si)
            for j in range(n):
                for l in range(n):
                    mr[j, l] += h * k1r[j, l]
                    mi[j, l] += h * k1i[j, l]
        else:  # rk4
            _spin_deriv(mr, mi, c, w, gc, gd, k1r, k1i, sr, si)
            for j in range(n):
                for l in range(n):
                    tr[j, l] = mr[j, l] + 0.5 * h * k1r[j, l]
                    ti[j, l] = mi[j, l] + 0.5 * h * k1i[j, l]
            _spin_deriv(tr, ti, c, w, gc, gd, k2r, k2i, sr, si)
            for j in range(n):
                for l in range(n):
                    tr[j, l] = mr[j, l] + 0.5 * h * k2r[j, l]
                    ti[j, l] = mi[j, l] + 0.5 * h * k2i[j, l]
            _spin_deriv(tr, ti, c, w, gc, gd, k3r, k3i, sr, si)
            for j in range(n):
                for l in range(n):
                    tr[j, l] = mr[j, l] + h * k3r[j, l]
                    ti[j, l] = mi[j, l] + h * k3i[j, l]
            _spin_deriv(tr, ti, c, w, gc, gd, k4r, k4i, sr, si)
            for j in range(n):
                for l in range(n):
                    mr[j, l] += (h / 6.0) * (
                        k1r[j, l] + 2.0 * k2r[j, l] + 2.0 * k3r[j, l] + k4r[j, l]
                    )
                    mi[j, l] += (h / 6.0) * (
                        k1i[j, l] + 2.0 * k2i[j, l] + 2.0 * k3i[j, l] + k4i[j, l]
                    )


@njit(cache=True, nogil=True, inline="always")
def _psd_factor(d, lfac):
    """Eigen-clamp to PSD and store U*sqrt(lambda) in lfac; returns clamped mass."""
    n = d.shape[0]
    if n == 1:
        # scalar case: identical to eigh's U*sqrt(lambda), without LAPACK overhead
        v = d[0, 0]
        if v < 0.0:
            lfac[0, 0] = 0.0
            return -v
        lfac[0, 0] = math.sqrt(v)
        return 0.0
    vals, vecs = np.linalg.eigh(d)
    clamped = 0.0
    for i in range(n):
        if vals[i] < 0.0:
            clamped -= vals[i]
            vals[i] = 0.0
    for j in range(n):
        for l in range(n):
            lfac[j, l] = vecs[j, l] * math.sqrt(vals[l])
    return clamped


@njit(cache=True, nogil=True, fastmath=True, inline="always")
def _record(x, p, mr, n, out):
    """out[0:3] = (mean p^2, correlation observable, mean inversion)."""
    p2 = 0.0
    for j in range(n):
        p2 += p[j] * p[j]
    p2 /= n
    inv = 0.0
    for j in range(n):
        inv += mr[j, j]
    inv /= n
    if n > 1:
        jpjm = 0.0
        pc2 = 0.0
        for j in range(n):
            cj = math.cos(x[j])
            acc = 0.0
            for l in range(n):
                acc += mr[j, l] * math.cos(x[l])
            jpjm += cj * acc
            pc2 += mr[j, j] * cj * cj
        corr = (jpjm - pc2) / (n * (n - 1.0))
    else:
        corr = np.nan
    out[0] = p2
    out[1] = corr
    out[2] = inv


@njit(cache=True, nogil=True, fastmath=True)
def _advance_chunk(
    x, p, mr, mi, lfac,
    zmat,
    w, gc, gd, eta, mass, kp2wu2,
    dt, scheme, substeps, refactor, noise_mode,
    step0, n_steps_total, stride,
    rec_vals, rec_count,
    diag,
):
    """Advance len(zmat) steps starting after global step ``step0``.

    rec_vals is (n_records, 3); diag is (clamped_mass, max_overshoot,
    fail_step).  Returns a status code; on failure diag[2] holds the step.
    """
    n = x.shape[0]
    c = np.empty(n)
    sn = np.empty(n)
    srv = np.empty(n)
    siv = np.empty(n)
    fr = np.empty(n)
    q = np.empty(n)
    kick = np.empty(n)
    dmat = np.empty((n, n))
    obs = np.empty(3)
    k1r = np.empty((n, n))
    k1i = np.empty((n, n))
    k2r = np.empty((n, n))
    k2i = np.empty((n, n))
    k3r = np.empty((n, n))
    k3i = np.empty((n, n))
    k4r = np.empty((n, n))
    k4i = np.empty((n, n))
    tmr = np.empty((n, n))
    tmi = np.empty((n, n))
    svr = np.empty(n)
    svi = np.empty(n)
    chunk_len = zmat.shape[0]

    for i in range(chunk_len):
        s_global = step0 + i + 1
        for j in range(n):
            c[j] = math.cos(x[j])
            sn[j] = math.sin(x[j])

        _advance_spins(
            mr, mi, c, w, gc, gd, dt, scheme, substeps,
            k1r, k1i, k2r, k2i, k3r, k3i, k4r, k4i, tmr, tmi, svr, svi,
        )

        over = 0.0
        for j in range(n):
            v = mr[j, j]
            o = -v if -v > v - 1.0 else v - 1.0
            if o > over:
                over = o
            if v < 0.0:
                mr[j, j] = 0.0
            elif v > 1.0:
                mr[j, j] = 1.0
        if over > diag[1]:
            diag[1] = over
        if over > POP_OVERSHOOT_LIMIT:
            diag[2] = s_global
            return _STATUS_OVERSHOOT

        # drift force from the updated moments at start-of-step positions
        for j in range(n):
            ar = 0.0
            ai = 0.0
            for l in range(n):
                ar += mr[j, l] * c[l]
                ai += mi[j, l] * c[l]
            srv[j] = ar
            siv[j] = ai
            q[j] = sn[j] * p[j]
        for j in range(n):
            acc = 0.0
            for l in range(n):
                acc += mr[j, l] * q[l]
            fr[j] = acc

        if noise_mode == 0:
            # exact: factor the full diffusion matrix, reuse for `refactor` steps
            if (s_global - 1) % refactor == 0:
                for j in range(n):
                    for l in range(n):
                        dmat[j, l] = gc * sn[j] * sn[l] * mr[j, l]
                    if kp2wu2 > 0.0:
                        dmat[j, j] += kp2wu2 * (1.0 - mr[j, j])
                diag[0] += _psd_factor(dmat, lfac)
            sq = math.sqrt(dt)
            for j in range(n):
                acc = 0.0
                for l in range(n):
                    acc += lfac[j, l] * zmat[i, l]
                kick[j] = sq * acc
        else:
            # structured: factor the spin part only; apply live sin(kx) projection
            if (s_global - 1) % refactor == 0:
                diag[0] += gc * _psd_factor(mr.copy(), lfac)
            sq = math.sqrt(gc * dt)
            for j in range(n):
                acc = 0.0
                for l in range(n):
                    acc += lfac[j, l] * zmat[i, l]
                kick[j] = sq * sn[j] * acc
            if kp2wu2 > 0.0:
                for j in range(n):
                    rep = kp2wu2 * (1.0 - mr[j, j])
                    kick[j] += math.sqrt(dt * rep) * zmat[i, n + j]

        for j in range(n):
            p[j] += (
                gc * sn[j] * (siv[j] - srv[j]) - eta * gc * sn[j] * fr[j]
            ) * dt + kick[j]
            x[j] += (p[j] / mass) * dt

        if s_global % stride == 0 or s_global == n_steps_total:
            _record(x, p, mr, n, obs)
            k = rec_count[0]
            rec_vals[k, 0] = obs[0]
            rec_vals[k, 1] = obs[1]
            rec_vals[k, 2] = obs[2]
            rec_count[0] = k + 1
            if not (math.isfinite(obs[0]) and math.isfinite(obs[2])):
                diag[2] = s_global
                return _STATUS_NONFINITE
    return _STATUS_OK


def run_trajectory_fast(
    params: PhysParams,
    rates: DerivedRates,
    cfg: StepConfig,
    init_cfg: InitConfig,
    t_final: float,
    sample_stride: int,
    master_seed: int,
    traj_index: int = 0,
    run_id: int = 0,
) -> TrajectorySeries:
    """Compiled equivalent of init_trajectory + run_trajectory."""
    n = params.n_atoms
    rng = make_trajectory_rng(master_seed, traj_index, run_id)
    x = rng.random(n) * (2.0 * math.pi)
    p = init_cfg.dp0 * rng.standard_normal(n)
    mr = np.zeros((n, n))
    mi = np.zeros((n, n))
    np.fill_diagonal(mr, params.w / (params.w + rates.gamma_c * np.cos(x) ** 2))

    n_steps = int(math.ceil(t_final / cfg.dt - 1e-9)) if t_final > 0.0 else 0
    rec = sample_steps(n_steps, max(1, sample_stride))
    rec_vals = np.empty((rec.size, 3))
    rec_count = np.zeros(1, dtype=np.int64)
    diag = np.zeros(3)

    obs = np.empty(3)
    _record(x, p, mr, n, obs)
    rec_vals[0] = obs
    rec_count[0] = 1

    scheme = 0 if cfg.spin_scheme == "euler" else 1
    noise_mode = 0 if cfg.noise_factor == "exact" else 1
    kp2wu2 = params.kprime_ratio**2 * params.w * params.u2bar
    nz = n if noise_mode == 0 else (2 * n if kp2wu2 > 0.0 else n)
    lfac = np.zeros((n, n))

    done = 0
    status = _STATUS_OK
    while done < n_steps:
        m = min(_CHUNK, n_steps - done)
        zmat = rng.standard_normal((m, nz))
        status = _advance_chunk(
            x, p, mr, mi, lfac, zmat,
            params.w, rates.gamma_c, rates.gamma_delta, rates.eta, rates.mass, kp2wu2,
            cfg.dt, scheme, cfg.spin_substeps, cfg.refactor_interval, noise_mode,
            done, n_steps, max(1, sample_stride),
            rec_vals, rec_count, diag,
        )
        if status != _STATUS_OK:
            break
        done += m

    if status != _STATUS_OK:
        what = "population overshoot" if status == _STATUS_OVERSHOOT else "non-finite state"
        raise TrajectoryFailure(
            what,
            int(diag[2]),
            diag[2] * cfg.dt,
            {"clamped_mass": diag[0], "max_overshoot": diag[1]},
        )
    return TrajectorySeries(
        times=rec * cfg.dt,
        p2=rec_vals[:, 0].copy(),
        corr=rec_vals[:, 1].copy(),
        inversion=rec_vals[:, 2].copy(),
        final_x=x,
        final_p=p,
        clamped_mass=float(diag[0]),
        max_overshoot=float(diag[1]),
    )
