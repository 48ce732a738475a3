"""Drift force, momentum diffusion matrix, PSD projection, and noise sampling.

Momenta are in units of hbar*k and positions in 1/k, so the prefactors
hbar*k and hbar^2 k^2 of the force and diffusion are unity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import DerivedRates, PhysParams
from .spins import SpinMoments

__all__ = [
    "DiffusionFactor",
    "drift_force",
    "diffusion_matrix",
    "psd_project_and_factor",
    "sample_kick",
]


def drift_force(
    x: np.ndarray, p: np.ndarray, m: SpinMoments, rates: DerivedRates
) -> np.ndarray:
    """Deterministic part of dp_j/dt: adiabatic dipole force plus retardation friction.

    f_j = Gamma_C sin(kx_j) (Im - Re)[<sigma_j^+ J^->]
          - eta Gamma_C sin(kx_j) sum_l Re[<sigma_j^+ sigma_l^->] sin(kx_l) p_l
    with the l = j term of the friction sum using the population.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    sn = np.sin(x)
    c = np.cos(x)
    mat = m.matrix()
    s = mat @ c
    conservative = rates.gamma_c * sn * (np.imag(s) - np.real(s))
    friction = -rates.eta * rates.gamma_c * sn * (np.real(mat) @ (sn * p))
    return conservative + friction


def diffusion_matrix(
    x: np.ndarray, m: SpinMoments, rates: DerivedRates, params: PhysParams
) -> np.ndarray:
    """Momentum diffusion matrix D (hbar^2 k^2 per unit time).

    Cavity output noise couples atoms pairwise through the coherences; the
    repump recoil contributes only on the diagonal, through k'^2 w u2bar
    times the ground population <sigma_j^- sigma_j^+> = 1 - pop_j.
    """
    x = np.asarray(x, dtype=float)
    sn = np.sin(x)
    d = rates.gamma_c * np.outer(sn, sn) * np.real(m.matrix())
    kp2 = params.kprime_ratio**2
    if kp2 > 0.0:
        d = d + np.diag(kp2 * params.w * params.u2bar * (1.0 - m.pop))
    return d


@dataclass
class DiffusionFactor:
    """PSD-projected diffusion matrix and a factor L with L @ L.T = d_psd.

    ``clamped_mass`` is the total magnitude of negative eigenvalues removed by
    the projection; nonzero values diagnose cumulant-closure violations.
    """

    d_raw: np.ndarray
    d_psd: np.ndarray
    factor: np.ndarray
    clamped_mass: float


def psd_project_and_factor(d: np.ndarray) -> DiffusionFactor:
    """Eigen-clamp D to the PSD cone and factor it as (U sqrt(Lambda)).

    The closure-level D is symmetric by construction but may acquire small
    negative eigenvalues; those are clamped to zero and their total magnitude
    reported.  The factor is U sqrt(Lambda) rather than a Cholesky factor, so
    it is insensitive to atom ordering.
    """
    d = np.asarray(d, dtype=float)
    scale = max(1.0, float(np.max(np.abs(d))) if d.size else 1.0)
    if np.max(np.abs(d - d.T)) > 1e-12 * scale:
        raise ValueError("diffusion matrix must be symmetric")
    vals, vecs = np.linalg.eigh(d)
    clamped = float(-np.sum(vals[vals < 0.0]))
    vals = np.clip(vals, 0.0, None)
    d_psd = (vecs * vals) @ vecs.T
    factor = vecs * np.sqrt(vals)
    return DiffusionFactor(d_raw=d, d_psd=d_psd, factor=factor, clamped_mass=clamped)


def sample_kick(f: DiffusionFactor, dt: float, rng: np.random.Generator) -> np.ndarray:
    """One momentum kick with covariance d_psd * dt: sqrt(dt) * L @ z."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    z = rng.standard_normal(f.factor.shape[1])
    return np.sqrt(dt) * (f.factor @ z)
