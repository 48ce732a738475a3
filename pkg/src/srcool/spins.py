"""Second-order cumulant state of the pseudospins and its equations of motion.

A trajectory carries populations <sigma_j^+ sigma_j^-> and pair coherences
<sigma_j^+ sigma_l^-> (j < l); single-spin expectation values vanish by U(1)
symmetry.  Third-order cumulants are dropped, which closes the hierarchy on
these two moment families.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import DerivedRates

__all__ = [
    "SpinMoments",
    "CollectiveSums",
    "UndefinedObservableError",
    "collective_sums",
    "spin_rhs",
    "correlation_E",
    "mean_inversion",
]


class UndefinedObservableError(ValueError):
    """Observable is not defined for this system size."""


@dataclass
class SpinMoments:
    """Populations and strictly-upper-triangular pair coherences.

    ``pop[j]`` is <sigma_j^+ sigma_j^->, ``coh[j, l]`` for j < l is
    <sigma_j^+ sigma_l^->; the Hermitian extension coh[l, j] = conj(coh[j, l])
    is implied and entries with j >= l are kept at zero.
    """

    pop: np.ndarray
    coh: np.ndarray

    def __post_init__(self):
        self.pop = np.asarray(self.pop, dtype=float)
        self.coh = np.asarray(self.coh, dtype=complex)
        n = self.pop.shape[0]
        if self.coh.shape != (n, n):
            raise ValueError(f"coh must be ({n}, {n}), got {self.coh.shape}")

    @classmethod
    def ground(cls, n: int) -> "SpinMoments":
        return cls(np.zeros(n), np.zeros((n, n), dtype=complex))

    @property
    def n_atoms(self) -> int:
        return self.pop.shape[0]

    def matrix(self) -> np.ndarray:
        """Full Hermitian moment matrix M with M[j,j] = pop[j]."""
        return np.diag(self.pop.astype(complex)) + self.coh + self.coh.conj().T

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "SpinMoments":
        pop = np.real(np.diag(m)).copy()
        coh = np.triu(m, k=1)
        return cls(pop, coh)

    def copy(self) -> "SpinMoments":
        return SpinMoments(self.pop.copy(), self.coh.copy())


@dataclass
class CollectiveSums:
    """Sums over the collective dipole J^- = sum_l sigma_l^- cos(k x_l).

    ``sjJm[j]`` is <sigma_j^+ J^->; ``jpjm`` is <J^+ J^-> (real by Hermitian
    symmetry of the moment matrix).
    """

    sjJm: np.ndarray
    jpjm: float


def collective_sums(m: SpinMoments, x: np.ndarray) -> CollectiveSums:
    x = np.asarray(x, dtype=float)
    if x.shape[0] != m.n_atoms:
        raise ValueError(f"positions length {x.shape[0]} != n_atoms {m.n_atoms}")
    c = np.cos(x)
    s = m.matrix() @ c
    jpjm = float(np.real(c @ s))
    return CollectiveSums(sjJm=s, jpjm=jpjm)


def spin_rhs(m: SpinMoments, x: np.ndarray, rates: DerivedRates, w: float) -> SpinMoments:
    """Time derivative of the cumulant moments at frozen positions.

    Populations relax under pumping and collective emission,
        d pop_j/dt = w (1 - pop_j) - Re[(Gamma_C - i Gamma_Delta) cos(kx_j) <sigma_j^+ J^->],
    and the pair coherences follow the third-order-free closure with
    inversion factors (2 pop - 1) multiplying the collective drive terms.
    The result is returned in SpinMoments layout (``pop`` holds d pop/dt,
    ``coh`` holds d coh/dt on the strict upper triangle).
    """
    gc, gd = rates.gamma_c, rates.gamma_delta
    c = np.cos(np.asarray(x, dtype=float))
    pop = m.pop
    mat = m.matrix()
    s = mat @ c  # s[j] = <sigma_j^+ J^->
    gp = gc + 1j * gd

    pop_dot = w * (1.0 - pop) - np.real(np.conj(gp) * c * s)

    a = gp * c * c * pop
    u = 0.5 * gp * c * (2.0 * pop - 1.0)
    decay = w + a[:, None] + np.conj(a)[None, :]
    cdot = -decay * mat + np.outer(u, np.conj(s)) + np.outer(s, np.conj(u))
    return SpinMoments(pop_dot, np.triu(cdot, k=1))


def correlation_E(m: SpinMoments, x: np.ndarray) -> float:
    """Averaged spin-spin correlation: (<J^+J^-> - sum_j pop_j cos^2) / (N(N-1))."""
    n = m.n_atoms
    if n < 2:
        raise UndefinedObservableError("spin-spin correlation requires at least 2 atoms")
    c = np.cos(np.asarray(x, dtype=float))
    cs = collective_sums(m, x)
    return float((cs.jpjm - np.sum(m.pop * c * c)) / (n * (n - 1)))


def mean_inversion(m: SpinMoments) -> float:
    """Arithmetic mean of the populations."""
    return float(np.mean(m.pop))


def coherence_bound_excess(m: SpinMoments) -> float:
    """Worst violation of |coh_jl| <= sqrt(pop_j pop_l), a closure-health metric.

    The bound holds for any density matrix; the cumulant closure is not
    required to respect it, so this is monitored, never enforced.
    """
    n = m.n_atoms
    if n < 2:
        return 0.0
    bound = np.sqrt(np.outer(m.pop, m.pop))
    iu = np.triu_indices(n, k=1)
    return float(np.max(np.abs(m.coh[iu]) - bound[iu], initial=0.0))
