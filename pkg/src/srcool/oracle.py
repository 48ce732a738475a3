"""Exact Lindblad evolution of the spin-only master equation for N <= 3.

Ground truth for the cumulant closure: the cavity-eliminated master equation
has Hamiltonian -(Gamma_Delta/2) J^+ J^-, collective decay Gamma_C L[J^-],
and independent pumping w L[sigma_j^+].  At frozen classical positions the
repump recoil phases are pure numbers of unit modulus and drop out of the
dissipator.  Superoperators are built dense (dimension 4^N), so the atom
count is hard-capped at 3.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .params import DerivedRates
from .spins import SpinMoments, spin_rhs

__all__ = [
    "CapacityError",
    "DegenerateSteadyStateError",
    "LiouvillianSpec",
    "SpinDensityMatrix",
    "build_generator",
    "steady_state",
    "moments_from_rho",
    "rho_from_populations",
    "evolve",
    "compare_cumulant",
    "CumulantComparison",
]

MAX_ORACLE_ATOMS = 3

_SM = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # sigma^- = |g><e|
_ID2 = np.eye(2, dtype=complex)


class CapacityError(ValueError):
    """Requested system exceeds the dense-superoperator capacity."""


class DegenerateSteadyStateError(RuntimeError):
    """The generator's null space has dimension > 1."""

    def __init__(self, multiplicity: int):
        super().__init__(f"steady state is degenerate (null-space dimension {multiplicity})")
        self.multiplicity = multiplicity


@dataclass(frozen=True)
class LiouvillianSpec:
    """Rates and frozen positions defining the spin-only generator."""

    gamma_c: float
    gamma_delta: float
    w: float
    positions: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float))
        if self.positions.ndim != 1:
            raise ValueError("positions must be a 1-d array")
        if self.n_atoms > MAX_ORACLE_ATOMS:
            raise CapacityError(
                f"exact solver is capped at {MAX_ORACLE_ATOMS} atoms, got {self.n_atoms}"
            )

    @property
    def n_atoms(self) -> int:
        return self.positions.shape[0]

    @classmethod
    def from_rates(cls, rates: DerivedRates, w: float, positions) -> "LiouvillianSpec":
        return cls(rates.gamma_c, rates.gamma_delta, w, np.asarray(positions, dtype=float))


@dataclass
class SpinDensityMatrix:
    rho: np.ndarray
    positions: np.ndarray


def _site_operator(op: np.ndarray, j: int, n: int) -> np.ndarray:
    """op acting on atom j, identity elsewhere."""
    out = np.array([[1.0 + 0.0j]])
    for m in range(n):
        out = np.kron(out, op if m == j else _ID2)
    return out


def _dissipator_super(c: np.ndarray) -> np.ndarray:
    """Row-major vectorization of L[c]rho = (2 c rho c+ - c+c rho - rho c+c)/2."""
    d = c.shape[0]
    eye = np.eye(d, dtype=complex)
    cdc = c.conj().T @ c
    return (
        np.kron(c, c.conj())
        - 0.5 * np.kron(cdc, eye)
        - 0.5 * np.kron(eye, cdc.T)
    )


def collective_lowering(positions: np.ndarray) -> np.ndarray:
    """J^- = sum_j sigma_j^- cos(k x_j) on the full Hilbert space."""
    n = positions.shape[0]
    dim = 2**n
    out = np.zeros((dim, dim), dtype=complex)
    for j in range(n):
        out += np.cos(positions[j]) * _site_operator(_SM, j, n)
    return out


def build_generator(spec: LiouvillianSpec) -> np.ndarray:
    """Dense Liouvillian acting on row-major vectorized density matrices."""
    n = spec.n_atoms
    dim = 2**n
    eye = np.eye(dim, dtype=complex)
    jm = collective_lowering(spec.positions)
    h_eff = -(spec.gamma_delta / 2.0) * (jm.conj().T @ jm)
    gen = -1j * (np.kron(h_eff, eye) - np.kron(eye, h_eff.T))
    gen += spec.gamma_c * _dissipator_super(jm)
    sp = _SM.conj().T
    for j in range(n):
        gen += spec.w * _dissipator_super(_site_operator(sp, j, n))
    return gen


def steady_state(generator: np.ndarray, spec: LiouvillianSpec) -> SpinDensityMatrix:
    """Trace-one null vector of the generator via the smallest singular vector."""
    dim2 = generator.shape[0]
    dim = int(round(np.sqrt(dim2)))
    _, svals, vh = np.linalg.svd(generator)
    tol = max(1e-10, svals[0] * 1e-12)
    multiplicity = int(np.sum(svals < tol))
    if multiplicity > 1:
        raise DegenerateSteadyStateError(multiplicity)
    rho = vh[-1].conj().reshape(dim, dim)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    residual = np.linalg.norm(generator @ rho.reshape(-1))
    if residual > 1e-10 * max(1.0, np.linalg.norm(generator)):
        raise RuntimeError(f"steady-state residual too large: {residual:g}")
    return SpinDensityMatrix(rho=rho, positions=spec.positions)


def moments_from_rho(rho: np.ndarray, n: int | None = None) -> SpinMoments:
    """Populations Tr(rho sigma_j^+ sigma_j^-) and coherences Tr(rho sigma_j^+ sigma_l^-)."""
    rho = np.asarray(rho, dtype=complex)
    if n is None:
        n = int(round(np.log2(rho.shape[0])))
    pop = np.zeros(n)
    coh = np.zeros((n, n), dtype=complex)
    sp = _SM.conj().T
    lowering = [_site_operator(_SM, j, n) for j in range(n)]
    raising = [_site_operator(sp, j, n) for j in range(n)]
    for j in range(n):
        pop[j] = np.trace(rho @ raising[j] @ lowering[j]).real
        for l in range(j + 1, n):
            coh[j, l] = np.trace(rho @ raising[j] @ lowering[l])
    return SpinMoments(pop, coh)


def rho_from_populations(pop: np.ndarray) -> np.ndarray:
    """Product state with given excited populations and no coherences."""
    rho = np.array([[1.0 + 0.0j]])
    for pe in np.asarray(pop, dtype=float):
        rho = np.kron(rho, np.diag([1.0 - pe, pe]).astype(complex))
    return rho


def evolve(
    generator: np.ndarray, rho0: np.ndarray, times: np.ndarray
) -> list[np.ndarray]:
    """Exact evolution exp(G t) rho0 on a uniform time grid."""
    times = np.asarray(times, dtype=float)
    if times.size < 2:
        return [rho0.copy()]
    dt = times[1] - times[0]
    if not np.allclose(np.diff(times), dt):
        raise ValueError("evolve requires a uniform time grid")
    dim = rho0.shape[0]
    propagator = expm(generator * dt)
    vec = rho0.reshape(-1).astype(complex)
    out = [rho0.copy()]
    for _ in range(times.size - 1):
        vec = propagator @ vec
        out.append(vec.reshape(dim, dim).copy())
    return out


def _integrate_cumulant(
    spec: LiouvillianSpec, m0: SpinMoments, times: np.ndarray
) -> list[SpinMoments]:
    """Cumulant moments on a time grid, integrated with a high-order solver."""
    n = spec.n_atoms
    rates = DerivedRates(
        gamma_c=spec.gamma_c, gamma_delta=spec.gamma_delta, eta=0.0, mass=1.0, g=0.0
    )

    def pack(m: SpinMoments) -> np.ndarray:
        return np.concatenate([m.pop.astype(complex), m.coh.reshape(-1)])

    def unpack(y: np.ndarray) -> SpinMoments:
        pop = y[:n].real.copy()
        coh = np.triu(y[n:].reshape(n, n), k=1)
        return SpinMoments(pop, coh)

    def rhs(_t, y):
        d = spin_rhs(unpack(y), spec.positions, rates, spec.w)
        return pack(d)

    sol = solve_ivp(
        rhs,
        (times[0], times[-1]),
        pack(m0),
        t_eval=times,
        method="DOP853",
        rtol=1e-10,
        atol=1e-12,
    )
    if not sol.success:
        raise RuntimeError(f"cumulant integration failed: {sol.message}")
    return [unpack(sol.y[:, i]) for i in range(sol.y.shape[1])]


@dataclass
class CumulantComparison:
    """Exact-vs-cumulant discrepancies for one parameter point.

    Max-over-time differences are normalized by the overall scale of the
    exact series (transients pass through zero); steady-state differences are
    per-moment relative with a 1e-12 floor.
    """

    times: np.ndarray
    exact_pop: np.ndarray  # (T, N)
    cumulant_pop: np.ndarray
    exact_coh: np.ndarray  # (T, N, N) upper triangle
    cumulant_coh: np.ndarray
    max_pop_rel: float
    max_coh_rel: float
    steady_pop_rel: float
    steady_coh_rel: float


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    """Max per-entry relative difference, floored at 1e-12."""
    denom = np.maximum(np.abs(a), 1e-12)
    return float(np.max(np.abs(a - b) / denom))


def _rel_scaled(a: np.ndarray, b: np.ndarray) -> float:
    """Max difference normalized by the overall scale of the exact series."""
    scale = max(float(np.max(np.abs(a))), 1e-12)
    return float(np.max(np.abs(a - b)) / scale)


def compare_cumulant(
    spec: LiouvillianSpec,
    t_final: float | None = None,
    n_times: int = 201,
    init_pop: np.ndarray | None = None,
) -> CumulantComparison:
    """Integrate the closure and the exact generator from matched initial states.

    Starts from a coherence-free product state (default population
    w/(w + Gamma_C cos^2)) and reports max-over-time and steady-state relative
    differences of populations and coherences.
    """
    n = spec.n_atoms
    c2 = np.cos(spec.positions) ** 2
    if init_pop is None:
        init_pop = spec.w / (spec.w + spec.gamma_c * c2)
    init_pop = np.asarray(init_pop, dtype=float)
    if t_final is None:
        slowest = min(spec.w, spec.gamma_c)
        t_final = 20.0 / slowest
    times = np.linspace(0.0, t_final, n_times)

    gen = build_generator(spec)
    rhos = evolve(gen, rho_from_populations(init_pop), times)
    exact = [moments_from_rho(r, n) for r in rhos]
    cumulant = _integrate_cumulant(
        spec, SpinMoments(init_pop, np.zeros((n, n), dtype=complex)), times
    )

    e_pop = np.array([m.pop for m in exact])
    c_pop = np.array([m.pop for m in cumulant])
    e_coh = np.array([m.coh for m in exact])
    c_coh = np.array([m.coh for m in cumulant])

    ss = steady_state(gen, spec)
    ss_m = moments_from_rho(ss.rho, n)
    steady_pop_rel = _rel(ss_m.pop, c_pop[-1])
    if n > 1:
        iu = np.triu_indices(n, k=1)
        steady_coh_rel = _rel(ss_m.coh[iu], c_coh[-1][iu])
        max_coh_rel = _rel_scaled(e_coh[:, iu[0], iu[1]], c_coh[:, iu[0], iu[1]])
    else:
        steady_coh_rel = 0.0
        max_coh_rel = 0.0

    return CumulantComparison(
        times=times,
        exact_pop=e_pop,
        cumulant_pop=c_pop,
        exact_coh=e_coh,
        cumulant_coh=c_coh,
        max_pop_rel=_rel_scaled(e_pop, c_pop),
        max_coh_rel=max_coh_rel,
        steady_pop_rel=steady_pop_rel,
        steady_coh_rel=steady_coh_rel,
    )
