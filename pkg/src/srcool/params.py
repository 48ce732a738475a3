"""Physical parameters, unit system, derived rates, and single-atom analytics.

Unit conventions used throughout the package: hbar = 1 and the cavity-mode
wavenumber k = 1.  Momentum is therefore measured in units of hbar*k, length
in units of 1/k, and the mass is fixed by the recoil frequency,
m = 1/(2*omega_r).  All rates and frequencies share one arbitrary frequency
unit; time is its inverse.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "PhysParams",
    "DerivedRates",
    "SingleAtomReference",
    "ParameterError",
    "ConfigurationError",
    "derive_rates",
    "single_atom_reference",
    "single_atom_rate_avg",
    "steady_population_avg",
    "validate_timescales",
]


class ParameterError(ValueError):
    """Unphysical or inconsistent physical parameters."""


class ConfigurationError(ValueError):
    """Run configuration outside the model's validity domain."""


@dataclass(frozen=True)
class PhysParams:
    """Inputs of a simulation: atom number, cavity, pump and recoil scales.

    Exactly one of ``gamma_c`` (cavity-mediated single-atom decay rate) and
    ``g`` (vacuum Rabi frequency) must be given; the other is derived.
    ``kprime_ratio`` is k'/k for the repump recoil and may be zero.
    ``u2bar`` is the second moment of the repump emission pattern.
    """

    n_atoms: int
    kappa: float
    delta: float
    w: float
    omega_r: float
    gamma_c: float | None = None
    g: float | None = None
    kprime_ratio: float = 0.0
    u2bar: float = 0.4

    def __post_init__(self):
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise ParameterError(f"n_atoms must be a positive integer, got {self.n_atoms}")
        for name in ("kappa", "delta", "w", "omega_r"):
            v = getattr(self, name)
            if not (v > 0.0) or not math.isfinite(v):
                raise ParameterError(f"{name} must be strictly positive, got {v}")
        if (self.gamma_c is None) == (self.g is None):
            raise ParameterError("exactly one of gamma_c and g must be given")
        coupling = self.gamma_c if self.gamma_c is not None else self.g
        if not (coupling > 0.0) or not math.isfinite(coupling):
            raise ParameterError(f"coupling (gamma_c or g) must be strictly positive, got {coupling}")
        if self.kprime_ratio < 0.0 or not math.isfinite(self.kprime_ratio):
            raise ParameterError(f"kprime_ratio must be >= 0, got {self.kprime_ratio}")
        if not (self.u2bar > 0.0):
            raise ParameterError(f"u2bar must be strictly positive, got {self.u2bar}")

    @property
    def mass(self) -> float:
        """Atomic mass in simulation units, m = 1/(2*omega_r)."""
        return 1.0 / (2.0 * self.omega_r)


@dataclass(frozen=True)
class DerivedRates:
    """Rates derived from :class:`PhysParams`.

    gamma_c    cavity-mediated decay rate of a single atom at an antinode
    gamma_delta dispersive counterpart (equals gamma_c at delta = kappa/2)
    eta        retardation (friction) parameter, 4*omega_r/kappa at delta = kappa/2
    mass       1/(2*omega_r)
    g          vacuum Rabi frequency consistent with gamma_c
    """

    gamma_c: float
    gamma_delta: float
    eta: float
    mass: float
    g: float


def derive_rates(params: PhysParams) -> DerivedRates:
    """Resolve the g <-> gamma_c pair and compute the eliminated-cavity rates."""
    kappa, delta = params.kappa, params.delta
    denom = kappa * kappa / 4.0 + delta * delta
    if params.gamma_c is not None:
        gamma_c = params.gamma_c
        g = math.sqrt(gamma_c * denom / (kappa / 4.0))
    else:
        g = params.g
        gamma_c = g * g * (kappa / 4.0) / denom
    gamma_delta = g * g * (delta / 2.0) / denom
    eta = 4.0 * params.omega_r * delta / denom
    return DerivedRates(
        gamma_c=gamma_c,
        gamma_delta=gamma_delta,
        eta=eta,
        mass=params.mass,
        g=g,
    )


@dataclass(frozen=True)
class SingleAtomReference:
    """Single-atom friction/diffusion/temperature at a frozen position.

    ``degenerate`` flags sin(kx) = 0, where friction and diffusion vanish and
    the temperature is reported from the position-independent analytic value.
    """

    alpha: float
    diffusion: float
    kT: float
    rate: float
    population: float
    degenerate: bool


def single_atom_reference(params: PhysParams, x: float) -> SingleAtomReference:
    """Friction alpha, diffusion D, temperature kT and cooling rate R_S for one atom.

    The internal state is taken in its local steady state,
    <sigma+ sigma-> = w/(w + Gamma_C cos^2(kx)).  kT = D/(2 m alpha) is
    position- and pump-independent and equals kappa/4 at delta = kappa/2.
    """
    r = derive_rates(params)
    s2 = math.sin(x) ** 2
    c2 = math.cos(x) ** 2
    pop = params.w / (params.w + r.gamma_c * c2)
    alpha = r.eta * r.gamma_c * s2 * pop
    diffusion = r.gamma_c * s2 * pop  # hbar^2 k^2 per unit time
    # D/(2 m alpha) = 1/(2 m eta); reduces to kappa/4 at delta = kappa/2
    kT = 1.0 / (2.0 * r.mass * r.eta)
    rate = r.eta * r.gamma_c * pop
    return SingleAtomReference(
        alpha=alpha,
        diffusion=diffusion,
        kT=kT,
        rate=rate,
        population=pop,
        degenerate=(s2 == 0.0),
    )


def steady_population_avg(w: float, gamma_c: float) -> float:
    """Single-atom steady population averaged over position.

    Mean over kx uniform of w/(w + Gamma_C cos^2(kx)), which integrates to
    sqrt(w/(w + Gamma_C)).
    """
    return math.sqrt(w / (w + gamma_c))


def single_atom_rate_avg(params: PhysParams) -> float:
    """Position-averaged single-atom cooling rate R_S = eta*Gamma_C*<sigma+ sigma->."""
    r = derive_rates(params)
    return r.eta * r.gamma_c * steady_population_avg(params.w, r.gamma_c)


def validate_timescales(params: PhysParams, motion_enabled: bool = True) -> list[str]:
    """Check the timescale separation required for adiabatic cavity elimination.

    Returns a list of human-readable warnings.  delta != kappa/2 is a hard
    error when motion is simulated (the motional equations assume the
    friction-maximizing detuning); for spin-only runs it only warns.
    """
    r = derive_rates(params)
    warnings: list[str] = []
    kappa = params.kappa
    if kappa < 10.0 * params.w:
        warnings.append(
            f"cavity linewidth kappa={kappa:g} is not large compared to repump w={params.w:g}"
        )
    if kappa < 10.0 * params.n_atoms * r.gamma_c:
        warnings.append(
            f"cavity linewidth kappa={kappa:g} is not large compared to "
            f"N*Gamma_C={params.n_atoms * r.gamma_c:g}"
        )
    if kappa < math.sqrt(params.n_atoms) * r.g:
        warnings.append(
            f"cavity linewidth kappa={kappa:g} is below the collective coupling "
            f"sqrt(N)*g={math.sqrt(params.n_atoms) * r.g:g}"
        )
    detuned = abs(params.delta - kappa / 2.0) > 1e-12 * kappa
    if detuned:
        msg = (
            f"delta={params.delta:g} differs from kappa/2={kappa / 2.0:g}; the motional "
            "equations are only valid at delta = kappa/2"
        )
        if motion_enabled:
            raise ConfigurationError(msg)
        warnings.append(msg)
    return warnings
