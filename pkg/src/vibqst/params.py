"""Physical inputs, unit conversion and derived model scalars.

All energies are wavenumbers (cm^-1) with hbar = 1, so an internal time is
measured in cm.  Public time axes are expressed in units of 1/Phi instead
(``t_phi = t_internal * Phi``).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple, Optional

PLANCK = 6.62607e-34  # J s
LIGHT_CM = 2.99792458e10  # cm / s
KB_CM = 0.6950348  # cm^-1 / K

#: Phonon cutoff quoted with the alpha-helix parameter set.
DEFAULT_OMEGA_C = 96.86


@dataclass(frozen=True)
class ModelParams:
    """Raw physical inputs.

    Parameters
    ----------
    omega0 : float
        Exciton site energy and QC Bohr frequency (cm^-1).
    W_force : float
        Lattice force constant (N/m).
    mass : float
        Site mass (kg).
    Phi : float
        Exciton hopping constant (cm^-1).
    chi : float
        Exciton-phonon coupling strength (pN).
    epsilon : float
        QC-channel coupling ratio, the end bonds carry ``epsilon * Phi``.
    L : int
        Lattice length parameter, ``L = N + 1`` with N channel sites.
    T : float
        Temperature (K).
    omega_c_override : float or None
        Phonon cutoff (cm^-1).  ``None`` derives it from ``W_force`` and
        ``mass``.
    """

    omega0: float = 1660.0
    W_force: float = 15.0
    mass: float = 1.8e-25
    Phi: float = 7.8
    chi: float = 10.0
    epsilon: float = 0.013
    L: int = 10
    T: float = 300.0
    omega_c_override: Optional[float] = DEFAULT_OMEGA_C

    def __post_init__(self):
        if int(self.L) != self.L:
            raise ValueError(f"L must be an integer, got {self.L!r}")
        object.__setattr__(self, "L", int(self.L))
        if self.L < 4 or self.L % 2:
            raise ValueError(f"L must be even and >= 4, got {self.L}")
        for name in ("Phi", "W_force", "mass"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        for name in ("T", "chi", "epsilon"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)!r}")
        if self.omega_c_override is not None and not self.omega_c_override > 0:
            raise ValueError("omega_c_override must be positive")

    @property
    def N(self) -> int:
        return self.L - 1

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DerivedParams:
    """Scalars derived from :class:`ModelParams` (energies in cm^-1)."""

    E_B: float
    Omega_c: float
    Omega: float
    eta: float
    Phi_S: float
    g: float
    g_prime: float
    Delta_N: int
    E_bar: float
    Delta_omega: float
    beta_Omega: float
    n_bar: float
    Delta_n_sq: float
    L_star: float
    params: ModelParams = field(repr=False, compare=False)

    @property
    def boltzmann_ratio(self) -> float:
        """``exp(-beta Omega)``, zero at T = 0."""
        return math.exp(-self.beta_Omega) if math.isfinite(self.beta_Omega) else 0.0


def binding_energy(chi_pn: float, w_force: float) -> float:
    """Small polaron binding energy chi^2 / W converted to cm^-1."""
    chi_si = chi_pn * 1e-12
    return chi_si**2 / w_force / (PLANCK * LIGHT_CM)


def cutoff_frequency(w_force: float, mass: float) -> float:
    """sqrt(4W/M) expressed as a wavenumber."""
    return math.sqrt(4.0 * w_force / mass) / (2.0 * math.pi * LIGHT_CM)


def bose_occupation(beta_omega: float) -> float:
    if beta_omega > 700.0:  # also covers T = 0; exp would overflow
        return 0.0
    return 1.0 / math.expm1(beta_omega)


def derive(params: ModelParams) -> DerivedParams:
    """Compute every derived scalar consumed by the engines."""
    p = params
    L = p.L
    E_B = binding_energy(p.chi, p.W_force)
    Omega_c = p.omega_c_override if p.omega_c_override is not None else cutoff_frequency(p.W_force, p.mass)
    Omega = Omega_c * math.sin(math.pi / (2 * L))
    eta = math.sqrt(E_B * Omega / L * (1.0 - (Omega / Omega_c) ** 2))
    Phi_S = p.epsilon * p.Phi
    g = Phi_S * math.sqrt(2.0 / L)
    # sin(N pi / 2) for odd N, exactly
    Delta_N = 1 if p.N % 4 == 1 else -1
    E_bar = 2.0 * p.Phi / math.sqrt(L)
    # |w0_{L/2} - w0_{L/2 +- 1}| = 2 Phi |cos(pi/2 +- pi/L)|
    Delta_omega = 2.0 * p.Phi * math.sin(math.pi / L)
    kT = KB_CM * p.T
    beta_Omega = Omega / kT if kT > 0 else math.inf
    n_bar = bose_occupation(beta_Omega)
    if E_B > 0 and kT > 0:
        L_star = 0.2 * Omega_c**2 / (E_B * kT)
    else:
        L_star = math.inf
    return DerivedParams(
        E_B=E_B,
        Omega_c=Omega_c,
        Omega=Omega,
        eta=eta,
        Phi_S=Phi_S,
        g=g,
        g_prime=g * Delta_N,
        Delta_N=Delta_N,
        E_bar=E_bar,
        Delta_omega=Delta_omega,
        beta_Omega=beta_Omega,
        n_bar=n_bar,
        Delta_n_sq=n_bar * (n_bar + 1.0),
        L_star=L_star,
        params=p,
    )


class Check(NamedTuple):
    name: str
    passed: bool
    value: float
    bound: float
    margin: float
    note: str = ""


#: Fraction of pi*sqrt(2/L) accepted as "small" QC coupling.
SMALL_EPSILON_FRACTION = 0.1


def validity_report(derived: DerivedParams, params: ModelParams) -> list[Check]:
    """Advisory regime checks.  Failures are warnings, never exceptions."""
    d, p = derived, params
    checks = []

    four_phi = 4.0 * p.Phi
    checks.append(
        Check("nonadiabatic", four_phi < d.Omega_c, four_phi, d.Omega_c, d.Omega_c - four_phi, "4 Phi < Omega_c")
    )

    eps_bound = SMALL_EPSILON_FRACTION * math.pi * math.sqrt(2.0 / p.L)
    checks.append(
        Check("small_epsilon", p.epsilon < eps_bound, p.epsilon, eps_bound, eps_bound - p.epsilon, "eps << pi sqrt(2/L)")
    )

    note = "unbounded" if math.isinf(d.L_star) else "L < L*"
    checks.append(Check("pt_size", p.L < d.L_star, float(p.L), d.L_star, d.L_star - p.L, note))

    weak = d.E_B < p.Phi
    checks.append(Check("weak_coupling", weak, d.E_B, p.Phi, p.Phi - d.E_B, "E_B << Phi"))
    return checks


def to_internal_time(t_phi, Phi: float):
    return t_phi / Phi


def to_phi_time(t_internal, Phi: float):
    return t_internal * Phi
