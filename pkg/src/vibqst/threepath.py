"""Closed-form three-path model of the transfer.

Only the triplet psi_+, psi_o, psi_- is kept.  The phonon dressing is
described by the series coefficients E_r, the +/- pair hybridizes through
the effective coupling v_{+-}, and the propagator is the sum of three path
amplitudes whose interference fixes the fidelity maximum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional

import numpy as np

from .exact import PropagatorSeries
from .params import KB_CM, DerivedParams

R_MAX = 12


class OutOfValidityError(ArithmeticError):
    pass


def taylor_coefficients(derived: DerivedParams, r_max: int = R_MAX) -> np.ndarray:
    """E_r = (eta^2/2) [E^r/(Omega+dw)^(r+1) + E^r/(Omega-dw)^(r+1)], r = 0..r_max."""
    d = derived
    lo = d.Omega - d.Delta_omega
    if abs(lo) < 1e-12:
        raise OutOfValidityError("phonon frequency resonant with the band-centre spacing")
    hi = d.Omega + d.Delta_omega
    r = np.arange(r_max + 1)
    return 0.5 * d.eta**2 * (d.E_bar**r / hi ** (r + 1) + d.E_bar**r / lo ** (r + 1))


def exciton_shifts(E_r: np.ndarray, epsilon: float) -> tuple[float, float]:
    """Series for (dw_+, dw_-).

    dw_+ = -sum E_r eps^r falls with eps; dw_- = -sum (-1)^r E_r eps^r rises.
    """
    powers = epsilon ** np.arange(len(E_r))
    signs = (-1.0) ** np.arange(len(E_r))
    return float(-np.sum(E_r * powers)), float(-np.sum(signs * E_r * powers))


@dataclass(frozen=True)
class ThreePathModel:
    epsilon: float
    E_r: np.ndarray
    dw_plus: float
    dw_minus: float
    v_pm: float
    delta: float
    Delta: float
    cos2theta: float
    theta: float
    w_hat_plus: float
    w_hat_minus: float
    dOmega_plus: float
    dOmega_minus: float
    n_bar: float
    Delta_n_sq: float
    W_plus: float
    W_minus: float
    Delta_N: int
    Phi: float

    @property
    def sin2theta(self) -> float:
        return math.sin(2.0 * self.theta)

    @property
    def W_s(self) -> float:
        return 0.5 * (self.W_minus - self.W_plus)

    @property
    def W_f(self) -> float:
        return 0.5 * (self.W_minus + self.W_plus)

    @property
    def alpha(self) -> float:
        return self.W_s / self.W_f

    # characteristic times in units of 1/Phi
    @property
    def T_f(self) -> float:
        return math.pi / self.W_f * self.Phi

    @property
    def T_s(self) -> float:
        return math.pi / self.W_s * self.Phi if self.W_s else math.inf

    @property
    def T_plus(self) -> float:
        return math.pi / self.W_plus * self.Phi

    @property
    def T_minus(self) -> float:
        return math.pi / self.W_minus * self.Phi


def hybridize(derived: DerivedParams, E_r: np.ndarray, epsilon: float):
    """Two-level mixing of psi_+ and psi_-.

    Returns ``(dw_plus, dw_minus, v_pm, Delta, cos2theta, theta, w_hat_plus,
    w_hat_minus)`` with energies relative to omega0.
    """
    dwp, dwm = exciton_shifts(E_r, epsilon)
    v = -(dwp + dwm) / 2.0
    split = 2.0 * derived.E_bar * epsilon + dwp - dwm
    Delta = split**2 + 4.0 * v**2
    root = math.sqrt(Delta)
    cos2 = split / root if root > 0 else 1.0
    theta = 0.5 * math.acos(max(-1.0, min(1.0, cos2)))
    mean = (dwp + dwm) / 2.0
    return dwp, dwm, v, Delta, cos2, theta, mean + root / 2.0, mean - root / 2.0


def phonon_shift_pm(E_r: np.ndarray, epsilon: float, cos2theta: float) -> tuple[float, float]:
    odd = E_r[1::2]
    powers = epsilon ** np.arange(1, len(E_r), 2)
    s = float(np.sum(odd * powers))
    return -2.0 * cos2theta * s, 2.0 * cos2theta * s


def build_model(derived: DerivedParams, epsilon: Optional[float] = None, r_max: int = R_MAX) -> ThreePathModel:
    d = derived
    eps = d.params.epsilon if epsilon is None else epsilon
    E_r = taylor_coefficients(d, r_max)
    dwp, dwm, v, Delta, cos2, theta, whp, whm = hybridize(d, E_r, eps)
    dOp, dOm = phonon_shift_pm(E_r, eps, cos2)
    Wp = whp + d.n_bar * dOp
    Wm = -(whm + d.n_bar * dOm)
    return ThreePathModel(
        epsilon=eps,
        E_r=E_r,
        dw_plus=dwp,
        dw_minus=dwm,
        v_pm=v,
        delta=2.0 * d.E_bar * eps,
        Delta=Delta,
        cos2theta=cos2,
        theta=theta,
        w_hat_plus=whp,
        w_hat_minus=whm,
        dOmega_plus=dOp,
        dOmega_minus=dOm,
        n_bar=d.n_bar,
        Delta_n_sq=d.Delta_n_sq,
        W_plus=Wp,
        W_minus=Wm,
        Delta_N=d.Delta_N,
        Phi=d.params.Phi,
    )


def series_converged(model: ThreePathModel, rel: float = 1e-14) -> bool:
    last = model.E_r[-1] * model.epsilon ** (len(model.E_r) - 1)
    return abs(last) < rel * model.E_r[0] if model.E_r[0] else True


def decoherence_modulus(n_bar: float, dOmega: float, t) -> np.ndarray:
    return 1.0 / np.sqrt(1.0 + 4.0 * n_bar * (n_bar + 1.0) * np.sin(dOmega * np.asarray(t, float) / 2.0) ** 2)


def three_path_propagator(model: ThreePathModel, derived: DerivedParams, times, phase: str = "linear") -> PropagatorSeries:
    """Sum of the three path amplitudes.

    ``phase="linear"`` keeps only |F_pm| and folds the mean thermal phase
    n_bar dOmega into W_pm.  ``phase="exact"`` uses the complex decoherence
    factor with the dressed energies instead.
    """
    times = np.asarray(times, dtype=float)
    t = times / model.Phi
    s2 = model.sin2theta
    if phase == "linear":
        Fp = decoherence_modulus(model.n_bar, model.dOmega_plus, t)
        Fm = decoherence_modulus(model.n_bar, model.dOmega_minus, t)
        plus = Fp * np.exp(-1j * model.W_plus * t)
        minus = Fm * np.exp(1j * model.W_minus * t)
    elif phase == "exact":
        q = derived.boltzmann_ratio
        Fp = (1.0 - q) / (1.0 - q * np.exp(-1j * model.dOmega_plus * t))
        Fm = (1.0 - q) / (1.0 - q * np.exp(-1j * model.dOmega_minus * t))
        plus = Fp * np.exp(-1j * model.w_hat_plus * t)
        minus = Fm * np.exp(-1j * model.w_hat_minus * t)
    else:
        raise ValueError(f"unknown phase treatment {phase!r}")
    values = -model.Delta_N * (0.5 - 0.25 * plus * (1.0 + s2) - 0.25 * minus * (1.0 - s2))
    return PropagatorSeries(times, values, "threepath", derived.params.as_dict())


class ModulusTerms(NamedTuple):
    direct: np.ndarray
    pair: np.ndarray
    interference: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.direct + self.pair + self.interference


def modulus_decomposition(model: ThreePathModel, times, F=None) -> ModulusTerms:
    """|G|^2 for sin 2theta = 0 and a common |F|.

    ``1/4 [1 + F^2 cos^2(W_f t) - 2 F cos(W_s t) cos(W_f t)]``: the direct
    path, the |tau_+ + tau_-|^2 pair term and their interference.
    """
    t = np.asarray(times, dtype=float) / model.Phi
    if F is None:
        F = decoherence_modulus(model.n_bar, model.dOmega_plus, t)
    cs, cf = np.cos(model.W_s * t), np.cos(model.W_f * t)
    return ModulusTerms(np.full_like(t, 0.25), 0.25 * F**2 * cf**2, -0.5 * F * cs * cf)


def interference_term(model: ThreePathModel, times) -> np.ndarray:
    """f(t) = F(t) cos(W_s t) cos(W_f t)."""
    t = np.asarray(times, dtype=float) / model.Phi
    F = decoherence_modulus(model.n_bar, model.dOmega_plus, t)
    return F * np.cos(model.W_s * t) * np.cos(model.W_f * t)


def optimal_coupling(E0: float, E1: float, E2: float, E_bar: float, n_bar: float) -> float:
    """sqrt(2) E0 / sqrt((E - E1)^2 - 4 n E1 (E - E1) - 2 E0 E2)."""
    radicand = (E_bar - E1) ** 2 - 4.0 * n_bar * E1 * (E_bar - E1) - 2.0 * E0 * E2
    if radicand <= 0:
        raise OutOfValidityError(f"negative radicand {radicand:.3e}; temperature too high")
    return math.sqrt(2.0) * E0 / math.sqrt(radicand)


def epsilon_star(derived: DerivedParams, r_max: int = R_MAX) -> float:
    """Coupling where T_+ = 3 T_- (alpha = 1/2)."""
    E = taylor_coefficients(derived, r_max)
    return optimal_coupling(E[0], E[1], E[2], derived.E_bar, derived.n_bar)


class OptimumEstimate(NamedTuple):
    epsilon: float
    G_M: float
    n0: float
    delta_n: float
    T0: float


def gm_star(derived: DerivedParams, eps_star: Optional[float] = None, r_max: int = R_MAX) -> OptimumEstimate:
    """Fidelity at the optimum and the T0 scale (kelvin) of 1 - (T/T0)^2."""
    eps = epsilon_star(derived, r_max) if eps_star is None else eps_star
    model = build_model(derived, eps, r_max)
    if model.dOmega_plus == 0:
        raise OutOfValidityError("vanishing phonon shift at the optimum")
    n0 = abs(model.w_hat_plus) / abs(model.dOmega_plus)
    dn = n0 - derived.n_bar
    if dn <= 0:
        raise OutOfValidityError(f"thermal occupation {derived.n_bar:.3g} exceeds n0 = {n0:.3g}")
    gm = 1.0 - (math.pi**2 / 4.0) * derived.Delta_n_sq / dn**2
    T0 = 2.0 * n0 * derived.Omega / math.pi / KB_CM
    return OptimumEstimate(eps, gm, n0, dn, T0)


class Resonance(NamedTuple):
    kind: str
    p: Optional[int]
    q: int
    value: float


def resonance_condition(alpha: float, window: float = 0.01, q_max: int = 5) -> Optional[Resonance]:
    """Match alpha against (2q-1)/(2q+1) (holes) and (q-p)/(q+p+1) (peaks)."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    candidates = []
    for q in range(1, q_max + 1):
        candidates.append(Resonance("destructive", None, q, (2 * q - 1) / (2 * q + 1)))
        for p in range(q):
            candidates.append(Resonance("constructive", p, q, (q - p) / (q + p + 1)))
    best = min(candidates, key=lambda c: (abs(c.value - alpha), c.q))
    if abs(best.value - alpha) <= window:
        return best
    return None


def resonance_label(res: Optional[Resonance]) -> str:
    if res is None:
        return ""
    frac = Fraction(res.value).limit_denominator(100)
    if res.kind == "destructive":
        return f"destructive q={res.q} ({frac})"
    return f"constructive p={res.p} q={res.q} ({frac})"
