"""Quasi-degenerate second-order perturbation theory.

The generator S1 = Z a^dag - Z^T a removes the phonon-number changing
coupling to first order; A and B + B^T are the resulting corrections of the
exciton Hamiltonian and of the phonon frequency.  Matrices live in the
|psi_mu> basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exact import PropagatorSeries
from .exciton import ExcitonEigensystem, fix_signs
from .params import DerivedParams

MIN_DENOMINATOR = 1e-6
COUPLED = 1e-14


class ResonanceError(ArithmeticError):
    """A perturbative denominator vanishes for a coupled pair of states."""


class DressingLabelError(RuntimeError):
    pass


@dataclass(frozen=True)
class PTOperators:
    Z: np.ndarray
    A: np.ndarray
    B: np.ndarray
    E: np.ndarray


def _safe_ratio(num, den, labels, what):
    coupled = np.abs(num) > COUPLED
    bad = coupled & (np.abs(den) < MIN_DENOMINATOR)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise ResonanceError(f"{what}: vanishing denominator for pair ({labels[i]}, {labels[j]})")
    out = np.zeros_like(num)
    out[coupled] = num[coupled] / den[coupled]
    return out


def build_pt_operators(exc: ExcitonEigensystem, M: np.ndarray, Omega: float) -> PTOperators:
    w = exc.energies
    gap = w[:, None] - w[None, :]
    Z = _safe_ratio(M, gap + Omega, exc.labels, "Z")
    A = -(Z.T @ M + M @ Z) / 2.0
    A = 0.5 * (A + A.T)
    B = (Z @ M - M @ Z) / 2.0
    E = _safe_ratio(B, gap + 2.0 * Omega, exc.labels, "E")
    return PTOperators(Z, A, B, E)


def delta_matrices(exc: ExcitonEigensystem, M: np.ndarray, Omega: float):
    """delta H_A and delta Omega from their explicit second-order sums."""
    w = exc.energies
    n = len(w)
    dH = np.zeros((n, n))
    dO = np.zeros((n, n))

    def term(m1, m2, mu, sign):
        num = M[m2, mu] * M[mu, m1]
        if abs(num) <= COUPLED:
            return 0.0
        den = w[m1] - w[mu] + sign * Omega
        if abs(den) < MIN_DENOMINATOR:
            raise ResonanceError(f"vanishing denominator for ({exc.labels[m1]}, {exc.labels[mu]})")
        return num / den

    for m1 in range(n):
        for m2 in range(n):
            emit = absorb = 0.0
            for mu in range(n):
                emit += term(m1, m2, mu, -1) + term(m2, m1, mu, -1)
                absorb += term(m1, m2, mu, +1) + term(m2, m1, mu, +1)
            dH[m1, m2] = 0.5 * emit
            dO[m1, m2] = 0.5 * emit + 0.5 * absorb
    return dH, dO


@dataclass(frozen=True)
class DressedSystem:
    """Eigenstates chi_nu of H_A + delta H_A.

    ``vectors[:, nu]`` is chi_nu in the psi basis.  ``energies`` are relative
    to omega0.
    """

    energies: np.ndarray
    vectors: np.ndarray
    phonon_shifts: np.ndarray
    exciton_shifts: np.ndarray
    labels: tuple[str, ...]
    coupling_pm: float
    exciton: ExcitonEigensystem

    @property
    def qc0(self) -> np.ndarray:
        """<chi_nu|0>."""
        return self.vectors.T @ self.exciton.qc0

    @property
    def qcL(self) -> np.ndarray:
        return self.vectors.T @ self.exciton.qcL

    def index(self, label: str) -> int:
        return self.labels.index(label)


def dress(exc: ExcitonEigensystem, dH: np.ndarray, dOmega: np.ndarray) -> DressedSystem:
    w_hat, X = np.linalg.eigh(np.diag(exc.energies) + dH)
    n = len(w_hat)
    ip, im = exc.plus, exc.minus
    weight = X**2  # weight[mu, state]
    score = weight.copy()
    pair = weight[ip] + weight[im]
    score[ip] = score[im] = pair
    rows, cols = linear_sum_assignment(-score)
    assign = np.empty(n, dtype=int)
    assign[rows] = cols

    for mu in range(n):
        if mu in (ip, im):
            continue
        row = score[mu]
        best = row[assign[mu]]
        others = np.delete(row, assign[mu])
        if others.size and best - others.max() < 1e-6:
            raise DressingLabelError(f"dressed state for {exc.labels[mu]!r} is ambiguous")

    a, b = assign[ip], assign[im]
    if w_hat[a] < w_hat[b]:
        assign[ip], assign[im] = b, a

    energies = w_hat[assign]
    vectors = fix_signs(X[:, assign])
    shifts = np.einsum("mi,mn,ni->i", vectors, dOmega, vectors)
    return DressedSystem(
        energies=energies,
        vectors=vectors,
        phonon_shifts=shifts,
        exciton_shifts=np.diag(dH).copy(),
        labels=exc.labels,
        coupling_pm=float(dH[ip, im]),
        exciton=exc,
    )


def pt_spectrum(dr: DressedSystem, n_max: int, Omega: float):
    """E_{nu,n} = w_hat_nu + n (Omega + dOmega_nu), sorted.

    Returns ``(energies, nu, n)`` arrays.
    """
    n = np.arange(n_max + 1)
    E = dr.energies[:, None] + n[None, :] * (Omega + dr.phonon_shifts)[:, None]
    nu_idx = np.repeat(np.arange(len(dr.energies)), n_max + 1)
    n_idx = np.tile(n, len(dr.energies))
    flat = E.ravel()
    order = np.lexsort((n_idx, nu_idx, flat))
    return flat[order], nu_idx[order], n_idx[order]


def decoherence_factor(boltzmann: float, dOmega, t) -> np.ndarray:
    """Z_B^(nu)(t) / Z_B = (1 - q) / (1 - q exp(-i dOmega t)), q = exp(-beta Omega)."""
    phase = np.multiply.outer(np.asarray(t, float), np.asarray(dOmega, float))
    return (1.0 - boltzmann) / (1.0 - boltzmann * np.exp(-1j * phase))


def thermal_number(boltzmann: float, dOmega, t) -> np.ndarray:
    """n^(nu)(t) = 1 / (exp(beta Omega + i dOmega t) - 1)."""
    phase = np.multiply.outer(np.asarray(t, float), np.asarray(dOmega, float))
    z = boltzmann * np.exp(-1j * phase)
    den = 1.0 - z
    if np.any(np.abs(den) < 1e-12):
        raise ArithmeticError("thermal number denominator collapsed")
    return z / den


def _check_times(times):
    times = np.asarray(times, dtype=float)
    if times.size and (times[0] < 0 or np.any(np.diff(times) < 0)):
        raise ValueError("times must be non-negative and ascending")
    return times


def pt_propagator(dr: DressedSystem, ops: PTOperators, derived: DerivedParams, times) -> PropagatorSeries:
    """Second-order propagator including the U dressing of |0> and |L>."""
    times = _check_times(times)
    t = times / derived.params.Phi
    Z = ops.Z
    l_vec = dr.exciton.qcL
    z_vec = dr.exciton.qc0
    X = dr.vectors
    q = derived.boltzmann_ratio
    Omega = derived.Omega

    lx = X.T @ l_vec
    x0 = X.T @ z_vec
    L_Z = X.T @ (Z.T @ l_vec)  # <L|Z|chi>
    ZT_0 = X.T @ (Z.T @ z_vec)  # <chi|Z^T|0>
    L_ZT = X.T @ (Z @ l_vec)  # <L|Z^T|chi>
    Z_0 = X.T @ (Z @ z_vec)  # <chi|Z|0>
    L_ZZT = X.T @ (Z @ Z.T @ l_vec)
    L_ZTZ = X.T @ (Z.T @ Z @ l_vec)
    ZZT_0 = X.T @ (Z @ Z.T @ z_vec)
    ZTZ_0 = X.T @ (Z.T @ Z @ z_vec)

    dO = dr.phonon_shifts
    F = decoherence_factor(q, dO, t)
    nt = thermal_number(q, dO, t)
    spin = np.exp(1j * np.multiply.outer(t, Omega + dO))
    bracket = (
        lx * x0
        + L_Z * ZT_0 * nt * spin
        + L_ZT * Z_0 * (nt + 1.0) / spin
        - L_ZZT * x0 * nt / 2.0
        - L_ZTZ * x0 * (nt + 1.0) / 2.0
        - lx * ZZT_0 * nt / 2.0
        - lx * ZTZ_0 * (nt + 1.0) / 2.0
    )
    values = np.sum(F * np.exp(-1j * np.multiply.outer(t, dr.energies)) * bracket, axis=1)
    return PropagatorSeries(times, values, "pt_full", derived.params.as_dict())


def diagonal_propagator(dr: DressedSystem, derived: DerivedParams, times) -> PropagatorSeries:
    """Diagonal approximation: sum_nu F_nu(t) exp(-i w_hat_nu t) <L|chi_nu><chi_nu|0>."""
    times = _check_times(times)
    t = times / derived.params.Phi
    F = decoherence_factor(derived.boltzmann_ratio, dr.phonon_shifts, t)
    amp = dr.qcL * dr.qc0
    values = (F * np.exp(-1j * np.multiply.outer(t, dr.energies))) @ amp
    return PropagatorSeries(times, values, "pt_diagonal", derived.params.as_dict())


def decoherence_modulus_approx(n_bar: float, dOmega, t) -> np.ndarray:
    """|F| = 1 / sqrt(1 + 4 n(n+1) sin^2(dOmega t / 2))."""
    phase = np.multiply.outer(np.asarray(t, float), np.asarray(dOmega, float))
    return 1.0 / np.sqrt(1.0 + 4.0 * n_bar * (n_bar + 1.0) * np.sin(phase / 2.0) ** 2)


@dataclass(frozen=True)
class PTResult:
    operators: PTOperators
    dressed: DressedSystem
    delta_h: np.ndarray
    delta_omega: np.ndarray


def solve_pt(exc: ExcitonEigensystem, M: np.ndarray, Omega: float) -> PTResult:
    ops = build_pt_operators(exc, M, Omega)
    dO = ops.B + ops.B.T
    dr = dress(exc, ops.A, dO)
    return PTResult(ops, dr, ops.A, dO)


def max_generator_norm(ops: PTOperators) -> float:
    """Largest |Z| entry; perturbation theory needs it well below 1."""
    return float(np.max(np.abs(ops.Z))) if ops.Z.size else 0.0

