"""Exciton-phonon coupling and the truncated single-mode Fock space."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .exciton import ExcitonEigensystem, stationary_waves
from .params import DerivedParams

DEFAULT_TAIL_TOL = 1e-5
HARD_CAP = 512
MIN_NMAX = 10
PROBE_STEP = 10
PROBE_TOL = 1e-4


class TruncationError(RuntimeError):
    pass


def m_operator(exc: ExcitonEigensystem, derived: DerivedParams) -> np.ndarray:
    """Coupling operator M in the |psi_mu> basis.

    M couples neighbouring standing waves with strength eta and leaves the
    QC states untouched.
    """
    if exc.provenance != "numeric":
        raise ValueError("m_operator expects a numeric exciton eigensystem")
    N = exc.N
    _, _, S = stationary_waves(N, 0.0, 1.0)
    m_k = derived.eta * (np.eye(N, k=1) + np.eye(N, k=-1))
    m_site = np.zeros((N + 2, N + 2))
    m_site[1 : N + 1, 1 : N + 1] = S.T @ m_k @ S
    M = exc.vectors.T @ m_site @ exc.vectors
    return 0.5 * (M + M.T)


def thermal_weights(beta_omega: float, n_max: int) -> np.ndarray:
    """Bose weights p_n for n = 0..n_max, renormalized on the truncated space."""
    n = np.arange(n_max + 1)
    if math.isinf(beta_omega):
        w = np.zeros(n_max + 1)
        w[0] = 1.0
        return w
    w = np.exp(-beta_omega * n)
    return w / w.sum()


def tail_mass(beta_omega: float, n_max: int) -> float:
    """Thermal probability of n > n_max."""
    if math.isinf(beta_omega):
        return 0.0
    return math.exp(-beta_omega * (n_max + 1))


@dataclass(frozen=True)
class FockTruncation:
    n_max: int
    beta_omega: float
    weights: np.ndarray
    tail_mass: float

    @classmethod
    def fixed(cls, n_max: int, beta_omega: float) -> "FockTruncation":
        if n_max < 0:
            raise ValueError("n_max must be non-negative")
        return cls(n_max, beta_omega, thermal_weights(beta_omega, n_max), tail_mass(beta_omega, n_max))

    @property
    def size(self) -> int:
        return self.n_max + 1


def choose_nmax(
    derived: DerivedParams,
    tol: float = DEFAULT_TAIL_TOL,
    probe: Optional[Callable[[int], float]] = None,
    cap: int = HARD_CAP,
    safety: float = 2.0,
) -> FockTruncation:
    """Smallest truncation whose thermal tail is below ``tol``.

    ``probe(n_max)`` may return a scalar observable (|G| at a fixed time);
    n_max then grows in steps of 10 until the observable moves by less than
    1e-4.
    """
    if not 0 < tol < 1e-2:
        raise ValueError("tol must lie in (0, 1e-2)")
    bo = derived.beta_Omega
    if math.isinf(bo):
        n_max = max(MIN_NMAX, math.ceil(6.0 * derived.eta**2 / derived.Omega**2 * safety))
    else:
        # tail = exp(-bo (n_max + 1)) < tol
        n_max = max(MIN_NMAX, math.floor(math.log(1.0 / tol) / bo))
        while tail_mass(bo, n_max) >= tol:
            n_max += 1
    if n_max > cap:
        raise TruncationError(f"required n_max={n_max} exceeds cap {cap}")

    if probe is not None:
        value = probe(n_max)
        while True:
            nxt = n_max + PROBE_STEP
            if nxt > cap:
                raise TruncationError(f"probe did not converge below cap {cap}")
            new = probe(nxt)
            if abs(new - value) < PROBE_TOL:
                break
            n_max, value = nxt, new
    return FockTruncation.fixed(n_max, bo)


def annihilation(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1)


@dataclass(frozen=True)
class CoupledHamiltonian:
    """Dense H = H_A + Omega a^dag a + M (a^dag + a).

    Basis index ``mu * (n_max + 1) + n``.  Exciton energies are relative to
    omega0.
    """

    matrix: np.ndarray
    h_a: np.ndarray
    h_b: np.ndarray
    v: np.ndarray
    exciton: ExcitonEigensystem
    truncation: FockTruncation
    Omega: float

    @property
    def n_max(self) -> int:
        return self.truncation.n_max

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def h0(self) -> np.ndarray:
        return self.h_a + self.h_b


def build_full_h(
    exc: ExcitonEigensystem, M: np.ndarray, derived: DerivedParams, trunc: FockTruncation
) -> CoupledHamiltonian:
    nb = trunc.size
    eye_b = np.eye(nb)
    h_a = np.kron(np.diag(exc.energies), eye_b)
    h_b = derived.Omega * np.kron(np.eye(exc.dim), np.diag(np.arange(nb, dtype=float)))
    a = annihilation(trunc.n_max)
    v = np.kron(M, a + a.T)
    return CoupledHamiltonian(h_a + h_b + v, h_a, h_b, v, exc, trunc, derived.Omega)
