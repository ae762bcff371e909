"""Exact eigensolution of the coupled Hamiltonian and the thermal propagator."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exciton import fix_signs
from .fockspace import CoupledHamiltonian, FockTruncation
from .params import DerivedParams

RESIDUAL_TOL = 1e-10
WEIGHT_CUTOFF = 1e-14
ENGINES = ("exact", "pt_full", "pt_diagonal", "threepath")


class ConvergenceError(RuntimeError):
    pass


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SpectralDecomposition:
    energies: np.ndarray
    vectors: np.ndarray
    max_residual: float
    orthogonality_error: float
    hamiltonian: CoupledHamiltonian = field(repr=False)


def eigendecompose(H: CoupledHamiltonian, check: bool = True) -> SpectralDecomposition:
    """Full symmetric eigendecomposition with deterministic column signs."""
    A = H.matrix
    if not np.array_equal(A, A.T):
        raise ValueError("coupled Hamiltonian is not symmetric")
    E, U = np.linalg.eigh(A)
    U = fix_signs(U)
    resid = orth = 0.0
    if check:
        scale = max(np.linalg.norm(A, 2), 1.0)
        resid = float(np.max(np.linalg.norm(A @ U - U * E, axis=0))) / scale
        orth = float(np.max(np.abs(U.T @ U - np.eye(len(E)))))
        if resid > RESIDUAL_TOL or orth > RESIDUAL_TOL:
            raise ConvergenceError(f"eigensolver residual {resid:.3e}, orthogonality {orth:.3e}")
    return SpectralDecomposition(E, U, resid, orth, H)


@dataclass
class PropagatorSeries:
    """G_L0 sampled on a time grid (``times`` in units of 1/Phi)."""

    times: np.ndarray
    values: np.ndarray
    engine: str
    params: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ValueError(f"unknown engine {self.engine!r}")

    @property
    def modulus(self) -> np.ndarray:
        return np.abs(self.values)


def oscillating_sum(freqs, weights, t) -> np.ndarray:
    """Evaluate ``sum_k weights[k] * exp(-1j * freqs[k] * t)`` on a time grid.

    Uniform grids are processed in blocks that reuse one table of phase
    increments, so the cost is a sequence of matrix-vector products.
    """
    t = np.asarray(t, dtype=float)
    freqs = np.asarray(freqs, dtype=float)
    weights = np.asarray(weights, dtype=complex)
    out = np.empty(t.shape, dtype=complex)
    if t.size == 0:
        return out
    if freqs.size == 0:
        out[:] = 0.0
        return out
    block = 256
    steps = np.diff(t)
    uniform = t.size > 2 and np.allclose(steps, steps[0], rtol=1e-12, atol=0.0)
    if uniform:
        dt = steps[0]
        table = np.exp(-1j * np.outer(np.arange(block) * dt, freqs))
        for start in range(0, t.size, block):
            m = min(block, t.size - start)
            out[start : start + m] = table[:m] @ (weights * np.exp(-1j * freqs * t[start]))
    else:
        for start in range(0, t.size, block):
            chunk = t[start : start + block]
            out[start : start + chunk.size] = np.exp(-1j * np.outer(chunk, freqs)) @ weights
    return out


def propagator_terms(dec: SpectralDecomposition, trunc: Optional[FockTruncation] = None):
    """Frequencies and weights of the exact thermal propagator.

    G(t) = sum_n p_n exp(i n Omega t) sum_i c_i^(n) exp(-i E_i t) is flattened
    to a list of (E_i - n Omega, p_n c_i^(n)) pairs; weights below 1e-14 are
    dropped.
    """
    H = dec.hamiltonian
    trunc = trunc or H.truncation
    exc = H.exciton
    nb = H.truncation.size
    U = dec.vectors.reshape(exc.dim, nb, -1)
    amp0 = np.einsum("m,mni->ni", exc.qc0, U)
    ampL = np.einsum("m,mni->ni", exc.qcL, U)
    c = ampL * amp0
    n = np.arange(nb)
    weights = trunc.weights[:nb, None] * c
    freqs = dec.energies[None, :] - H.Omega * n[:, None]
    keep = np.abs(weights) >= WEIGHT_CUTOFF
    return freqs[keep], weights[keep]


def exact_propagator(
    dec: SpectralDecomposition,
    trunc: FockTruncation,
    derived: DerivedParams,
    times,
    tail_tol: float = 1e-4,
) -> PropagatorSeries:
    """Thermally averaged G_L0(t); the global exp(-i omega0 t) is dropped."""
    times = np.asarray(times, dtype=float)
    if times.size and (times[0] < 0 or np.any(np.diff(times) < 0)):
        raise ValueError("times must be non-negative and ascending")
    freqs, weights = propagator_terms(dec, trunc)
    phi = derived.params.Phi
    values = oscillating_sum(freqs, weights, times / phi)
    notes = []
    if trunc.tail_mass > tail_tol:
        msg = f"thermal tail mass {trunc.tail_mass:.2e} beyond n_max={trunc.n_max}"
        notes.append(msg)
        warnings.warn(msg, TruncationWarning, stacklevel=2)
    snapshot = dict(derived.params.as_dict(), n_max=trunc.n_max)
    return PropagatorSeries(times, values, "exact", snapshot, notes)


def bare_propagator(exc, times, Phi: float) -> np.ndarray:
    """<L|exp(-i H_A t)|0> with energies relative to omega0."""
    w = exc.qcL * exc.qc0
    return oscillating_sum(exc.energies, w, np.asarray(times, float) / Phi)
