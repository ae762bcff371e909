"""Phonon-free exciton Hamiltonian on the one-exciton space.

Site basis order is ``[|0>, |1>, ..., |N>, |L>]``: the two QC states sit at
index 0 and N+1.  Eigenstates are stored in mu order, which runs
from the top of the band (mu = 0, k = 1) to the bottom (mu = L, k = N) with
the hybridized triplet ``+, o, -`` at mu = L/2-1, L/2, L/2+1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .params import DerivedParams, ModelParams

#: Eigenvalues closer than this (cm^-1) are treated as one degenerate cluster.
DEGENERACY_TOL = 1e-9
#: Two overlaps closer than this make a label assignment ambiguous.
AMBIGUITY_TOL = 1e-6


class LabelingError(RuntimeError):
    """Numeric eigenvectors cannot be matched uniquely to reference states."""


def stationary_waves(N: int, omega0: float, Phi: float):
    """Standing waves of the open N-site chain.

    Returns
    -------
    K : ndarray, shape (N,)
        Wave vectors ``k pi / L`` for k = 1..N.
    energies : ndarray, shape (N,)
        ``omega0 + 2 Phi cos K``.
    coeffs : ndarray, shape (N, N)
        ``coeffs[k-1, x-1] = sqrt(2/L) sin(K_k x)``.
    """
    if N < 3 or N % 2 == 0:
        raise ValueError(f"N must be odd and >= 3, got {N}")
    L = N + 1
    k = np.arange(1, N + 1)
    K = k * np.pi / L
    energies = omega0 + 2.0 * Phi * np.cos(K)
    coeffs = np.sqrt(2.0 / L) * np.sin(np.outer(K, k))
    return K, energies, coeffs


def build_h_a(params: ModelParams, derived: DerivedParams) -> np.ndarray:
    """Tridiagonal H_A = H_cc + H_qc + W in the site basis (absolute energies)."""
    N = params.N
    dim = N + 2
    off = np.full(dim - 1, params.Phi)
    off[0] = off[-1] = derived.Phi_S
    H = np.diag(np.full(dim, params.omega0))
    H += np.diag(off, 1) + np.diag(off, -1)
    return H


class Triplet(NamedTuple):
    """Analytic hybrids of |0>, |phi_{L/2}>, |L> (site basis, energies relative to omega0)."""

    psi_plus: np.ndarray
    psi_minus: np.ndarray
    psi_o: np.ndarray
    w_plus: float
    w_minus: float
    w_o: float


def _site_vector(N: int, coeff0=0.0, chain=None, coeffL=0.0) -> np.ndarray:
    v = np.zeros(N + 2)
    v[0] = coeff0
    if chain is not None:
        v[1 : N + 1] = chain
    v[N + 1] = coeffL
    return v


def analytic_triplet(params: ModelParams, derived: DerivedParams) -> Triplet:
    N, L = params.N, params.L
    dN = derived.Delta_N
    _, _, coeffs = stationary_waves(N, 0.0, params.Phi)
    center = coeffs[L // 2 - 1]
    s = 1.0 / np.sqrt(2.0)
    plus = _site_vector(N, 0.5, s * center, 0.5 * dN)
    minus = _site_vector(N, 0.5, -s * center, 0.5 * dN)
    o = _site_vector(N, s, None, -s * dN)
    split = 2.0 * params.epsilon * params.Phi / np.sqrt(L)
    return Triplet(plus, minus, o, split, -split, 0.0)


def mu_labels(L: int) -> tuple[str, ...]:
    labels = []
    for mu in range(L + 1):
        if mu <= L // 2 - 2:
            labels.append(f"k{mu + 1}")
        elif mu == L // 2 - 1:
            labels.append("+")
        elif mu == L // 2:
            labels.append("o")
        elif mu == L // 2 + 1:
            labels.append("-")
        else:
            labels.append(f"k{mu - 1}")
    return tuple(labels)


def reference_states(params: ModelParams, derived: DerivedParams) -> np.ndarray:
    """Analytic reference vectors as columns, in mu order."""
    N, L = params.N, params.L
    _, _, coeffs = stationary_waves(N, 0.0, params.Phi)
    tri = analytic_triplet(params, derived)
    cols = []
    for label in mu_labels(L):
        if label == "+":
            cols.append(tri.psi_plus)
        elif label == "o":
            cols.append(tri.psi_o)
        elif label == "-":
            cols.append(tri.psi_minus)
        else:
            cols.append(_site_vector(N, chain=coeffs[int(label[1:]) - 1]))
    return np.column_stack(cols)


def fix_signs(vectors: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Flip columns so that the first component above ``tol`` is positive."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        idx = np.flatnonzero(np.abs(col) > tol)
        if idx.size and col[idx[0]] < 0:
            out[:, j] = -col
    return out


@dataclass(frozen=True)
class ExcitonEigensystem:
    """Eigenpairs of H_A.

    ``energies`` are relative to ``omega0``; ``vectors[:, mu]`` is the site
    representation of |psi_mu>.
    """

    energies: np.ndarray
    vectors: np.ndarray
    labels: tuple[str, ...]
    omega0: float
    provenance: str = "numeric"

    @property
    def L(self) -> int:
        return len(self.labels) - 1

    @property
    def N(self) -> int:
        return self.L - 1

    @property
    def dim(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    @property
    def plus(self) -> int:
        return self.L // 2 - 1

    @property
    def o(self) -> int:
        return self.L // 2

    @property
    def minus(self) -> int:
        return self.L // 2 + 1

    @property
    def qc0(self) -> np.ndarray:
        """Components <psi_mu|0>."""
        return self.vectors[0]

    @property
    def qcL(self) -> np.ndarray:
        """Components <psi_mu|L>."""
        return self.vectors[-1]

    def residuals(self, H: np.ndarray) -> np.ndarray:
        absolute = self.energies + self.omega0
        return np.linalg.norm(H @ self.vectors - self.vectors * absolute, axis=0)


def _resolve_degenerate(energies, vectors, refs):
    """Rotate each degenerate cluster onto the references it spans."""
    vectors = vectors.copy()
    start = 0
    n = len(energies)
    while start < n:
        stop = start + 1
        while stop < n and energies[stop] - energies[stop - 1] < DEGENERACY_TOL:
            stop += 1
        m = stop - start
        if m > 1:
            block = vectors[:, start:stop]
            proj = block.T @ refs  # (m, n_refs)
            weight = np.sum(proj**2, axis=0)
            pick = np.sort(np.argsort(-weight, kind="stable")[:m])
            coords = proj[:, pick]
            # Loewdin orthonormalization keeps the rotated set closest to the references.
            u, _, vt = np.linalg.svd(coords, full_matrices=False)
            vectors[:, start:stop] = block @ (u @ vt)
        start = stop
    return vectors


def diagonalize_h_a(H: np.ndarray, params: ModelParams, derived: DerivedParams) -> ExcitonEigensystem:
    """Numerically exact eigensystem of H_A with mu labels."""
    if not np.allclose(H, H.T, atol=0.0):
        raise ValueError("H_A must be symmetric")
    omega0 = params.omega0
    w, v = np.linalg.eigh(H - omega0 * np.eye(len(H)))
    refs = reference_states(params, derived)
    v = _resolve_degenerate(w, v, refs)

    overlap = np.abs(refs.T @ v)  # (ref mu, numeric state)
    n = len(w)
    assigned = np.full(n, -1)
    for mu in range(n):
        row = overlap[mu]
        order = np.argsort(-row, kind="stable")
        best, second = order[0], order[1]
        if row[best] - row[second] < AMBIGUITY_TOL:
            raise LabelingError(
                f"state {mu_labels(params.L)[mu]!r} overlaps numeric states {best} and {second} equally"
            )
        assigned[mu] = best
    if len(set(assigned.tolist())) != n:
        raise LabelingError("two reference states map onto the same numeric eigenvector")

    energies = w[assigned]
    vectors = fix_signs(v[:, assigned])
    return ExcitonEigensystem(energies, vectors, mu_labels(params.L), omega0, "numeric")


def analytic_eigensystem(params: ModelParams, derived: DerivedParams) -> ExcitonEigensystem:
    """Eigensystem assembled from the triplet formulas and bare standing waves."""
    refs = fix_signs(reference_states(params, derived))
    tri = analytic_triplet(params, derived)
    _, wk, _ = stationary_waves(params.N, 0.0, params.Phi)
    energies = []
    for label in mu_labels(params.L):
        if label == "+":
            energies.append(tri.w_plus)
        elif label == "o":
            energies.append(tri.w_o)
        elif label == "-":
            energies.append(tri.w_minus)
        else:
            energies.append(wk[int(label[1:]) - 1])
    return ExcitonEigensystem(np.array(energies), refs, mu_labels(params.L), params.omega0, "analytic")


def solve_exciton(params: ModelParams, derived: DerivedParams) -> ExcitonEigensystem:
    return diagonalize_h_a(build_h_a(params, derived), params, derived)
