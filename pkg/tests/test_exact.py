import math
from types import SimpleNamespace

import numpy as np
import pytest
from scipy.linalg import expm

from vibqst.estimators import ExactPropagator
from vibqst.exact import (
    ConvergenceError,
    PropagatorSeries,
    TruncationWarning,
    bare_propagator,
    eigendecompose,
    oscillating_sum,
    propagator_terms,
)
from vibqst.exciton import solve_exciton
from vibqst.fockspace import FockTruncation, build_full_h, m_operator
from vibqst.params import ModelParams, derive


def jacobi_eigenvalues(A, sweeps=50):
    """Cyclic Jacobi rotations, an oracle independent of LAPACK."""
    A = np.array(A, dtype=float)
    n = len(A)
    for _ in range(sweeps):
        off = np.sqrt(np.sum(A**2) - np.sum(np.diag(A) ** 2))
        if off < 1e-13:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) < 1e-15 * (abs(A[p, p]) + abs(A[q, q]) + 1.0):
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * A[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q], J[q, p] = s, -s
                A = J.T @ A @ J
    return np.sort(np.diag(A))


@pytest.fixture(scope="module")
def small():
    p = ModelParams(L=4, epsilon=0.05, chi=15.0, T=150.0)
    d = derive(p)
    exc = solve_exciton(p, d)
    M = m_operator(exc, d)
    tr = FockTruncation.fixed(3, d.beta_Omega)
    H = build_full_h(exc, M, d, tr)
    return p, d, exc, tr, H


def test_small_instance_eigenvalues(small):
    *_, H = small
    dec = eigendecompose(H)
    assert np.allclose(dec.energies, jacobi_eigenvalues(H.matrix), atol=1e-10)
    assert dec.max_residual < 1e-12 and dec.orthogonality_error < 1e-12


def test_small_instance_propagator_against_expm(small):
    p, d, exc, tr, H = small
    dec = eigendecompose(H)
    times = np.linspace(0.0, 300.0, 7)
    with pytest.warns(TruncationWarning):
        series = ExactPropagator(p, n_max=3).fit().propagate(times)
    nb = tr.size
    ref = []
    for tp in times:
        t = tp / p.Phi
        U = expm(-1j * H.matrix * t)
        total = 0.0
        for n in range(nb):
            ket0 = np.kron(exc.qc0, np.eye(nb)[n])
            ketL = np.kron(exc.qcL, np.eye(nb)[n])
            total += tr.weights[n] * np.exp(1j * n * d.Omega * t) * (ketL @ U @ ket0)
        ref.append(total)
    assert np.allclose(series.values, ref, atol=1e-10)
    assert dec.energies.shape == (H.dim,)


def test_two_level_decomposition():
    H = SimpleNamespace(matrix=np.array([[2.0, 0.5], [0.5, 2.0]]))
    dec = eigendecompose(H)
    assert np.allclose(dec.energies, [1.5, 2.5])


def test_nonsymmetric_rejected():
    with pytest.raises(ValueError):
        eigendecompose(SimpleNamespace(matrix=np.array([[1.0, 2.0], [0.0, 1.0]])))


def test_convergence_error_on_nan():
    with pytest.raises((ConvergenceError, np.linalg.LinAlgError, ValueError)):
        eigendecompose(SimpleNamespace(matrix=np.array([[np.nan, 0.0], [0.0, 1.0]])))


@pytest.mark.parametrize("uniform", [True, False])
def test_oscillating_sum(rng, uniform):
    f = rng.normal(size=300)
    w = rng.normal(size=300) + 1j * rng.normal(size=300)
    t = np.linspace(0, 40, 700) if uniform else np.sort(rng.uniform(0, 40, 700))
    naive = np.exp(-1j * np.outer(t, f)) @ w
    assert np.allclose(oscillating_sum(f, w, t), naive, atol=1e-9)


def test_oscillating_sum_edge_cases():
    assert oscillating_sum([], [], [0.0, 1.0]).tolist() == [0, 0]
    assert oscillating_sum([1.0], [1.0], []).size == 0


def test_zero_coupling_equals_bare(params):
    p = params.with_(chi=0.0)
    d = derive(p)
    times = np.linspace(0, 1000, 501)
    with pytest.warns(TruncationWarning):
        g = ExactPropagator(p, n_max=4).fit().propagate(times)
    bare = bare_propagator(solve_exciton(p, d), times, p.Phi)
    assert np.allclose(g.values, bare, atol=1e-12)


def test_zero_coupling_three_level_law(params):
    p = params.with_(chi=0.0)
    d = derive(p)
    times = np.linspace(0, 800, 1601)
    bare = bare_propagator(solve_exciton(p, d), times, p.Phi)
    t = times / p.Phi
    law = d.Delta_N / 2 * (np.cos(math.sqrt(2) * d.g * t) - 1)
    assert np.max(np.abs(np.abs(bare) - np.abs(law))) < 5 * p.epsilon
    i = int(np.argmax(np.abs(law)))
    assert times[i] == pytest.approx(382, abs=1)
    assert np.abs(bare).max() > 0.97


def test_unitarity_and_weights(params):
    est = ExactPropagator(params.with_(T=100.0)).fit()
    freqs, weights = propagator_terms(est.decomposition_)
    assert abs(np.sum(weights)) <= 1 + 1e-12  # G(0) = <L|0> = 0 up to tail
    g = est.propagate(np.linspace(0, 1000, 2001))
    assert np.all(g.modulus <= 1 + 1e-9)
    assert abs(g.values[0]) < 1e-10


def test_series_validation():
    with pytest.raises(ValueError):
        PropagatorSeries(np.zeros(2), np.zeros(2), "nonsense")
