"""Propagator engines behind a fit / predict interface.

``fit()`` solves the model for the configured parameters, ``predict(times)``
returns the complex propagator G_L0 on a grid of times in units of 1/Phi and
``propagate(times)`` returns the same data wrapped with its metadata.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_params, check_times
from .exact import PropagatorSeries, eigendecompose, exact_propagator
from .exciton import solve_exciton
from .fockspace import FockTruncation, build_full_h, choose_nmax, m_operator
from .params import derive, validity_report
from .pt import diagonal_propagator, max_generator_norm, pt_propagator, solve_pt
from .threepath import build_model, three_path_propagator


class _Propagator(BaseEstimator):
    engine = ""

    def _setup(self):
        self.params_ = check_params(self.params)
        self.derived_ = derive(self.params_)
        self.validity_ = validity_report(self.derived_, self.params_)

    def predict(self, times):
        return self.propagate(times).values

    def propagate(self, times) -> PropagatorSeries:  # pragma: no cover - abstract
        raise NotImplementedError


class ExactPropagator(_Propagator):
    """Full diagonalization in the truncated exciton-phonon space.

    Parameters
    ----------
    params : ModelParams, dict or None
    n_max : int or None
        Fixed phonon cutoff.  ``None`` picks the smallest cutoff whose
        thermal tail is below ``tail_tol``.
    tail_tol : float
    """

    engine = "exact"

    def __init__(self, params=None, n_max=None, tail_tol=1e-5):
        self.params = params
        self.n_max = n_max
        self.tail_tol = tail_tol

    def fit(self, X=None, y=None):
        self._setup()
        d = self.derived_
        self.exciton_ = solve_exciton(self.params_, d)
        self.coupling_ = m_operator(self.exciton_, d)
        if self.n_max is None:
            self.truncation_ = choose_nmax(d, tol=self.tail_tol)
        else:
            self.truncation_ = FockTruncation.fixed(int(self.n_max), d.beta_Omega)
        self.hamiltonian_ = build_full_h(self.exciton_, self.coupling_, d, self.truncation_)
        self.decomposition_ = eigendecompose(self.hamiltonian_)
        return self

    def propagate(self, times) -> PropagatorSeries:
        check_is_fitted(self, "decomposition_")
        return exact_propagator(self.decomposition_, self.truncation_, self.derived_, check_times(times))

    @property
    def spectrum_(self):
        check_is_fitted(self, "decomposition_")
        return self.decomposition_.energies


class PerturbativePropagator(_Propagator):
    """Second-order dressed-exciton propagator.

    ``mode="full"`` keeps the virtual-phonon dressing of |0> and |L>;
    ``mode="diagonal"`` keeps only the dressed-state sum.
    """

    def __init__(self, params=None, mode="full"):
        self.params = params
        self.mode = mode

    @property
    def engine(self):
        return "pt_full" if self.mode == "full" else "pt_diagonal"

    def fit(self, X=None, y=None):
        if self.mode not in ("full", "diagonal"):
            raise ValueError(f"mode must be 'full' or 'diagonal', got {self.mode!r}")
        self._setup()
        d = self.derived_
        self.exciton_ = solve_exciton(self.params_, d)
        self.coupling_ = m_operator(self.exciton_, d)
        self.result_ = solve_pt(self.exciton_, self.coupling_, d.Omega)
        self.generator_norm_ = max_generator_norm(self.result_.operators)
        return self

    def propagate(self, times) -> PropagatorSeries:
        check_is_fitted(self, "result_")
        times = check_times(times)
        r = self.result_
        if self.mode == "full":
            return pt_propagator(r.dressed, r.operators, self.derived_, times)
        return diagonal_propagator(r.dressed, self.derived_, times)


class ThreePathPropagator(_Propagator):
    """Closed-form three-path model.

    ``phase="linear"`` uses |F| with the mean thermal shift folded into the
    path frequencies; ``phase="exact"`` uses the complex decoherence factor.
    """

    engine = "threepath"

    def __init__(self, params=None, phase="linear", r_max=12):
        self.params = params
        self.phase = phase
        self.r_max = r_max

    def fit(self, X=None, y=None):
        self._setup()
        self.model_ = build_model(self.derived_, r_max=self.r_max)
        return self

    def propagate(self, times) -> PropagatorSeries:
        check_is_fitted(self, "model_")
        return three_path_propagator(self.model_, self.derived_, check_times(times), phase=self.phase)


def make_engine(engine: str, params=None, n_max=None) -> _Propagator:
    """Unfitted estimator for one of the engine names."""
    if engine == "exact":
        return ExactPropagator(params, n_max=n_max)
    if engine == "pt_full":
        return PerturbativePropagator(params, mode="full")
    if engine == "pt_diagonal":
        return PerturbativePropagator(params, mode="diagonal")
    if engine == "threepath":
        return ThreePathPropagator(params)
    raise ValueError(f"unknown engine {engine!r}")
