"""Exciton-mediated quantum state transfer along a vibrating lattice.

Four engines compute the thermally averaged transfer amplitude G_L0(t)
between two end groups: exact diagonalization in a truncated phonon space,
second-order perturbation theory (full or diagonal) and a closed-form
three-path model.
"""

from .estimators import ExactPropagator, PerturbativePropagator, ThreePathPropagator, make_engine
from .exact import PropagatorSeries
from .harness import find_max, spectrum_compare, sweep_epsilon, sweep_temperature, validate
from .params import DerivedParams, ModelParams, derive

__all__ = [
    "DerivedParams",
    "ExactPropagator",
    "ModelParams",
    "PerturbativePropagator",
    "PropagatorSeries",
    "ThreePathPropagator",
    "derive",
    "find_max",
    "make_engine",
    "spectrum_compare",
    "sweep_epsilon",
    "sweep_temperature",
    "validate",
]
