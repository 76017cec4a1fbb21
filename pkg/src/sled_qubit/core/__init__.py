"""Core physics: qubit algebra, bath model, noise synthesis, propagators, steady states."""

from sled_qubit.core.bath import BathSpec, rates
from sled_qubit.core.noise import NoiseGrid, synthesize
from sled_qubit.core.propagators import LindbladModel, SledModel, propagate_lme, propagate_sled_ensemble
from sled_qubit.core.qubit_algebra import DensityMatrix
from sled_qubit.core.steady_state import SteadyParams

__all__ = [
    "BathSpec",
    "rates",
    "NoiseGrid",
    "synthesize",
    "LindbladModel",
    "SledModel",
    "propagate_lme",
    "propagate_sled_ensemble",
    "DensityMatrix",
    "SteadyParams",
]
