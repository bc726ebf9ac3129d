"""Optimised VMD + CNN-LSTM battery state-of-health estimation."""

from .emd import EMDParams, emd_decompose
from .entropy import EnvelopeEntropyConfig, envelope_entropy
from .optimize import GAConfig, PSOConfig, SearchSpace, ga_optimize, pso_optimize
from .vmd import IMFSet, VMDParams, reconstruction_error, vmd_decompose

__version__ = "0.1.0"

__all__ = [
    "EMDParams",
    "EnvelopeEntropyConfig",
    "GAConfig",
    "IMFSet",
    "PSOConfig",
    "SearchSpace",
    "VMDParams",
    "emd_decompose",
    "envelope_entropy",
    "ga_optimize",
    "pso_optimize",
    "reconstruction_error",
    "vmd_decompose",
]
