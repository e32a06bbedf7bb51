"""Spiking harmonic resonate-and-fire state space models.

A fully spike-based second-order sequence model: pairs of resonator states
evolve under implicit (IM) or implicit-explicit (IMEX) discretizations,
evaluated in parallel by an associative scan over block-diagonal 2x2
matrices, with threshold nonlinearities trained through surrogate gradients.
Includes spectral verification of the discretizations, spike-driven energy
accounting, and scikit-learn style estimators.
"""

from .dynamics import (OscillatorParams, Scheme, build_recurrence,
                       eigenvalue_moment, eigenvalues_closed_form,
                       simulate_neuron)
from .energy import count_block_flops, estimate, measure_firing_rates, ratio_sweep
from .errors import (DataError, DimensionError, ParameterError,
                     PreconditionError, ShareSSMError, TrainingError)
from .estimators import ShareSSMClassifier, ShareSSMRegressor
from .network import HeterogeneitySpec, ModelConfig, ModelGraph, build_model
from .scan import Block2, BlockDiagRecurrence, ScanCounter, ScanElement, combine, scan
from .spiking import (SpikeTensor, SurrogateConfig, ThresholdParams, if_neuron,
                      spike_backward, spike_forward)
from .train import (AblationSpec, Adam, SplitData, TrainConfig, fit,
                    random_search, run_ablation)

__version__ = "0.1.0"

__all__ = [
    "AblationSpec", "Adam", "Block2", "BlockDiagRecurrence", "DataError",
    "DimensionError", "HeterogeneitySpec", "ModelConfig", "ModelGraph",
    "OscillatorParams", "ParameterError", "PreconditionError", "ScanCounter",
    "ScanElement", "Scheme", "ShareSSMClassifier", "ShareSSMError",
    "ShareSSMRegressor", "SpikeTensor", "SplitData", "SurrogateConfig",
    "ThresholdParams", "TrainConfig", "TrainingError", "build_model",
    "build_recurrence", "combine", "count_block_flops", "estimate",
    "eigenvalue_moment", "eigenvalues_closed_form", "fit", "if_neuron",
    "measure_firing_rates", "random_search", "ratio_sweep", "run_ablation",
    "scan", "simulate_neuron", "spike_backward", "spike_forward",
]
