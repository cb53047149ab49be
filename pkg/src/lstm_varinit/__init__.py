"""Variance-preserving initialization for LSTM networks.

Submodules: ``core`` (RNG, linear algebra), ``cells`` (forward steps),
``variance`` (conditions and samplers), ``probe`` (Monte-Carlo checks),
``training`` (BPTT and momentum descent), ``data`` (loaders, synthetic series),
``bench`` (experiment grids) and ``cli``.
"""

from .cells import ACTIVATIONS, PEEPHOLE, TRADITIONAL, ActivationSpec, LstmWeights, unroll
from .core import Rng
from .data import SeriesBatch, load_panel, load_ucr, synth
from .errors import (
    ConditionViolationError,
    ConstantFeatureError,
    InvalidArgumentError,
    NumericOverflowError,
    ParseError,
    UnsupportedMissingValueError,
)
from .training import TrainConfig, TrainTrace, backward, evaluate_mse, gradcheck, train
from .variance import VarianceConfig, build_initializer, sample_weights, table1_config, validate

__all__ = [
    "ACTIVATIONS", "PEEPHOLE", "TRADITIONAL", "ActivationSpec", "LstmWeights", "unroll", "Rng",
    "SeriesBatch", "load_panel", "load_ucr", "synth", "ConditionViolationError",
    "ConstantFeatureError", "InvalidArgumentError", "NumericOverflowError", "ParseError",
    "UnsupportedMissingValueError", "TrainConfig", "TrainTrace", "backward", "evaluate_mse",
    "gradcheck", "train", "VarianceConfig", "build_initializer", "sample_weights",
    "table1_config", "validate",
]
__version__ = "0.1.0"
