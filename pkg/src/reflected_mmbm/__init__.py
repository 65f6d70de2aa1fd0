"""Markov-modulated Brownian motion reflected in a strip ``[0, B]``.

Exact first-passage matrices, stationary and exponential-epoch laws,
transforms at inverse local times and long-run overflow rates, together
with a Monte Carlo simulator used to cross-check them.
"""
from .errors import DefectiveSpectrumError, ModelError, NumericalError
from .linalg import SpectralData, expm, quadratic_eigenpairs, stationary_of_generator
from .localtime import (
    LocalTimeTransform,
    OverflowRates,
    admissible_interval,
    brownian_busy_transform,
    brownian_exponent,
    brownian_overflow_process,
    brownian_williams_transform,
    busy_period_transform,
    localtime_transform,
    overflow_rates,
    overflow_rates_limit,
)
from .model import MmbmModel, PhaseClasses, asymptotic_drift, flip, random_model, restrict_rows, time_reverse, validate
from .passage import PassagePair, crossing_probability, passage_matrices, passage_pairs
from .reflection import (
    CrossingMatrices,
    ReflectedLaw,
    StripSpec,
    crossing_matrices,
    crossing_matrices_zero_drift,
    epoch_distribution,
    exp_epoch_law,
    stationary_law,
)

__version__ = "0.1.0"

__all__ = [
    "CrossingMatrices",
    "DefectiveSpectrumError",
    "LocalTimeTransform",
    "MmbmModel",
    "ModelError",
    "NumericalError",
    "OverflowRates",
    "PassagePair",
    "PhaseClasses",
    "ReflectedLaw",
    "SpectralData",
    "StripSpec",
    "admissible_interval",
    "asymptotic_drift",
    "brownian_busy_transform",
    "brownian_exponent",
    "brownian_overflow_process",
    "brownian_williams_transform",
    "busy_period_transform",
    "crossing_matrices",
    "crossing_matrices_zero_drift",
    "crossing_probability",
    "epoch_distribution",
    "exp_epoch_law",
    "expm",
    "flip",
    "localtime_transform",
    "overflow_rates",
    "overflow_rates_limit",
    "passage_matrices",
    "passage_pairs",
    "quadratic_eigenpairs",
    "random_model",
    "restrict_rows",
    "stationary_law",
    "stationary_of_generator",
    "time_reverse",
    "validate",
]
