"""Policy learning through surrogate convex losses.

Cost-sensitive classification problems (maximum score, expected utility,
welfare maximization with AIPW weights) are solved by minimizing a
smooth surrogate risk over a tensor-Legendre sieve, with cross-fitted
nuisances, score-bootstrap uniform bands for the surrogate policy and
bootstrap inference for the optimal value.
"""

from .bands import EvalGrid, PolicyBand, build_band, critical_value, uniform_sign_test
from .basis import BasisSpec, eval_basis
from .errors import (ConfigError, DataError, NumericalError, SurrogatePolicyError,
                     UsageError)
from .losses import SurrogateLoss, eval_loss, pointwise_surrogate_argmin
from .nuisance import fit_nuisance, make_folds
from .pipeline import FitSettings, PolicyFit, fit_policy
from .policy import SieveModel, aggregate, fit_crossfit, fit_fold, sandwich, sigma_hat
from .problems import (ObservationTable, WeightedSample, weights_aipw,
                       weights_max_score, weights_utility)
from .value import (BenchmarkPolicy, ValueReport, benchmark_test, value_ci,
                    value_estimate)

__all__ = [
    "BasisSpec", "BenchmarkPolicy", "ConfigError", "DataError", "EvalGrid",
    "FitSettings", "NumericalError", "ObservationTable", "PolicyBand", "PolicyFit",
    "SieveModel", "SurrogateLoss", "SurrogatePolicyError", "UsageError",
    "ValueReport", "WeightedSample", "aggregate", "benchmark_test", "build_band",
    "critical_value", "eval_basis", "eval_loss", "fit_crossfit", "fit_fold",
    "fit_nuisance", "fit_policy", "make_folds", "pointwise_surrogate_argmin",
    "sandwich", "sigma_hat", "uniform_sign_test", "value_ci", "value_estimate",
    "weights_aipw", "weights_max_score", "weights_utility",
]
