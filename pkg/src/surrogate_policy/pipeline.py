"""End-to-end estimation steps shared by the simulation drivers and the CLI.

:func:`fit_policy` runs weights -> cross-fitted sieve fit -> sandwich.
For the welfare problem the weights come from cross-fitted nuisances
(used for the fit and for value inference) and from a full-sample
nuisance fit (used for the sandwich matrices and the policy bands).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .basis import BasisSpec, RateConditionWarning, check_sieve_growth, eval_basis
from .errors import ConfigError
from .nuisance import FoldPartition, NuisanceFit, fit_nuisance, make_folds
from .policy import SieveModel, fit_crossfit, sandwich
from .problems import (PROBLEM_KINDS, ObservationTable, WeightedSample,
                       weights_aipw, weights_max_score, weights_utility)


@dataclass
class FitSettings:
    problem: str = "welfare"
    loss: str = "logistic"
    k: int = 2
    m: int = 2
    nuisance_k: int = 3
    cv_folds: int = 5
    grid_size: int = 50
    utility_b: float = 1.0
    utility_c: float = 0.5

    def __post_init__(self):
        if self.problem not in PROBLEM_KINDS:
            raise ConfigError(f"unknown problem {self.problem!r}")
        for name in ("k", "nuisance_k"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.m < 2:
            raise ConfigError("need at least two cross-fitting folds")
        if self.cv_folds < 2 or self.grid_size < 1:
            raise ConfigError("nuisance CV needs >= 2 folds and a nonempty grid")


@dataclass
class PolicyFit:
    """Everything produced by :func:`fit_policy`.

    ``cross`` holds cross-fitted weights (fit, value inference);
    ``full`` holds full-sample weights (sandwich, bands). Both carry the
    basis rows; ``cross`` also carries fold ids.
    """

    model: SieveModel
    cross: WeightedSample
    full: WeightedSample
    folds: FoldPartition
    nuisance_cross: Optional[NuisanceFit] = None
    nuisance_full: Optional[NuisanceFit] = None
    rate_warning: bool = False

    def g_rows(self) -> np.ndarray:
        """Aggregated policy evaluated at the sample rows."""
        return self.cross.basis @ self.model.beta_bar


def welfare_weights(table: ObservationTable, folds: FoldPartition,
                    settings: FitSettings, seed: int, full_sample: bool = True):
    nf_cross = fit_nuisance(table, folds, "crossfit", k=settings.nuisance_k,
                            cv_folds=settings.cv_folds, grid_size=settings.grid_size,
                            seed=seed)
    cross = weights_aipw(table, *nf_cross.predict_rows(table.x))
    if not full_sample:
        return cross, None, nf_cross, None
    nf_full = fit_nuisance(table, None, "fullsample", k=settings.nuisance_k,
                           cv_folds=settings.cv_folds, grid_size=settings.grid_size,
                           seed=seed)
    full = weights_aipw(table, *nf_full.predict_rows(table.x))
    return cross, full, nf_cross, nf_full


def fit_policy(table: ObservationTable, settings: FitSettings, seed: int = 0,
               full_sample: bool = True, with_sandwich: bool = True) -> PolicyFit:
    """Fit the cross-fitted sieve policy and (optionally) its sandwich.

    With ``full_sample=False`` the welfare problem skips the full-sample
    nuisance fit and ``full`` aliases ``cross``; use this only when no
    band is needed.
    """
    spec = BasisSpec(settings.k, table.d)
    # the growth rule is reported in the diagnostics rather than warned
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RateConditionWarning)
        rate_warning = not check_sieve_growth(spec, table.n)

    folds = make_folds(table.n, settings.m, seed)
    nf_cross = nf_full = None
    if settings.problem == "welfare":
        cross, full, nf_cross, nf_full = welfare_weights(table, folds, settings, seed,
                                                         full_sample)
    elif settings.problem == "max-score":
        cross = full = weights_max_score(table)
    else:
        cross = full = weights_utility(table, settings.utility_b, settings.utility_c)
    if full is None:
        full = cross
    P = eval_basis(spec, table.x)
    cross = cross.with_basis(P).with_fold(folds.assignment)
    full = full.with_basis(P)
    model = fit_crossfit(cross, spec, settings.loss)
    model.diagnostics["rate_condition_warning"] = rate_warning
    if with_sandwich:
        sandwich(model, full)
    return PolicyFit(model, cross, full, folds, nf_cross, nf_full, rate_warning)
