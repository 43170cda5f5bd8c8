"""Cross-fitted nuisance estimation for the welfare problem.

The outcome regressions ``mu(1, x)``, ``mu(0, x)`` are fit by the Lasso
within each treatment arm and the propensity score ``pi(x)`` by
l1-penalized logistic regression, all on a tensor-Legendre expansion of
the covariates. Penalties are chosen by K-fold cross-validation over a
log-spaced grid running down from the smallest penalty that zeroes every
slope.

Both solvers work on column-standardized features (mean 0, mean square
1), leave the intercept unpenalized and return coefficients on the
original feature scale as ``[intercept, slope_1, ..., slope_p]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numba import njit
from scipy.special import expit

from .basis import BasisSpec, eval_basis
from .errors import (ConfigError, DegenerateLabelsError, DomainError,
                     InsufficientArmError, NonConvergenceError)
from .problems import PI_FLOOR, ObservationTable

COEF_TOL = 1e-8
MAX_SWEEPS = 100_000
MAX_OUTER = 500


# -- folds ------------------------------------------------------------------

@dataclass
class FoldPartition:
    """Assignment of rows to ``m`` balanced folds."""

    m: int
    assignment: np.ndarray
    seed: int

    @property
    def n(self) -> int:
        return len(self.assignment)

    def indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def complement(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.m)


def make_folds(n: int, m: int, seed: int) -> FoldPartition:
    """Randomly split ``range(n)`` into ``m`` folds whose sizes differ by at most one."""
    if m < 2:
        raise ConfigError(f"need at least 2 folds, got {m}")
    if m > n:
        raise ConfigError(f"cannot split {n} rows into {m} folds")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xF01D]))
    assignment = np.empty(n, dtype=int)
    assignment[rng.permutation(n)] = np.arange(n) % m
    return FoldPartition(m=m, assignment=assignment, seed=int(seed))


# -- shared numerics --------------------------------------------------------

def _check_finite(*arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise DomainError("non-finite values in regression input")


def _standardize(features):
    features = np.asarray(features, dtype=float)
    if features.ndim == 1:
        features = features[:, None]
    center = features.mean(axis=0)
    scale = features.std(axis=0)
    scale = np.where(scale > 1e-12 * (1.0 + np.abs(center)), scale, np.inf)
    return (features - center) / scale, center, scale


def _unstandardize(intercept, slopes, center, scale):
    slopes = slopes / scale
    return np.concatenate([[intercept - center @ slopes], slopes])


@njit(cache=True)
def _cd_kernel(gram, lin, pen, beta, tol, max_sweeps):
    p = beta.shape[0]
    gb = gram @ beta
    for _ in range(max_sweeps):
        biggest = 0.0
        for j in range(p):
            gjj = gram[j, j]
            if gjj <= 0.0:
                continue
            old = beta[j]
            z = lin[j] - gb[j] + gjj * old
            if z > pen[j]:
                new = (z - pen[j]) / gjj
            elif z < -pen[j]:
                new = (z + pen[j]) / gjj
            else:
                new = 0.0
            delta = new - old
            if delta != 0.0:
                beta[j] = new
                for k in range(p):
                    gb[k] += gram[j, k] * delta
                if abs(delta) > biggest:
                    biggest = abs(delta)
        if biggest <= tol:
            return True
    return False


def _cd_quadratic(gram, lin, pen, beta, tol, max_sweeps=MAX_SWEEPS):
    """Coordinate descent for ``1/2 b'Gb - c'b + sum_j pen_j |b_j|``.

    Cyclic updates until the largest coefficient change in a sweep is at
    most ``tol``. Returns the solution as a new array.
    """
    beta = np.array(beta, dtype=float)
    ok = _cd_kernel(np.ascontiguousarray(gram, dtype=float),
                    np.asarray(lin, dtype=float), np.asarray(pen, dtype=float),
                    beta, float(tol), int(max_sweeps))
    if not ok:
        raise NonConvergenceError("coordinate descent did not converge")
    return beta


# -- lasso ------------------------------------------------------------------

def lasso_lambda_max(features, targets) -> float:
    """Smallest penalty at which every standardized slope is zero."""
    z, _, _ = _standardize(features)
    y = np.asarray(targets, dtype=float)
    return float(np.max(np.abs(z.T @ (y - y.mean()))) / len(y))


def _lasso_path_std(z, y, grid, tol):
    n = len(y)
    ybar = y.mean()
    gram = (z.T @ z) / n
    lin = (z.T @ (y - ybar)) / n
    beta = np.zeros(z.shape[1])
    out = []
    for lam in grid:
        beta = _cd_quadratic(gram, lin, np.full(len(beta), lam), beta, tol)
        out.append(beta)
    return ybar, out


def lasso_path(features, targets, grid, tol: float = COEF_TOL) -> list[np.ndarray]:
    """Lasso solutions along a (descending) penalty grid with warm starts."""
    features = np.asarray(features, dtype=float)
    targets = np.asarray(targets, dtype=float)
    _check_finite(features, targets)
    if len(targets) < 2:
        raise DomainError("lasso needs at least two observations")
    z, center, scale = _standardize(features)
    ybar, path = _lasso_path_std(z, targets, list(grid), tol)
    return [_unstandardize(ybar, b, center, scale) for b in path]


def fit_lasso(features, targets, lam: float, tol: float = COEF_TOL) -> np.ndarray:
    """Minimize ``(1/2n)||y - b0 - Z b||^2 + lam ||b||_1`` on standardized ``Z``.

    Returns ``[intercept, slopes...]`` on the original feature scale.
    """
    if lam < 0:
        raise DomainError("penalty must be nonnegative")
    return lasso_path(features, targets, [float(lam)], tol)[0]


def lasso_kkt_violation(features, targets, coef, lam) -> float:
    """Largest violation of the Lasso subgradient conditions.

    Evaluated on the standardized problem the solver works with.
    """
    z, center, scale = _standardize(features)
    y = np.asarray(targets, dtype=float)
    beta = np.asarray(coef, dtype=float)[1:] * np.where(np.isfinite(scale), scale, 0.0)
    resid = (y - y.mean()) - z @ beta
    corr = z.T @ resid / len(y)
    active = beta != 0
    viol = np.where(active, np.abs(corr - lam * np.sign(beta)),
                    np.maximum(np.abs(corr) - lam, 0.0))
    return float(viol.max()) if viol.size else 0.0


# -- l1 logistic ------------------------------------------------------------

def _logistic_objective(theta, xd, y, lam):
    eta = xd @ theta
    nll = np.mean(np.logaddexp(0.0, eta) - y * eta)
    return float(nll + lam * np.sum(np.abs(theta[1:])))


def _logistic_solve(xd, y, lam, theta, tol):
    """Proximal Newton with backtracking for the l1 logistic objective.

    ``xd`` carries a leading column of ones for the unpenalized intercept.
    """
    n, p1 = xd.shape
    pen = np.full(p1, lam)
    pen[0] = 0.0
    obj = _logistic_objective(theta, xd, y, lam)
    for _ in range(MAX_OUTER):
        eta = xd @ theta
        prob = expit(eta)
        w = np.maximum(prob * (1.0 - prob), 1e-10)
        gram = (xd.T * w) @ xd / n
        # linear term of the local quadratic model around theta
        lin = xd.T @ (w * eta + (y - prob)) / n
        target = _cd_quadratic(gram, lin, pen, theta, tol * 1e-2)
        step = target - theta
        if np.max(np.abs(step)) <= tol:
            return target
        t = 1.0
        for _ in range(60):
            cand = theta + t * step
            new_obj = _logistic_objective(cand, xd, y, lam)
            if new_obj <= obj:
                break
            t *= 0.5
        else:
            return theta
        if np.max(np.abs(cand - theta)) <= tol:
            return cand
        theta, obj = cand, new_obj
    raise NonConvergenceError("l1 logistic regression did not converge")


def logistic_lambda_max(features, labels) -> float:
    """Smallest penalty at which every standardized slope is zero."""
    z, _, _ = _standardize(features)
    y = np.asarray(labels, dtype=float)
    return float(np.max(np.abs(z.T @ (y - y.mean()))) / len(y))


def logistic_l1_path(features, labels, grid, tol: float = COEF_TOL) -> list[np.ndarray]:
    """l1-penalized logistic regression along a descending penalty grid."""
    features = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    _check_finite(features, y)
    if not np.all((y == 0) | (y == 1)):
        raise DomainError("labels must be 0/1")
    ybar = y.mean()
    if ybar in (0.0, 1.0):
        raise DegenerateLabelsError("labels contain a single class")
    z, center, scale = _standardize(features)
    z = np.where(np.isfinite(z), z, 0.0)
    xd = np.column_stack([np.ones(len(y)), z])
    theta = np.zeros(xd.shape[1])
    theta[0] = np.log(ybar / (1.0 - ybar))
    out = []
    for lam in grid:
        theta = _logistic_solve(xd, y, float(lam), theta, tol)
        out.append(_unstandardize(theta[0], theta[1:], center, scale))
    return out


def fit_logistic_l1(features, labels, lam: float, tol: float = COEF_TOL) -> np.ndarray:
    """Minimize mean negative log-likelihood ``+ lam ||slopes||_1``.

    Returns ``[intercept, slopes...]`` on the original feature scale.
    """
    if lam < 0:
        raise DomainError("penalty must be nonnegative")
    return logistic_l1_path(features, labels, [float(lam)], tol)[0]


def logistic_objective(features, labels, coef, lam) -> float:
    """Penalized objective on the standardized scale, for diagnostics."""
    z, center, scale = _standardize(features)
    z = np.where(np.isfinite(z), z, 0.0)
    coef = np.asarray(coef, dtype=float)
    slopes = coef[1:] * np.where(np.isfinite(scale), scale, 0.0)
    theta = np.concatenate([[coef[0] + center @ coef[1:]], slopes])
    xd = np.column_stack([np.ones(len(labels)), z])
    return _logistic_objective(theta, xd, np.asarray(labels, dtype=float), lam)


# -- cross-validation -------------------------------------------------------

def _predict_linear(coef, features):
    features = np.asarray(features, dtype=float)
    if features.ndim == 1:
        features = features[:, None]
    return coef[0] + features @ coef[1:]


def _squared_error(coef, features, targets):
    return float(np.mean((targets - _predict_linear(coef, features)) ** 2))


def _log_loss(coef, features, labels):
    eta = _predict_linear(coef, features)
    return float(np.mean(np.logaddexp(0.0, eta) - labels * eta))


@dataclass(frozen=True)
class PenalizedFitter:
    """A penalized estimator: path solver, penalty ceiling, held-out loss."""

    name: str
    path: Callable
    lambda_max: Callable
    heldout_loss: Callable


LASSO = PenalizedFitter("lasso", lasso_path, lasso_lambda_max, _squared_error)
LOGISTIC_L1 = PenalizedFitter("logistic_l1", logistic_l1_path,
                              logistic_lambda_max, _log_loss)


def penalty_grid(lam_max: float, size: int = 50, ratio: float = 1e-3) -> np.ndarray:
    """Descending log-spaced grid from ``lam_max`` to ``lam_max * ratio``."""
    if size < 1:
        raise ConfigError("grid size must be positive")
    if lam_max <= 0:
        return np.zeros(1)
    return np.geomspace(lam_max, lam_max * ratio, size)


def cross_validate(fitter: PenalizedFitter, features, targets, grid,
                   folds: int = 5, seed=0) -> float:
    """Pick the grid penalty with the smallest mean held-out loss.

    Ties go to the larger penalty. ``seed`` may be an int or a
    :class:`numpy.random.SeedSequence`.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ConfigError("penalty grid is empty")
    if grid.size == 1:
        return float(grid[0])
    if np.any(np.diff(grid) > 0):
        raise ConfigError("penalty grid must be descending")
    features = np.asarray(features, dtype=float)
    targets = np.asarray(targets, dtype=float)
    n = len(targets)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    rng = np.random.default_rng(ss)
    assign = np.empty(n, dtype=int)
    assign[rng.permutation(n)] = np.arange(n) % folds
    losses = np.zeros(grid.size)
    for f in range(folds):
        train = assign != f
        test = ~train
        path = fitter.path(features[train], targets[train], grid)
        losses += [fitter.heldout_loss(c, features[test], targets[test]) for c in path]
    losses /= folds
    best = losses.min()
    # first index on a descending grid is the largest penalty
    return float(grid[np.flatnonzero(losses <= best)[0]])


def fit_cv(fitter: PenalizedFitter, features, targets, cv_folds: int = 5,
           grid_size: int = 50, seed=0) -> tuple[np.ndarray, float]:
    """Cross-validate the penalty, then refit on all rows."""
    grid = penalty_grid(fitter.lambda_max(features, targets), grid_size)
    lam = cross_validate(fitter, features, targets, grid, cv_folds, seed)
    # refit along the grid down to lam so the warm starts match the CV paths
    path = fitter.path(features, targets, grid[grid >= lam])
    return path[-1], lam


# -- nuisance models --------------------------------------------------------

@dataclass
class NuisanceModel:
    """One fitted triple ``(mu1, mu0, pi)`` on expanded features."""

    coef_mu1: np.ndarray
    coef_mu0: np.ndarray
    coef_pi: np.ndarray
    lam_mu1: float
    lam_mu0: float
    lam_pi: float

    def predict_features(self, features):
        mu1 = _predict_linear(self.coef_mu1, features)
        mu0 = _predict_linear(self.coef_mu0, features)
        pi = np.clip(expit(_predict_linear(self.coef_pi, features)),
                     PI_FLOOR, 1.0 - PI_FLOOR)
        return mu1, mu0, pi

    def to_dict(self) -> dict:
        return {"coef_mu1": self.coef_mu1.tolist(), "coef_mu0": self.coef_mu0.tolist(),
                "coef_pi": self.coef_pi.tolist(), "lam_mu1": self.lam_mu1,
                "lam_mu0": self.lam_mu0, "lam_pi": self.lam_pi}


@dataclass
class NuisanceFit:
    """Nuisance models, one per fold (crossfit) or a single full-sample fit.

    ``train_fold`` holds each training row's fold id so that row ``i`` is
    always predicted by a model that never saw it.
    """

    mode: str
    spec: BasisSpec
    models: list
    train_fold: Optional[np.ndarray] = None
    feature_set: str = "tensor-legendre"
    meta: dict = field(default_factory=dict)

    def features(self, x) -> np.ndarray:
        return expand_features(self.spec, x)

    def predict(self, x, fold: int = 0):
        """Predictions of the model for ``fold`` at new points ``x``."""
        model = self.models[0 if self.mode == "fullsample" else fold]
        return model.predict_features(self.features(x))

    def predict_rows(self, x):
        """Cross-fitting-safe predictions for the training rows."""
        feats = self.features(x)
        if self.mode == "fullsample":
            return self.models[0].predict_features(feats)
        out = [np.empty(len(feats)) for _ in range(3)]
        for fold, model in enumerate(self.models):
            rows = self.train_fold == fold
            for arr, pred in zip(out, model.predict_features(feats[rows])):
                arr[rows] = pred
        return tuple(out)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "basis": self.spec.to_dict(),
                "feature_set": self.feature_set,
                "models": [m.to_dict() for m in self.models]}


def expand_features(spec: BasisSpec, x) -> np.ndarray:
    """Tensor-Legendre features without the constant column."""
    return eval_basis(spec, np.asarray(x, dtype=float).reshape(-1, spec.d))[:, 1:]


def _fit_triple(feats, y, a, cv_folds, grid_size, seed, tag):
    treated = a == 1
    control = ~treated
    need = max(2, cv_folds)
    if treated.sum() < need or control.sum() < need:
        raise InsufficientArmError(
            f"training rows have {int(treated.sum())} treated and "
            f"{int(control.sum())} control observations; need {need} of each")

    def stream(j):
        return np.random.SeedSequence([int(seed), tag, j])

    mu1, lam1 = fit_cv(LASSO, feats[treated], y[treated], cv_folds, grid_size, stream(1))
    mu0, lam0 = fit_cv(LASSO, feats[control], y[control], cv_folds, grid_size, stream(0))
    pi, lamp = fit_cv(LOGISTIC_L1, feats, a, cv_folds, grid_size, stream(2))
    return NuisanceModel(mu1, mu0, pi, lam1, lam0, lamp)


def fit_nuisance(table: ObservationTable, folds: Optional[FoldPartition],
                 mode: str = "crossfit", k: int = 3, cv_folds: int = 5,
                 grid_size: int = 50, seed: int = 0) -> NuisanceFit:
    """Estimate ``(mu(1, .), mu(0, .), pi(.))``.

    In ``crossfit`` mode the model for fold ``l`` is trained on the rows
    outside fold ``l``; in ``fullsample`` mode one model uses every row.
    """
    if table.a is None:
        raise DomainError("nuisance estimation requires a treatment column")
    if mode not in ("crossfit", "fullsample"):
        raise ConfigError(f"unknown nuisance mode {mode!r}")
    spec = BasisSpec(k, table.d)
    feats = expand_features(spec, table.x)
    if mode == "fullsample":
        model = _fit_triple(feats, table.y, table.a, cv_folds, grid_size, seed, 1_000_000)
        return NuisanceFit(mode, spec, [model])
    if folds is None:
        raise ConfigError("crossfit mode needs a fold partition")
    models = []
    for fold in range(folds.m):
        comp = folds.complement(fold)
        models.append(_fit_triple(feats[comp], table.y[comp], table.a[comp],
                                  cv_folds, grid_size, seed, fold))
    return NuisanceFit(mode, spec, models, train_fold=folds.assignment.copy())
