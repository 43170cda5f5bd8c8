"""Cross-fitted sieve estimation of the surrogate policy function.

For each fold the coefficient vector minimizes the convex sample risk

    mean_i [ psi_plus_i * phi(-p_i'b) + psi_minus_i * phi(p_i'b) ]

by damped Newton iterations started at ``b = 0``. The fold estimates are
averaged, and the sandwich matrices ``Q`` (curvature) and ``Sigma``
(score variance) are computed at the averaged fit with full-sample
weights.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .basis import BasisSpec, eval_basis
from .errors import (IllConditionedFitError, NonConvergenceError,
                     SingularDesignError)
from .losses import SurrogateLoss, as_loss
from .problems import WeightedSample

RIDGE = 1e-10
MAX_NEWTON = 200
MAX_HALVINGS = 30
EIG_FLOOR = 1e-8


def surrogate_risk(b, basis, psi_plus, psi_minus, loss) -> float:
    """Sample surrogate risk at coefficient vector ``b``."""
    g = basis @ b
    return float(np.mean(psi_plus * loss.value(-g) + psi_minus * loss.value(g)))


def surrogate_gradient(b, basis, psi_plus, psi_minus, loss) -> np.ndarray:
    g = basis @ b
    score = -psi_plus * loss.d1(-g) + psi_minus * loss.d1(g)
    return basis.T @ score / len(g)


def surrogate_hessian(b, basis, psi_plus, psi_minus, loss) -> np.ndarray:
    g = basis @ b
    curv = psi_plus * loss.d2(-g) + psi_minus * loss.d2(g)
    return (basis.T * curv) @ basis / len(g)


@dataclass
class FoldFit:
    beta: np.ndarray
    iterations: int
    grad_norm: float
    objective_trace: list


def fit_fold(sample: WeightedSample, loss, basis: Optional[np.ndarray] = None,
             tol: float = 1e-8) -> FoldFit:
    """Newton minimization of the surrogate risk on one fold.

    ``basis`` defaults to ``sample.basis``. Converged when the gradient
    norm is at most ``tol * (1 + ||b||)``.
    """
    loss = as_loss(loss)
    P = sample.basis if basis is None else np.asarray(basis, dtype=float)
    if P is None or len(P) == 0:
        raise IllConditionedFitError("fold has no observations")
    wp, wm = sample.psi_plus, sample.psi_minus
    K = P.shape[1]
    b = np.zeros(K)
    obj = surrogate_risk(b, P, wp, wm, loss)
    trace = [obj]
    for it in range(MAX_NEWTON + 1):
        grad = surrogate_gradient(b, P, wp, wm, loss)
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol * (1.0 + np.linalg.norm(b)):
            return FoldFit(b, it, gnorm, trace)
        if it == MAX_NEWTON:
            break
        hess = surrogate_hessian(b, P, wp, wm, loss) + RIDGE * np.eye(K)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError as exc:
            raise IllConditionedFitError(f"singular Newton system: {exc}") from exc
        if not np.all(np.isfinite(step)):
            raise IllConditionedFitError("non-finite Newton step")
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            cand = b - t * step
            new_obj = surrogate_risk(cand, P, wp, wm, loss)
            if new_obj <= obj:
                break
            t *= 0.5
        else:
            # no decrease possible at working precision
            if gnorm <= 1e-6 * (1.0 + np.linalg.norm(b)):
                return FoldFit(b, it, gnorm, trace)
            raise NonConvergenceError("line search failed to decrease the risk")
        b, obj = cand, new_obj
        trace.append(obj)
    raise NonConvergenceError(f"Newton did not converge in {MAX_NEWTON} iterations")


@dataclass
class SieveModel:
    """Aggregated cross-fitted sieve fit.

    ``Q`` and ``Sigma`` are filled in by :func:`sandwich`.
    """

    spec: BasisSpec
    beta_per_fold: list
    beta_bar: np.ndarray
    loss: SurrogateLoss
    Q: Optional[np.ndarray] = None
    Sigma: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)

    def g(self, x) -> np.ndarray:
        """Evaluate the aggregated policy at points ``x``."""
        return eval_basis(self.spec, x) @ self.beta_bar

    def to_dict(self) -> dict:
        def mat(m):
            return None if m is None else np.asarray(m).tolist()
        return {
            "spec": self.spec.to_dict(),
            "beta_per_fold": [np.asarray(b).tolist() for b in self.beta_per_fold],
            "beta_bar": self.beta_bar.tolist(),
            "Q": mat(self.Q),
            "Sigma": mat(self.Sigma),
            "loss": self.loss.kind,
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "SieveModel":
        def arr(v):
            return None if v is None else np.asarray(v, dtype=float)
        return cls(spec=BasisSpec(**data["spec"]),
                   beta_per_fold=[np.asarray(b, dtype=float) for b in data["beta_per_fold"]],
                   beta_bar=np.asarray(data["beta_bar"], dtype=float),
                   loss=SurrogateLoss(data["loss"]),
                   Q=arr(data.get("Q")), Sigma=arr(data.get("Sigma")),
                   diagnostics=dict(data.get("diagnostics", {})))

    @classmethod
    def from_json(cls, text: str) -> "SieveModel":
        return cls.from_dict(json.loads(text))


def aggregate(fits, spec: BasisSpec, loss) -> SieveModel:
    """Average fold coefficients; ``g_hat`` is linear in them."""
    betas = [np.asarray(f.beta if isinstance(f, FoldFit) else f, dtype=float) for f in fits]
    diag = {}
    if fits and isinstance(fits[0], FoldFit):
        diag = {"newton_iterations": [f.iterations for f in fits],
                "grad_norm": [f.grad_norm for f in fits]}
    return SieveModel(spec=spec, beta_per_fold=betas,
                      beta_bar=np.mean(betas, axis=0), loss=as_loss(loss),
                      diagnostics=diag)


def fit_crossfit(sample: WeightedSample, spec: BasisSpec, loss) -> SieveModel:
    """Fit each fold on its own rows and aggregate.

    ``sample`` must carry ``fold`` ids and ``basis`` rows; its weights
    should come from nuisances fitted outside each row's fold.
    """
    folds = np.unique(sample.fold)
    fits = [fit_fold(sample.subset(sample.fold == f), loss) for f in folds]
    return aggregate(fits, spec, loss)


def sandwich(model: SieveModel, sample: WeightedSample,
             basis: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
    """Curvature matrix ``Q`` and score-variance matrix ``Sigma``.

    Both are sample means over all rows of ``sample`` (full-sample
    weights), evaluated at the aggregated policy. The results are also
    stored on ``model``.
    """
    P = sample.basis if basis is None else np.asarray(basis, dtype=float)
    loss = model.loss
    g = P @ model.beta_bar
    wp, wm = sample.psi_plus, sample.psi_minus
    n = len(g)
    curv = wp * loss.d2(-g) + wm * loss.d2(g)
    score = -wp * loss.d1(-g) + wm * loss.d1(g)
    Q = (P.T * curv) @ P / n
    Sigma = (P.T * score ** 2) @ P / n
    Q = 0.5 * (Q + Q.T)
    Sigma = 0.5 * (Sigma + Sigma.T)
    lam_min = float(np.linalg.eigvalsh(Q)[0]) if Q.size else 0.0
    if not lam_min > EIG_FLOOR:
        raise SingularDesignError(
            f"smallest eigenvalue of Q is {lam_min:.3g}, below {EIG_FLOOR}")
    model.Q, model.Sigma = Q, Sigma
    model.diagnostics["Q_min_eig"] = lam_min
    return Q, Sigma


def policy_scores(model: SieveModel, sample: WeightedSample,
                  basis: Optional[np.ndarray] = None) -> np.ndarray:
    """Per-row score ``-psi_plus phi'(-g) + psi_minus phi'(g)`` at ``g_hat``."""
    P = sample.basis if basis is None else basis
    g = P @ model.beta_bar
    loss = model.loss
    return -sample.psi_plus * loss.d1(-g) + sample.psi_minus * loss.d1(g)


def sigma_matrix(Q, Sigma) -> np.ndarray:
    """``Q^-1 Sigma Q^-1``, symmetrized."""
    try:
        qinv_s = np.linalg.solve(Q, Sigma)
        v = np.linalg.solve(Q, qinv_s.T)
    except np.linalg.LinAlgError as exc:
        raise SingularDesignError(f"Q is not invertible: {exc}") from exc
    return 0.5 * (v + v.T)


def sigma_hat(model: SieveModel, Q, Sigma, x) -> np.ndarray:
    """``sqrt(p(x)' Q^-1 Sigma Q^-1 p(x))`` at one or more points.

    This is the per-observation scale: the standard error of
    ``g_hat(x)`` is ``sigma_hat(x) / sqrt(n)``.
    """
    P = eval_basis(model.spec, x)
    V = sigma_matrix(np.asarray(Q, dtype=float), np.asarray(Sigma, dtype=float))
    quad = np.einsum("...i,ij,...j->...", P, V, P)
    return np.sqrt(np.maximum(quad, 0.0))
