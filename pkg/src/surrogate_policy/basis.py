"""Tensor-product orthonormal Legendre basis on the unit cube.

The univariate functions are shifted Legendre polynomials
``p_m(x) = sqrt(2m + 1) * P_m(2x - 1)``, orthonormal on ``[0, 1]`` under
the uniform measure. The ``d``-variate basis contains every product
``p_{a_1}(x_1) ... p_{a_d}(x_d)`` with ``a in {0, ..., k-1}^d`` in
lexicographic order of the multi-index, so the first column is the
constant 1.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError

#: Exponent slack in the sieve growth rule ``K**(4 + eps) / n <~ 1``.
RATE_EPS = 0.1


class RateConditionWarning(UserWarning):
    """The sieve dimension is large relative to the sample size."""


@dataclass
class BasisSpec:
    """Sieve basis specification.

    Attributes
    ----------
    k : int
        Number of univariate polynomials per dimension (degrees 0..k-1).
    d : int
        Number of covariates.
    n_clamped : int
        Running count of coordinates clamped into ``[0, 1]`` during
        evaluation. Diagnostic only.
    """

    k: int
    d: int
    n_clamped: int = field(default=0, compare=False, repr=False)

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ConfigError(f"basis order k must be a positive integer, got {self.k}")
        if int(self.d) != self.d or self.d < 1:
            raise ConfigError(f"dimension d must be a positive integer, got {self.d}")
        self.k = int(self.k)
        self.d = int(self.d)

    @property
    def total_terms(self) -> int:
        return self.k ** self.d

    @property
    def multi_indices(self) -> list[tuple[int, ...]]:
        return list(itertools.product(range(self.k), repeat=self.d))

    def to_dict(self) -> dict:
        return {"k": self.k, "d": self.d}


def shifted_legendre(k: int, t: np.ndarray) -> np.ndarray:
    """Orthonormal shifted Legendre polynomials of degree 0..k-1.

    Returns an array of shape ``t.shape + (k,)``.
    """
    t = np.asarray(t, dtype=float)
    s = 2.0 * t - 1.0
    out = np.empty(t.shape + (k,))
    out[..., 0] = 1.0
    if k > 1:
        out[..., 1] = s
    for m in range(1, k - 1):
        out[..., m + 1] = ((2 * m + 1) * s * out[..., m] - m * out[..., m - 1]) / (m + 1)
    out *= np.sqrt(2.0 * np.arange(k) + 1.0)
    return out


def eval_basis(spec: BasisSpec, x) -> np.ndarray:
    """Evaluate the tensor basis.

    Parameters
    ----------
    spec : BasisSpec
    x : array_like
        A single point of length ``d`` or an ``(n, d)`` array.

    Returns
    -------
    ndarray
        Shape ``(K,)`` for a single point, ``(n, K)`` otherwise, with
        ``K = k**d``.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 0 or (x.ndim == 1 and (spec.d > 1 or x.size == 1))
    if x.ndim == 1 and not single:
        x = x[:, None]  # d == 1: a vector of n scalar points
    x = x.reshape(1, -1) if single else x
    if x.ndim != 2 or x.shape[1] != spec.d:
        raise DomainError(f"expected points with {spec.d} coordinates, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("basis evaluation point has non-finite coordinates")
    outside = (x < 0.0) | (x > 1.0)
    if outside.any():
        spec.n_clamped += int(outside.sum())
        x = np.clip(x, 0.0, 1.0)

    uni = shifted_legendre(spec.k, x)  # (n, d, k)
    out = uni[:, 0, :]
    for j in range(1, spec.d):
        # outer product keeps earlier coordinates as the slow index
        out = (out[:, :, None] * uni[:, j, None, :]).reshape(len(x), -1)
    out = np.ascontiguousarray(out)
    return out[0] if single else out


def complexity_xi(spec: BasisSpec) -> float:
    """``sup_x ||p(x)||`` over the unit cube.

    Every shifted Legendre polynomial attains its maximum modulus
    ``sqrt(2m + 1)`` at ``x = 1``, so the supremum is the norm at the
    all-ones corner.
    """
    corner = np.ones(spec.d)
    return float(np.linalg.norm(eval_basis(spec, corner)))


def check_sieve_growth(spec: BasisSpec, n: int, eps: float = RATE_EPS) -> bool:
    """Warn when ``K**(4 + eps) / n > 1`` for ``K = k**d`` basis terms.

    Returns True when the rule is satisfied.
    """
    ratio = spec.total_terms ** (4.0 + eps) / n
    if ratio > 1.0:
        warnings.warn(
            f"sieve dimension K={spec.total_terms} is large for n={n} "
            f"(K^(4+{eps})/n = {ratio:.3g})", RateConditionWarning, stacklevel=2)
        return False
    return True
