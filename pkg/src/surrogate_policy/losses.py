"""Strictly convex surrogate losses for the 0-1 classification loss.

Three margin losses are offered, each twice continuously differentiable
with ``phi'(0) < 0``:

* ``logistic``     phi(t) = log(1 + exp(-t))
* ``exponential``  phi(t) = exp(-t)
* ``squared``      phi(t) = (1 - t)**2

The hinge loss is deliberately absent: it is not strictly convex and has
no second derivative, so the surrogate minimizer would not be unique.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DegenerateRiskError, DomainError

LOSS_KINDS = ("logistic", "exponential", "squared")

#: Saturation value returned when one conditional cost is zero and the
#: true minimizer is +/- infinity.
CAP = 30.0


@dataclass(frozen=True)
class SurrogateLoss:
    """A margin loss ``phi`` together with its first two derivatives.

    All three evaluators accept scalars or arrays.
    """

    kind: str = "logistic"

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise DomainError(
                f"unknown loss {self.kind!r}; expected one of {LOSS_KINDS}")

    def value(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "logistic":
            return np.logaddexp(0.0, -t)
        if self.kind == "exponential":
            return np.exp(-t)
        return (1.0 - t) ** 2

    def d1(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "logistic":
            return -expit(-t)
        if self.kind == "exponential":
            return -np.exp(-t)
        return -2.0 * (1.0 - t)

    def d2(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "logistic":
            return expit(t) * expit(-t)
        if self.kind == "exponential":
            return np.exp(-t)
        return np.full_like(t, 2.0)


def as_loss(loss) -> SurrogateLoss:
    """Accept either a :class:`SurrogateLoss` or its string name."""
    if isinstance(loss, SurrogateLoss):
        return loss
    return SurrogateLoss(str(loss))


def eval_loss(loss, t: float) -> tuple[float, float, float]:
    """Return ``(phi(t), phi'(t), phi''(t))`` at a finite scalar ``t``."""
    loss = as_loss(loss)
    t = float(t)
    if not math.isfinite(t):
        raise DomainError(f"loss argument must be finite, got {t}")
    return float(loss.value(t)), float(loss.d1(t)), float(loss.d2(t))


def pointwise_surrogate_argmin(loss, c1: float, c0: float,
                               cap: float = CAP) -> float:
    """Minimize ``c1 * phi(-g) + c0 * phi(g)`` over the real line.

    ``c1`` is the expected cost of classifying positive (``g >= 0``) and
    ``c0`` the expected cost of classifying negative. The minimizer has
    the sign of ``c0 - c1``.

    Parameters
    ----------
    loss : SurrogateLoss or str
    c1, c0 : float
        Nonnegative conditional costs, not both zero.
    cap : float
        Saturation bound used when the exact minimizer is infinite.

    Returns
    -------
    float
        The unique minimizer, clipped to ``[-cap, cap]``.
    """
    loss = as_loss(loss)
    c1 = float(c1)
    c0 = float(c0)
    if not (math.isfinite(c1) and math.isfinite(c0)):
        raise DomainError("conditional costs must be finite")
    if c1 < 0 or c0 < 0:
        raise DomainError("conditional costs must be nonnegative")
    if c1 == 0 and c0 == 0:
        raise DegenerateRiskError("c1 = c0 = 0: every g minimizes the risk")
    if loss.kind == "squared":
        # finite even when one cost vanishes
        return (c0 - c1) / (c0 + c1)
    if c1 == 0:
        return cap
    if c0 == 0:
        return -cap
    # the ratio keeps power-of-two rescaling of both costs exact
    ratio = c0 / c1
    if ratio == math.inf:
        return cap
    if ratio == 0.0:
        return -cap
    g = math.log(ratio)
    if loss.kind == "exponential":
        g *= 0.5
    return min(max(g, -cap), cap)


def surrogate_argmin_array(loss, c1, c0, cap: float = CAP) -> np.ndarray:
    """Vectorized :func:`pointwise_surrogate_argmin` for positive costs."""
    loss = as_loss(loss)
    c1 = np.asarray(c1, dtype=float)
    c0 = np.asarray(c0, dtype=float)
    if np.any(c1 < 0) or np.any(c0 < 0):
        raise DomainError("conditional costs must be nonnegative")
    if np.any((c1 == 0) & (c0 == 0)):
        raise DegenerateRiskError("c1 = c0 = 0 at some point")
    if loss.kind == "squared":
        return (c0 - c1) / (c0 + c1)
    with np.errstate(divide="ignore", over="ignore"):
        g = np.log(c0 / c1)
    if loss.kind == "exponential":
        g = 0.5 * g
    return np.clip(g, -cap, cap)
