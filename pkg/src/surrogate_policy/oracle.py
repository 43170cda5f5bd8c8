"""Brute-force reference computations used to check the estimators.

Nothing here is used on the estimation path. The routines favour
transparency over speed: exhaustive enumeration of 0-1 policies on a
finite support, golden-section search for the pointwise surrogate
minimizer and exact population values on discrete designs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError
from .losses import CAP, as_loss

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class DiscreteDesign:
    """Finite covariate support with conditional costs at each point.

    ``c1[j]`` is the expected cost of classifying point ``j`` positive
    and ``c0[j]`` of classifying it negative. ``theta1``/``theta0`` are
    the optional conditional action values used for population values.
    """

    points: np.ndarray
    masses: np.ndarray
    c1: np.ndarray
    c0: np.ndarray
    theta1: Optional[np.ndarray] = None
    theta0: Optional[np.ndarray] = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.masses = np.asarray(self.masses, dtype=float)
        self.c1 = np.asarray(self.c1, dtype=float)
        self.c0 = np.asarray(self.c0, dtype=float)
        if abs(self.masses.sum() - 1.0) > 1e-12 or np.any(self.masses < 0):
            raise DomainError("masses must be nonnegative and sum to one")
        if np.any(self.c1 < 0) or np.any(self.c0 < 0):
            raise DomainError("conditional costs must be nonnegative")

    @property
    def size(self) -> int:
        return len(self.masses)

    @classmethod
    def from_values(cls, points, masses, theta1, theta0) -> "DiscreteDesign":
        """Design whose action values are deterministic given ``x``.

        The costs follow from the positive/negative-part construction,
        so that ``c0 - c1 = theta1 - theta0``.
        """
        theta1 = np.asarray(theta1, dtype=float)
        theta0 = np.asarray(theta0, dtype=float)
        c1 = np.maximum(-theta1, 0) + np.maximum(theta0, 0)
        c0 = np.maximum(theta1, 0) + np.maximum(-theta0, 0)
        return cls(points, masses, c1, c0, theta1, theta0)

    @classmethod
    def random(cls, rng: np.random.Generator, size: int,
               min_gap: float = 0.0) -> "DiscreteDesign":
        """Random design with ``|c0 - c1| >= min_gap`` at every point."""
        masses = rng.dirichlet(np.ones(size))
        c1 = rng.uniform(0.0, 2.0, size)
        gap = rng.uniform(min_gap, 2.0, size) * rng.choice([-1.0, 1.0], size)
        c0 = np.maximum(c1 + gap, 0.0)
        # enforce the gap again where clipping at zero shrank it
        short = np.abs(c0 - c1) < min_gap
        c0[short] = c1[short] + min_gap
        return cls(np.arange(size, dtype=float), masses, c1, c0)


def zero_one_optimal_signs(design: DiscreteDesign) -> np.ndarray:
    """Pointwise minimizer of the 0-1 conditional risk.

    Returns +1 where ``c0 > c1``, -1 where ``c0 < c1`` and 0 on ties.
    """
    return np.sign(design.c0 - design.c1).astype(int)


def zero_one_risk(design: DiscreteDesign, signs) -> float:
    """``E[c1 1{g >= 0} + c0 1{g < 0}]`` for a sign vector (0 counts as +)."""
    pos = np.asarray(signs) >= 0
    return float(np.sum(design.masses * np.where(pos, design.c1, design.c0)))


def zero_one_exhaustive(design: DiscreteDesign) -> np.ndarray:
    """Minimize the 0-1 risk by enumerating all ``2**J`` sign patterns.

    Points with zero mass or tied costs are indifferent; for those the
    first minimizing pattern found is returned.
    """
    size = design.size
    if size > 16:
        raise DomainError("exhaustive search limited to 16 support points")
    patterns = np.array(list(itertools.product((-1, 1), repeat=size)))
    pos = patterns > 0
    risks = (design.masses * np.where(pos, design.c1, design.c0)).sum(axis=1)
    return patterns[int(np.argmin(risks))]


def golden_section_argmin(loss, c1: float, c0: float,
                          bracket: tuple[float, float] = (-CAP, CAP),
                          tol: float = 1e-13, max_iter: int = 500) -> float:
    """Minimizer of ``c1 phi(-g) + c0 phi(g)`` by golden-section search.

    The search runs on ``|R'(g)|`` rather than ``R(g)``: the derivative
    of a strictly convex risk is increasing, so its magnitude is
    unimodal with a V-shaped minimum at the root. Function values near a
    smooth minimum are flat to within rounding, which would cap the
    attainable accuracy near ``sqrt(eps)``.
    """
    loss = as_loss(loss)
    if c1 <= 0 or c0 <= 0:
        raise DomainError("golden-section oracle needs positive costs")

    def slope(g):
        return abs(-c1 * float(loss.d1(-g)) + c0 * float(loss.d1(g)))

    lo, hi = float(bracket[0]), float(bracket[1])
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1, f2 = slope(x1), slope(x2)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INVPHI * (hi - lo)
            f1 = slope(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INVPHI * (hi - lo)
            f2 = slope(x2)
    return 0.5 * (lo + hi)


def population_value(design, policy=None) -> float:
    """Population value of a policy.

    Parameters
    ----------
    design : DiscreteDesign or simulation.DgpSpec
        Discrete designs are summed exactly; simulation designs are
        integrated numerically over the covariate law.
    policy : None, array_like or callable
        ``None`` gives the optimal value ``E[max(theta1, theta0)]``. For a
        discrete design an array gives the policy value at each support
        point; a callable is evaluated at the support points. Values
        ``>= 0`` mean treat.
    """
    if not isinstance(design, DiscreteDesign):
        from .simulation import population_value_dgp
        return population_value_dgp(design, policy)
    if design.theta1 is None or design.theta0 is None:
        raise DomainError("design has no action values")
    if policy is None:
        chosen = np.maximum(design.theta1, design.theta0)
    else:
        g = policy(design.points) if callable(policy) else np.asarray(policy)
        chosen = np.where(np.asarray(g) >= 0, design.theta1, design.theta0)
    return float(np.sum(design.masses * chosen))
