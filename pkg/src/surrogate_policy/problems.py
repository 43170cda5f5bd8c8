"""Cost weights for the three classification problems.

Each adapter turns an :class:`ObservationTable` into per-row weights:

* ``psi_plus``  cost of classifying positive (``g(x) >= 0``),
* ``psi_minus`` cost of classifying negative,
* ``psi1`` / ``psi0`` signed value of the two actions,

linked row-wise by ``psi_plus - psi_minus == -(psi1 - psi0)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from .errors import SchemaError

PROBLEM_KINDS = ("max-score", "utility", "welfare")

#: Propensity scores are clipped to ``[PI_FLOOR, 1 - PI_FLOOR]``.
PI_FLOOR = 0.01

ArrayOrFunc = Union[np.ndarray, float, Callable[[np.ndarray], np.ndarray]]


@dataclass
class ObservationTable:
    """Outcomes, optional binary treatment and covariates in ``[0, 1]^d``.

    ``normalization`` records the per-column ``(min, max)`` used to map
    raw data into the unit interval, keyed by column name.
    """

    y: np.ndarray
    x: np.ndarray
    a: Optional[np.ndarray] = None
    normalization: dict = field(default_factory=dict)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        x = np.asarray(self.x, dtype=float)
        self.x = x[:, None] if x.ndim == 1 else x
        if self.a is not None:
            self.a = np.asarray(self.a, dtype=float).ravel()
        n = len(self.y)
        if n < 2:
            raise SchemaError("need at least two observations")
        if self.x.shape[0] != n or (self.a is not None and len(self.a) != n):
            raise SchemaError("y, x and a must have the same number of rows")
        for name, arr in (("y", self.y), ("x", self.x), ("a", self.a)):
            if arr is not None and not np.all(np.isfinite(arr)):
                raise SchemaError(f"column {name} has non-finite entries")
        if self.a is not None and not np.all((self.a == 0) | (self.a == 1)):
            raise SchemaError("treatment must be coded 0/1")

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def subset(self, idx) -> "ObservationTable":
        return ObservationTable(
            y=self.y[idx], x=self.x[idx],
            a=None if self.a is None else self.a[idx],
            normalization=self.normalization)


@dataclass
class WeightedSample:
    """Per-row cost weights, optionally with fold ids and basis rows."""

    psi_plus: np.ndarray
    psi_minus: np.ndarray
    psi1: Optional[np.ndarray] = None
    psi0: Optional[np.ndarray] = None
    fold: Optional[np.ndarray] = None
    basis: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return len(self.psi_plus)

    def with_fold(self, fold) -> "WeightedSample":
        return replace(self, fold=np.asarray(fold))

    def with_basis(self, basis) -> "WeightedSample":
        return replace(self, basis=np.asarray(basis, dtype=float))

    def subset(self, idx) -> "WeightedSample":
        def take(v):
            return None if v is None else v[idx]
        return WeightedSample(
            psi_plus=self.psi_plus[idx], psi_minus=self.psi_minus[idx],
            psi1=take(self.psi1), psi0=take(self.psi0),
            fold=take(self.fold), basis=take(self.basis))

    def scaled(self, lam: float) -> "WeightedSample":
        """All weights multiplied by ``lam``."""
        def mul(v):
            return None if v is None else lam * v
        return replace(self, psi_plus=lam * self.psi_plus,
                       psi_minus=lam * self.psi_minus,
                       psi1=mul(self.psi1), psi0=mul(self.psi0))


def split_signed(psi1, psi0) -> tuple[np.ndarray, np.ndarray]:
    """Positive/negative-part construction of ``(psi_plus, psi_minus)``.

    ``psi_plus = psi1^- + psi0^+`` and ``psi_minus = psi1^+ + psi0^-``.
    """
    psi1 = np.asarray(psi1, dtype=float)
    psi0 = np.asarray(psi0, dtype=float)
    psi_plus = np.maximum(-psi1, 0.0) + np.maximum(psi0, 0.0)
    psi_minus = np.maximum(psi1, 0.0) + np.maximum(-psi0, 0.0)
    return psi_plus, psi_minus


def _resolve(v: ArrayOrFunc, x: np.ndarray) -> np.ndarray:
    if callable(v):
        v = v(x)
    return np.broadcast_to(np.asarray(v, dtype=float), (x.shape[0],)).copy()


def weights_max_score(table: ObservationTable) -> WeightedSample:
    """Maximum score: ``psi_plus = 1 - y``, ``psi_minus = y``."""
    y = table.y
    if not np.all((y == 0) | (y == 1)):
        raise SchemaError("max-score outcome must be coded 0/1")
    return WeightedSample(psi_plus=1.0 - y, psi_minus=y.copy(),
                          psi1=y.copy(), psi0=1.0 - y)


def weights_utility(table: ObservationTable, b: ArrayOrFunc,
                    c: ArrayOrFunc) -> WeightedSample:
    """Expected utility maximization with a binary action.

    ``b`` and ``c`` are the utility scale and threshold, given as
    constants, per-row arrays or functions of ``x``. With the signed
    gain ``u = b * (y + 1 - 2c)`` the action values are ``psi1 = u`` and
    ``psi0 = -u``.
    """
    y = table.y
    if not np.all((y == -1) | (y == 1)):
        raise SchemaError("utility outcome must be coded -1/1")
    bx = _resolve(b, table.x)
    cx = _resolve(c, table.x)
    if np.any(bx < 0):
        raise SchemaError("utility scale b(x) must be nonnegative")
    if np.any((cx <= 0) | (cx >= 1)):
        raise SchemaError("utility threshold c(x) must lie in (0, 1)")
    u = bx * (y + 1.0 - 2.0 * cx)
    return WeightedSample(psi_plus=2.0 * np.maximum(-u, 0.0),
                          psi_minus=2.0 * np.maximum(u, 0.0),
                          psi1=u, psi0=-u)


def aipw_values(y, a, mu1, mu0, pi) -> tuple[np.ndarray, np.ndarray]:
    """Doubly robust action values ``(psi1, psi0)`` from per-row nuisances."""
    pi = np.clip(pi, PI_FLOOR, 1.0 - PI_FLOOR)
    psi1 = a * (y - mu1) / pi + mu1
    psi0 = (1.0 - a) * (y - mu0) / (1.0 - pi) + mu0
    return psi1, psi0


def weights_aipw(table: ObservationTable, mu1: ArrayOrFunc, mu0: ArrayOrFunc,
                 pi: ArrayOrFunc) -> WeightedSample:
    """Welfare maximization with augmented inverse propensity weights.

    Nuisances may be functions of ``x`` or arrays of per-row predictions
    (the latter is how cross-fitted predictions are passed in).
    """
    if table.a is None:
        raise SchemaError("welfare problem requires a treatment column 'a'")
    psi1, psi0 = aipw_values(table.y, table.a, _resolve(mu1, table.x),
                             _resolve(mu0, table.x), _resolve(pi, table.x))
    psi_plus, psi_minus = split_signed(psi1, psi0)
    return WeightedSample(psi_plus=psi_plus, psi_minus=psi_minus,
                          psi1=psi1, psi0=psi0)
