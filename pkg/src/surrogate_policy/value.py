"""Plug-in optimal value, its score bootstrap and benchmark comparisons.

The plug-in value of a policy ``g`` is the sample mean of the selected
action value, ``psi1`` where ``g >= 0`` and ``psi0`` elsewhere, with
cross-fitted ``psi``. Bootstrap draws multiply the centered scores by
standard normals; the centering term of the empirical process is zero
conditional on the data and is dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .bands import MIN_DRAWS, draw_multipliers, type1_quantile
from .errors import ConfigError, DomainError, UsageError
from .problems import WeightedSample


def _treat(g) -> np.ndarray:
    # ties at zero count as treat
    return np.asarray(g, dtype=float) >= 0


def selected_values(g, psi1, psi0) -> np.ndarray:
    return np.where(_treat(g), psi1, psi0)


def value_estimate(g, sample: WeightedSample) -> float:
    """Plug-in value of the policy with per-row values ``g``.

    Examples
    --------
    >>> s = WeightedSample(np.zeros(2), np.zeros(2), np.array([1., 3.]), np.array([5., 7.]))
    >>> value_estimate(np.array([1., -1.]), s)
    4.0
    """
    _require_values(sample)
    return float(np.mean(selected_values(g, sample.psi1, sample.psi0)))


def score_sL(g, sample: WeightedSample, v_hat: Optional[float] = None) -> np.ndarray:
    """Per-row centered value scores ``psi_selected - v_hat``."""
    _require_values(sample)
    sel = selected_values(g, sample.psi1, sample.psi0)
    if v_hat is None:
        v_hat = float(np.mean(sel))
    return sel - v_hat


def bootstrap_value_draw(scores, delta) -> float:
    """``sqrt(n) * mean(scores * delta)``."""
    scores = np.asarray(scores, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if scores.shape != delta.shape:
        raise DomainError("scores and multipliers must have equal length")
    return float(np.sum(scores * delta) / math.sqrt(len(scores)))


def bootstrap_value_draws(scores, B: int, seed: int) -> np.ndarray:
    """``B`` draws using the same per-draw streams as the policy bands."""
    scores = np.asarray(scores, dtype=float)
    return draw_multipliers(len(scores), B, seed) @ scores / math.sqrt(len(scores))


def _require_values(sample):
    if sample.psi1 is None or sample.psi0 is None:
        raise UsageError("sample carries no action values psi1/psi0")


def _check(alpha, B):
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    if B < MIN_DRAWS:
        raise ConfigError(f"need at least {MIN_DRAWS} bootstrap draws, got {B}")


@dataclass
class ValueReport:
    """Plug-in value with bootstrap CI and one-sided lower bound.

    ``ci`` uses the (1 - alpha) quantile of ``|Z|``; ``lower_bound`` is
    ``v_hat - c / sqrt(n)`` with ``c`` the (1 - alpha) quantile of ``Z``,
    so that ``H0: V0 <= v0`` is rejected when ``v0 < lower_bound``.
    """

    v_hat: float
    draws: np.ndarray
    sigma_v: float
    ci: tuple
    lower_bound: float
    alpha: float
    B: int
    seed: int
    n: int
    benchmarks: list = field(default_factory=list)

    def p_value_leq(self, v0: float) -> float:
        """Bootstrap p-value for ``H0: V0 <= v0``."""
        t = math.sqrt(self.n) * (self.v_hat - v0)
        return float(np.mean(self.draws >= t))

    def to_dict(self) -> dict:
        return {"v_hat": self.v_hat, "sigma_v": self.sigma_v,
                "ci": list(self.ci), "lower_bound": self.lower_bound,
                "alpha": self.alpha, "B": self.B, "seed": self.seed, "n": self.n,
                "benchmarks": [b.to_dict() for b in self.benchmarks]}


def value_ci(g, sample: WeightedSample, alpha: float = 0.05, B: int = 1000,
             seed: int = 0) -> ValueReport:
    """Plug-in value of ``g`` (per-row values) with bootstrap inference."""
    _check(alpha, B)
    v_hat = value_estimate(g, sample)
    scores = score_sL(g, sample, v_hat)
    draws = bootstrap_value_draws(scores, B, seed)
    n = sample.n
    half = type1_quantile(np.abs(draws), 1.0 - alpha) / math.sqrt(n)
    lower = v_hat - type1_quantile(draws, 1.0 - alpha) / math.sqrt(n)
    return ValueReport(v_hat=v_hat, draws=draws, sigma_v=float(np.std(draws)),
                       ci=(v_hat - half, v_hat + half), lower_bound=lower,
                       alpha=alpha, B=B, seed=seed, n=n)


@dataclass
class BenchmarkPolicy:
    """Comparison policy.

    ``kind`` is ``everyone``, ``none``, ``random`` or ``custom``. Random
    policies draw their Bernoulli(p) assignments once, from ``seed``, the
    first time they are evaluated on a sample of a given size, and keep
    them in ``assignments``.
    """

    kind: str
    p: float = 0.5
    seed: int = 0
    rule: Optional[Callable] = None
    assignments: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("everyone", "none", "random", "custom"):
            raise ConfigError(f"unknown benchmark {self.kind!r}")
        if self.kind == "random" and not 0.0 <= self.p <= 1.0:
            raise ConfigError("random benchmark needs p in [0, 1]")
        if self.kind == "custom" and self.rule is None:
            raise ConfigError("custom benchmark needs a rule")

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "BenchmarkPolicy":
        """``everyone``, ``none`` or ``random[:p=0.5]``."""
        head, _, rest = text.partition(":")
        if head != "random":
            if rest:
                raise ConfigError(f"bad benchmark {text!r}")
            return cls(head)
        p = 0.5
        if rest:
            key, _, val = rest.partition("=")
            if key != "p":
                raise ConfigError(f"bad benchmark {text!r}")
            try:
                p = float(val)
            except ValueError:
                raise ConfigError(f"bad benchmark {text!r}") from None
        return cls("random", p=p, seed=seed)

    @property
    def label(self) -> str:
        return f"random:p={self.p:g}" if self.kind == "random" else self.kind

    def evaluate(self, x) -> np.ndarray:
        """Per-row policy values (``>= 0`` means treat)."""
        x = np.asarray(x, dtype=float)
        n = x.shape[0]
        if self.kind == "everyone":
            return np.ones(n)
        if self.kind == "none":
            return -np.ones(n)
        if self.kind == "custom":
            return np.asarray(self.rule(x), dtype=float)
        if self.assignments is None or len(self.assignments) != n:
            rng = np.random.default_rng([int(self.seed), 0xBE])
            self.assignments = (rng.random(n) < self.p).astype(float)
        return 2.0 * self.assignments - 1.0


@dataclass
class BenchmarkResult:
    benchmark: str
    T: float
    p_two_sided: float
    p_right: float
    p_left: float
    alpha: float
    diff: float

    @property
    def reject_two_sided(self) -> bool:
        return self.p_two_sided < self.alpha

    @property
    def reject_right(self) -> bool:
        return self.p_right < self.alpha

    @property
    def reject_left(self) -> bool:
        return self.p_left < self.alpha

    def to_dict(self) -> dict:
        return {"benchmark": self.benchmark, "T": self.T, "diff": self.diff,
                "p_two_sided": self.p_two_sided, "p_right": self.p_right,
                "p_left": self.p_left, "alpha": self.alpha,
                "reject_two_sided": self.reject_two_sided,
                "reject_right": self.reject_right, "reject_left": self.reject_left}


def benchmark_test(g_hat, g_dagger, sample: WeightedSample, alpha: float = 0.05,
                   B: int = 1000, seed: int = 0, label: str = "custom") -> BenchmarkResult:
    """Compare the value of ``g_hat`` to that of ``g_dagger`` (per-row values).

    ``T = sqrt(n) (V(g_hat) - V(g_dagger))``. The bootstrap uses the
    difference scores ``(psi1 - psi0)(1{g_hat >= 0} - 1{g_dagger >= 0})``
    centered at the observed value difference. Right-sided tests
    ``H0: V0 <= V(g_dagger)``, left-sided tests ``H0: V0 >= V(g_dagger)``.
    """
    _check(alpha, B)
    _require_values(sample)
    n = sample.n
    contrast = sample.psi1 - sample.psi0
    raw = contrast * (_treat(g_hat).astype(float) - _treat(g_dagger).astype(float))
    diff = float(np.mean(raw))
    T = math.sqrt(n) * diff
    draws = bootstrap_value_draws(raw - diff, B, seed)
    return BenchmarkResult(
        benchmark=label, T=T, diff=diff, alpha=alpha,
        p_two_sided=float(np.mean(np.abs(draws) >= abs(T))),
        p_right=float(np.mean(draws >= T)),
        p_left=float(np.mean(draws <= T)))
