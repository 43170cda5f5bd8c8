"""Score-bootstrap uniform confidence bands for the surrogate policy.

A bootstrap draw perturbs the full-sample policy scores with independent
standard normal multipliers and maps them through ``Q^-1`` to a draw of
the studentized process on the evaluation grid. Suprema and infima of
the draws over the grid give two-sided and one-sided critical values.

Bands are ``g_hat(x) -/+ cv * se(x)`` with ``se(x) = sigma_hat(x) / sqrt(n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import norm

from .basis import eval_basis
from .errors import ConfigError, DegenerateVarianceError, DomainError, UsageError
from .policy import SieveModel, policy_scores, sigma_matrix
from .problems import WeightedSample

SIDES = ("two_sided", "lower", "upper")
_SIDE_ALIASES = {"two": "two_sided", "two-sided": "two_sided", "two_sided": "two_sided",
                 "lower": "lower", "upper": "upper"}
MIN_DRAWS = 100


def normalize_side(side: str) -> str:
    try:
        return _SIDE_ALIASES[side]
    except KeyError:
        raise ConfigError(f"unknown band side {side!r}") from None


@dataclass
class EvalGrid:
    """Finite set of points standing in for the inference region."""

    points: np.ndarray
    resolution: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.size == 0:
            raise ConfigError("evaluation grid is empty")
        if np.any(pts < 0) or np.any(pts > 1) or not np.all(np.isfinite(pts)):
            raise ConfigError("grid points must lie in the unit cube")
        self.points = pts

    def __len__(self):
        return len(self.points)

    @classmethod
    def product(cls, *axes) -> "EvalGrid":
        """Cartesian product of per-dimension value lists."""
        axes = [np.atleast_1d(np.asarray(a, dtype=float)) for a in axes]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.column_stack([m.ravel() for m in mesh])
        return cls(pts, {f"x{j + 1}": len(a) for j, a in enumerate(axes)})

    @classmethod
    def parse(cls, text: str, d: int, default_num: int = 201) -> "EvalGrid":
        """Parse ``"lo:hi[:num],value,..."`` with one entry per covariate.

        A ``lo:hi`` entry is a linear range, a bare number fixes that
        coordinate. Example: ``"0.05:0.95:201,0.5556"``.
        """
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if len(parts) != d:
            raise ConfigError(f"grid spec needs {d} entries, got {len(parts)}")
        axes = []
        try:
            for part in parts:
                if ":" in part:
                    bits = part.split(":")
                    lo, hi = float(bits[0]), float(bits[1])
                    num = int(bits[2]) if len(bits) > 2 else default_num
                    axes.append(np.linspace(lo, hi, num))
                else:
                    axes.append([float(part)])
        except ValueError as exc:
            raise ConfigError(f"bad grid spec {text!r}: {exc}") from exc
        return cls.product(*axes)


@dataclass
class PolicyBand:
    """Band over an evaluation grid.

    ``lo``/``hi`` are ``-inf``/``+inf`` on the open side of one-sided
    bands. ``pointwise_lo``/``pointwise_hi`` are normal-quantile bands
    kept for display only.
    """

    grid: EvalGrid
    g_hat: np.ndarray
    sigma_hat: np.ndarray
    se: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    cv: float
    side: str
    alpha: float
    B: int
    seed: int
    n: int
    pointwise_lo: Optional[np.ndarray] = None
    pointwise_hi: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        def fin(v):
            v = float(v)
            return v if math.isfinite(v) else None
        rows = []
        for j, x in enumerate(self.grid.points):
            rows.append({"x": x.tolist(), "g_hat": float(self.g_hat[j]),
                         "sigma_hat": float(self.sigma_hat[j]),
                         "lo": fin(self.lo[j]), "hi": fin(self.hi[j]),
                         "pointwise_lo": fin(self.pointwise_lo[j]),
                         "pointwise_hi": fin(self.pointwise_hi[j])})
        return {"points": rows, "cv": self.cv, "side": self.side,
                "alpha": self.alpha, "B": self.B, "seed": self.seed, "n": self.n}


def draw_multipliers(n: int, B: int, seed: int) -> np.ndarray:
    """``B x n`` standard normals, row ``b`` from stream ``(seed, b)``."""
    out = np.empty((B, n))
    for b in range(B):
        out[b] = np.random.default_rng([int(seed), b]).standard_normal(n)
    return out


def _grid_terms(model: SieveModel, grid_points):
    if model.Q is None or model.Sigma is None:
        raise UsageError("model has no sandwich matrices; call sandwich() first")
    P = eval_basis(model.spec, grid_points)
    P = np.atleast_2d(P)
    V = sigma_matrix(model.Q, model.Sigma)
    sig = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", P, V, P), 0.0))
    if np.any(sig <= 0):
        raise DegenerateVarianceError("sigma_hat vanishes on the evaluation grid")
    return P, sig


def bootstrap_t_draws(model: SieveModel, sample: WeightedSample, grid,
                      omega: np.ndarray) -> np.ndarray:
    """Bootstrap t-processes on the grid for each row of ``omega``.

    ``omega`` is ``(n,)`` for one draw or ``(B, n)``. Returns ``(G,)`` or
    ``(B, G)`` accordingly.
    """
    pts = grid.points if isinstance(grid, EvalGrid) else grid
    P_grid, sig = _grid_terms(model, pts)
    omega = np.asarray(omega, dtype=float)
    single = omega.ndim == 1
    omega = np.atleast_2d(omega)
    n = sample.n
    if omega.shape[1] != n:
        raise DomainError("multiplier vector length must equal the sample size")
    weighted = sample.basis * policy_scores(model, sample)[:, None]  # (n, K)
    # sqrt(n) * mean(omega_i * score_i * p_i); E[omega * score | data] = 0
    gn = omega @ weighted / math.sqrt(n)  # (B, K)
    t = np.linalg.solve(model.Q, gn.T).T @ P_grid.T / sig
    return t[0] if single else t


def bootstrap_t_draw(model, sample, grid, omega) -> np.ndarray:
    """One bootstrap draw of the t-process; see :func:`bootstrap_t_draws`."""
    return bootstrap_t_draws(model, sample, grid, np.asarray(omega, dtype=float).ravel())


def type1_quantile(values, q: float) -> float:
    """Order statistic at 1-based index ``ceil(q * B)``."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise DomainError("no bootstrap draws")
    idx = math.ceil(q * v.size - 1e-9)
    return float(v[min(max(idx, 1), v.size) - 1])


def critical_value(draws, alpha: float, side: str) -> float:
    """Bootstrap critical value.

    ``draws`` is ``(B, G)`` (a t-process per draw) or ``(B,)`` (one grid
    point per draw).

    * ``two_sided``: (1 - alpha) quantile of ``sup |t|``
    * ``lower``: (1 - alpha) quantile of ``sup t``
    * ``upper``: alpha quantile of ``inf t``
    """
    side = normalize_side(side)
    draws = np.asarray(draws, dtype=float)
    if draws.size == 0:
        raise DomainError("no bootstrap draws")
    if draws.ndim == 1:
        draws = draws[:, None]
    if side == "two_sided":
        return type1_quantile(np.abs(draws).max(axis=1), 1.0 - alpha)
    if side == "lower":
        return type1_quantile(draws.max(axis=1), 1.0 - alpha)
    return type1_quantile(draws.min(axis=1), alpha)


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")


def build_band(model: SieveModel, sample: WeightedSample, grid: EvalGrid,
               alpha: float = 0.05, B: int = 1000, seed: int = 0,
               side: str = "two_sided") -> PolicyBand:
    """Uniform band for the surrogate policy over ``grid``.

    ``sample`` carries full-sample weights and basis rows; ``model`` must
    already hold ``Q`` and ``Sigma``.
    """
    side = normalize_side(side)
    _check_alpha(alpha)
    if B < MIN_DRAWS:
        raise ConfigError(f"need at least {MIN_DRAWS} bootstrap draws, got {B}")
    n = sample.n
    P_grid, sig = _grid_terms(model, grid.points)
    g_hat = P_grid @ model.beta_bar
    se = sig / math.sqrt(n)
    draws = bootstrap_t_draws(model, sample, grid, draw_multipliers(n, B, seed))
    cv = critical_value(draws, alpha, side)
    inf = np.full_like(g_hat, np.inf)
    if side == "two_sided":
        lo, hi = g_hat - cv * se, g_hat + cv * se
        z = norm.ppf(1 - alpha / 2)
        plo, phi = g_hat - z * se, g_hat + z * se
    elif side == "lower":
        lo, hi = g_hat - cv * se, inf
        plo, phi = g_hat - norm.ppf(1 - alpha) * se, inf
    else:
        lo, hi = -inf, g_hat - cv * se
        plo, phi = -inf, g_hat + norm.ppf(1 - alpha) * se
    return PolicyBand(grid=grid, g_hat=g_hat, sigma_hat=sig, se=se, lo=lo, hi=hi,
                      cv=cv, side=side, alpha=alpha, B=B, seed=seed, n=n,
                      pointwise_lo=plo, pointwise_hi=phi)


@dataclass
class SignTestResult:
    null: str
    reject: bool
    witnesses: np.ndarray
    statistic: float

    @property
    def verdict(self) -> str:
        return "reject" if self.reject else "fail_to_reject"

    def to_dict(self) -> dict:
        return {"null": self.null, "verdict": self.verdict,
                "statistic": self.statistic, "witnesses": self.witnesses.tolist()}


def uniform_sign_test(band: PolicyBand, null: str) -> SignTestResult:
    """Test ``g*(x) <= 0`` (``all_leq_zero``) or ``g*(x) >= 0`` (``all_geq_zero``) on the grid.

    The first null needs a ``lower`` band and is rejected when the lower
    band is positive somewhere; the second needs an ``upper`` band and is
    rejected when the upper band is negative somewhere. Witnesses are the
    violating grid points.
    """
    if null == "all_leq_zero":
        if band.side != "lower":
            raise UsageError("the null g <= 0 is tested with a lower band")
        viol = band.lo > 0
        stat = float(np.max(band.lo))
    elif null == "all_geq_zero":
        if band.side != "upper":
            raise UsageError("the null g >= 0 is tested with an upper band")
        viol = band.hi < 0
        stat = float(np.min(band.hi))
    else:
        raise UsageError(f"unknown null {null!r}")
    return SignTestResult(null=null, reject=bool(viol.any()),
                          witnesses=band.grid.points[viol], statistic=stat)
