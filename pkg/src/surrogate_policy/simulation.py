"""Simulation design and Monte Carlo drivers.

Data-generating process, with ``A`` in ``{-1, 1}``::

    Y = A * Delta(X) + S(X) + u,   u ~ N(0, 1)
    Delta(x) = tanh((1, x') gamma),   S(x) = sin(x' beta_S)
    P(A = 1 | X = x) = pi(x) = logistic(x' beta_pi)

``X1`` is uniform on ``[0, 1]`` and ``X2`` is an education level in
``{7, ..., 18}`` divided by 18.

Estimators see the treatment coded ``a = (A + 1) / 2``, so
``mu(1, x) = Delta(x) + S(x)`` and ``mu(0, x) = -Delta(x) + S(x)``.

Conditional costs under the true nuisances
-------------------------------------------
With ``psi1 = a (y - mu1) / pi + mu1``: given ``x``, with probability
``pi`` the row is treated and ``psi1 = mu1 + u / pi ~ N(mu1, 1 / pi^2)``;
otherwise ``psi1 = mu1`` exactly. Likewise ``psi0 ~ N(mu0, 1 / (1 - pi)^2)``
with probability ``1 - pi`` and ``psi0 = mu0`` otherwise. Using the normal
partial moment ``E[N(m, s^2)^+] = m Phi(m / s) + s phi(m / s)``::

    C1(x) = E[psi1^- | x] + E[psi0^+ | x]
    C0(x) = E[psi1^+ | x] + E[psi0^- | x]

and ``C0 - C1 = mu1 - mu0 = 2 Delta(x)``. The oracle surrogate policy is
the pointwise minimizer for ``(C1, C0)``; its sign is that of ``Delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats
from scipy.special import expit
from scipy.stats import qmc

from .bands import EvalGrid, build_band, uniform_sign_test
from .errors import ConfigError
from .losses import surrogate_argmin_array
from .pipeline import FitSettings, fit_policy
from .problems import ObservationTable
from .value import BenchmarkPolicy, benchmark_test, value_ci, value_estimate

EDUCATION_LEVELS = np.arange(7, 19)
EDUCATION_SCALE = 18.0

#: Fixed coordinate of the inference region, ten years of education.
GRID_X2 = 10.0 / EDUCATION_SCALE

SCALES = {"desk": {"S": 200, "B": 300}, "paper": {"S": 1000, "B": 1000}}

#: Welfare design for the value experiments: treatment helps unless
#: ``x1 + x2 > 1.5``, a region holding a modest share of the population.
WELFARE_GAMMA = (3.0, -2.0, -2.0)


def default_education_probs() -> np.ndarray:
    """Triangular mass on 7..18 peaking at 12, weight ``1 - |e - 12| / 7``."""
    w = 1.0 - np.abs(EDUCATION_LEVELS - 12) / 7.0
    return w / w.sum()


@dataclass
class DgpSpec:
    """Parameters of the simulation design."""

    gamma: Sequence[float] = WELFARE_GAMMA
    beta_s: Sequence[float] = (-1.0, 1.0)
    beta_pi: Sequence[float] = (1.0, -1.0)
    n: int = 500
    seed: int = 0
    edu_probs: Optional[np.ndarray] = None

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float)
        self.beta_s = np.asarray(self.beta_s, dtype=float)
        self.beta_pi = np.asarray(self.beta_pi, dtype=float)
        if self.gamma.shape != (3,) or self.beta_s.shape != (2,) or self.beta_pi.shape != (2,):
            raise ConfigError("gamma needs 3 entries, beta_s and beta_pi need 2")
        probs = default_education_probs() if self.edu_probs is None else self.edu_probs
        probs = np.asarray(probs, dtype=float)
        if probs.shape != EDUCATION_LEVELS.shape or np.any(probs < 0) or \
                abs(probs.sum() - 1.0) > 1e-12:
            raise ConfigError("education probabilities must be 12 nonnegative "
                              "masses summing to one")
        self.edu_probs = probs
        if self.n < 2:
            raise ConfigError("n must be at least 2")

    # -- population functions --------------------------------------------

    @staticmethod
    def _x(x) -> np.ndarray:
        return np.atleast_2d(np.asarray(x, dtype=float))

    def delta(self, x) -> np.ndarray:
        x = self._x(x)
        return np.tanh(self.gamma[0] + x @ self.gamma[1:])

    def s(self, x) -> np.ndarray:
        return np.sin(self._x(x) @ self.beta_s)

    def pi(self, x) -> np.ndarray:
        return expit(self._x(x) @ self.beta_pi)

    def mu1(self, x) -> np.ndarray:
        return self.delta(x) + self.s(x)

    def mu0(self, x) -> np.ndarray:
        return -self.delta(x) + self.s(x)

    def contrast(self, x) -> np.ndarray:
        """``E[psi1 - psi0 | x] = 2 Delta(x)``."""
        return 2.0 * self.delta(x)

    def costs(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Conditional costs ``(C1(x), C0(x))`` under the true nuisances."""
        mu1, mu0, p = self.mu1(x), self.mu0(x), self.pi(x)
        pos1, neg1 = _normal_parts(mu1, 1.0 / p)
        pos0, neg0 = _normal_parts(mu0, 1.0 / (1.0 - p))
        e1_pos = p * pos1 + (1 - p) * np.maximum(mu1, 0)
        e1_neg = p * neg1 + (1 - p) * np.maximum(-mu1, 0)
        e0_pos = (1 - p) * pos0 + p * np.maximum(mu0, 0)
        e0_neg = (1 - p) * neg0 + p * np.maximum(-mu0, 0)
        return e1_neg + e0_pos, e1_pos + e0_neg

    def g_star(self, x, loss="logistic") -> np.ndarray:
        c1, c0 = self.costs(x)
        return surrogate_argmin_array(loss, c1, c0)

    def margin_flag(self, x, tol: float = 1e-12) -> bool:
        """True when the contrast vanishes somewhere on ``x``."""
        return bool(np.any(np.abs(self.contrast(x)) <= tol))

    # -- sampling ----------------------------------------------------------

    def sample_x(self, rng: np.random.Generator, n: int) -> np.ndarray:
        x1 = rng.random(n)
        edu = rng.choice(EDUCATION_LEVELS, size=n, p=self.edu_probs)
        return np.column_stack([x1, edu / EDUCATION_SCALE])

    def to_dict(self) -> dict:
        return {"gamma": self.gamma.tolist(), "beta_s": self.beta_s.tolist(),
                "beta_pi": self.beta_pi.tolist(), "n": self.n, "seed": self.seed,
                "edu_levels": EDUCATION_LEVELS.tolist(),
                "edu_probs": self.edu_probs.tolist()}


def _normal_parts(m, s):
    """``(E[X^+], E[X^-])`` for ``X ~ N(m, s^2)``."""
    z = m / s
    dens = s * stats.norm.pdf(z)
    return m * stats.norm.cdf(z) + dens, -m * stats.norm.cdf(-z) + dens


def panel_gamma(panel: str, n: int) -> np.ndarray:
    """Local-alternative designs: panel ``I`` has ``g* <= 0``, ``II`` has ``g* >= 0``."""
    r = 1.0 / math.sqrt(n)
    if panel == "I":
        return np.array([0.0, -r, -r])
    if panel == "II":
        return np.array([0.0, r, r])
    raise ConfigError(f"unknown panel {panel!r}")


PANEL_NULL = {"I": ("all_leq_zero", "lower"), "II": ("all_geq_zero", "upper")}


def rep_stream(seed: int, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(rep)])


def rep_seed(seed: int, rep: int) -> int:
    """Integer seed for the estimation steps of replication ``rep``."""
    return int(rep_stream(seed, rep).generate_state(1)[0])


@dataclass
class SimDraw:
    """A simulated sample with access to the population functions."""

    table: ObservationTable
    dgp: DgpSpec
    A: np.ndarray

    def g_star(self, x=None, loss="logistic"):
        return self.dgp.g_star(self.table.x if x is None else x, loss)


def draw_dataset(spec: DgpSpec, rep: Optional[int] = None) -> SimDraw:
    """Draw ``spec.n`` rows; ``rep`` selects the stream ``(seed, rep)``."""
    ss = np.random.SeedSequence(spec.seed) if rep is None else rep_stream(spec.seed, rep)
    rng = np.random.default_rng(ss)
    x = spec.sample_x(rng, spec.n)
    A = 2.0 * (rng.random(spec.n) < spec.pi(x)) - 1.0
    u = rng.standard_normal(spec.n)
    y = A * spec.delta(x) + spec.s(x) + u
    table = ObservationTable(y=y, x=x, a=(A + 1.0) / 2.0)
    return SimDraw(table, spec, A)


# -- population values -----------------------------------------------------

def _x1_nodes(log2_points: int, seed: int = 0) -> np.ndarray:
    return qmc.Sobol(d=1, scramble=True, seed=seed).random_base2(log2_points)[:, 0]


def population_value_dgp(spec: DgpSpec, policy: Optional[Callable] = None,
                         log2_points: int = 20) -> float:
    """Population value by quadrature over the covariate law.

    ``X1`` is integrated with ``2**log2_points`` scrambled Sobol nodes and
    ``X2`` by an exact sum over the education levels. ``policy=None``
    gives the optimal value ``E[max(mu1, mu0)] = E[S + |Delta|]``.
    """
    x1 = _x1_nodes(log2_points)
    total = 0.0
    for level, mass in zip(EDUCATION_LEVELS, spec.edu_probs):
        x = np.column_stack([x1, np.full_like(x1, level / EDUCATION_SCALE)])
        mu1, mu0 = spec.mu1(x), spec.mu0(x)
        if policy is None:
            chosen = np.maximum(mu1, mu0)
        else:
            chosen = np.where(np.asarray(policy(x)) >= 0, mu1, mu0)
        total += mass * float(np.mean(chosen))
    return total


def inference_grid(num: int = 201) -> EvalGrid:
    """``x1`` on ``[0.05, 0.95]`` with ``x2`` fixed at ten years of education."""
    return EvalGrid.product(np.linspace(0.05, 0.95, num), [GRID_X2])


# -- experiments -----------------------------------------------------------

@dataclass
class SizeResult:
    n: int
    k: int
    loss: str
    panel: str
    S: int
    B: int
    alpha: float
    non_rejections: list = field(default_factory=list)

    @property
    def frequency(self) -> float:
        return float(np.mean(self.non_rejections)) if self.non_rejections else float("nan")

    def to_dict(self) -> dict:
        return {"n": self.n, "k": self.k, "loss": self.loss, "panel": self.panel,
                "S": self.S, "B": self.B, "alpha": self.alpha,
                "non_rejection_frequency": self.frequency}


def run_size_experiment(n: int = 250, S: int = 200, B: int = 300, k: int = 2,
                        loss: str = "logistic", panel: str = "I", alpha: float = 0.05,
                        seed: int = 0, grid_points: int = 201,
                        settings: Optional[FitSettings] = None) -> SizeResult:
    """Non-rejection frequency of the one-sided uniform sign test.

    The design satisfies the null of ``panel`` so the frequency estimates
    one minus the size.
    """
    settings = settings or FitSettings(loss=loss, k=k)
    null, side = PANEL_NULL[panel]
    dgp = DgpSpec(gamma=panel_gamma(panel, n), n=n, seed=seed)
    grid = inference_grid(grid_points)
    out = SizeResult(n, k, loss, panel, S, B, alpha)
    for rep in range(S):
        draw = draw_dataset(dgp, rep)
        rs = rep_seed(seed, rep)
        fit = fit_policy(draw.table, settings, seed=rs)
        band = build_band(fit.model, fit.full, grid, alpha=alpha, B=B, seed=rs, side=side)
        out.non_rejections.append(not uniform_sign_test(band, null).reject)
    return out


def welfare_replication(dgp: DgpSpec, rep: int, settings: FitSettings, B: int,
                        alpha: float = 0.05, v0: Optional[float] = None) -> dict:
    """One replication of the value experiments.

    Returns plug-in values under the estimated, oracle, treat-everyone
    and random rules, the bootstrap scale of the estimated value and the
    benchmark tests against treat-everyone and random assignment.
    """
    draw = draw_dataset(dgp, rep)
    rs = rep_seed(dgp.seed, rep)
    fit = fit_policy(draw.table, settings, seed=rs, full_sample=False,
                     with_sandwich=False)
    sample = fit.cross
    x = draw.table.x
    g_hat = fit.g_rows()
    g_oracle = dgp.contrast(x)
    everyone = BenchmarkPolicy("everyone")
    random = BenchmarkPolicy("random", p=0.5, seed=rs)
    g_all, g_rand = everyone.evaluate(x), random.evaluate(x)
    report = value_ci(g_hat, sample, alpha=alpha, B=B, seed=rs)
    rec = {
        "rep": rep,
        "n": dgp.n,
        "v_hat": report.v_hat,
        "v_oracle": value_estimate(g_oracle, sample),
        "v_everyone": value_estimate(g_all, sample),
        "v_random": value_estimate(g_rand, sample),
        "sigma_v": report.sigma_v,
        "ci_lo": report.ci[0],
        "ci_hi": report.ci[1],
        "sign_mismatch": float(np.mean((g_hat >= 0) != (g_oracle >= 0))),
    }
    if v0 is not None:
        rec["covered"] = bool(report.ci[0] <= v0 <= report.ci[1])
    for name, g_dag in (("everyone", g_all), ("random", g_rand)):
        res = benchmark_test(g_hat, g_dag, sample, alpha=alpha, B=B, seed=rs, label=name)
        rec[f"{name}_T"] = res.T
        rec[f"{name}_reject_two_sided"] = res.reject_two_sided
        rec[f"{name}_reject_right"] = res.reject_right
        rec[f"{name}_reject_left"] = res.reject_left
    return rec


def run_welfare_experiment(n: int = 500, S: int = 200, B: int = 300, k: int = 2,
                           loss: str = "logistic", gamma=WELFARE_GAMMA,
                           alpha: float = 0.05, seed: int = 0,
                           settings: Optional[FitSettings] = None) -> dict:
    """Replications of :func:`welfare_replication` plus the true optimal value."""
    settings = settings or FitSettings(loss=loss, k=k)
    dgp = DgpSpec(gamma=gamma, n=n, seed=seed)
    v0 = population_value_dgp(dgp)
    records = [welfare_replication(dgp, rep, settings, B, alpha, v0) for rep in range(S)]
    return {"dgp": dgp.to_dict(), "v0": v0, "B": B, "alpha": alpha, "k": settings.k,
            "loss": settings.loss, "records": records}


def rejection_table(welfare: dict) -> dict:
    """Rejection frequencies of the benchmark tests."""
    recs = welfare["records"]
    table = {}
    for name in ("everyone", "random"):
        table[name] = {side: float(np.mean([r[f"{name}_reject_{side}"] for r in recs]))
                       for side in ("two_sided", "right", "left")}
    return table


def run_rejection_experiment(n: int = 500, S: int = 200, B: int = 300, seed: int = 0,
                             **kwargs) -> dict:
    welfare = run_welfare_experiment(n=n, S=S, B=B, seed=seed, **kwargs)
    return {"n": n, "S": S, "B": B, "table": rejection_table(welfare)}


RULES = ("v_hat", "v_oracle", "v_everyone", "v_random")


def normality_diagnostic(welfare: dict) -> dict:
    """Standardized values and KS distance to N(0, 1) for each rule."""
    out = {}
    for rule in RULES:
        v = np.array([r[rule] for r in welfare["records"]])
        z = (v - v.mean()) / v.std()
        ks = stats.kstest(z, "norm")
        out[rule] = {"standardized": z, "ks": float(ks.statistic),
                     "p_value": float(ks.pvalue)}
    z_hat, z_or = out["v_hat"]["standardized"], out["v_oracle"]["standardized"]
    out["estimated_vs_oracle_ks"] = float(stats.ks_2samp(z_hat, z_or).statistic)
    return out


def run_normality_diagnostic(n: int = 500, S: int = 500, B: int = 300, seed: int = 0,
                             **kwargs) -> dict:
    if S < 200:
        raise ConfigError("the normality diagnostic needs at least 200 replications")
    return normality_diagnostic(run_welfare_experiment(n=n, S=S, B=B, seed=seed, **kwargs))


def variance_consistency(welfare: dict) -> dict:
    """Mean bootstrap scale against the Monte Carlo std of ``sqrt(n)(V_hat - V0)``."""
    recs = welfare["records"]
    n = recs[0]["n"]
    scaled = math.sqrt(n) * (np.array([r["v_hat"] for r in recs]) - welfare["v0"])
    mc_std = float(np.std(scaled, ddof=1))
    boot = float(np.mean([r["sigma_v"] for r in recs]))
    return {"mc_std": mc_std, "bootstrap_std": boot,
            "relative_error": abs(boot - mc_std) / mc_std,
            "bias": float(np.mean(scaled) / math.sqrt(n))}


def plugin_closeness(welfare: dict) -> dict:
    """Median of ``sqrt(n)|V(g_hat) - V(g*)|`` relative to the bootstrap scale."""
    recs = welfare["records"]
    n = recs[0]["n"]
    gap = np.array([math.sqrt(n) * abs(r["v_hat"] - r["v_oracle"]) for r in recs])
    sigma = float(np.median([r["sigma_v"] for r in recs]))
    med = float(np.median(gap))
    return {"median_gap": med, "sigma_v": sigma, "ratio": med / sigma}


def sign_recovery(n: int = 5000, k: int = 3, loss: str = "logistic", gamma=(0.0, -1.0, -1.0),
                  seeds: Sequence[int] = range(20), threshold: float = 0.2,
                  grid_points: int = 201) -> list:
    """Share of grid points where ``sign(g_hat)`` matches the oracle sign.

    Only points with ``|contrast| >= threshold`` are scored.
    """
    settings = FitSettings(loss=loss, k=k)
    grid = inference_grid(grid_points).points
    shares = []
    for s in seeds:
        dgp = DgpSpec(gamma=gamma, n=n, seed=s)
        draw = draw_dataset(dgp)
        fit = fit_policy(draw.table, settings, seed=s, full_sample=False,
                         with_sandwich=False)
        contrast = dgp.contrast(grid)
        keep = np.abs(contrast) >= threshold
        g = fit.model.g(grid)
        shares.append(float(np.mean(np.sign(g[keep]) == np.sign(contrast[keep]))))
    return shares
