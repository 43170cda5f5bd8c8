import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from surrogate_policy import simulation as sim
from surrogate_policy.bands import (EvalGrid, PolicyBand, bootstrap_t_draw, bootstrap_t_draws,
                                    build_band, critical_value, draw_multipliers,
                                    uniform_sign_test)
from surrogate_policy.basis import BasisSpec, eval_basis
from surrogate_policy.errors import (ConfigError, DegenerateVarianceError, DomainError,
                                     UsageError)
from surrogate_policy.pipeline import FitSettings, fit_policy
from surrogate_policy.policy import aggregate, fit_crossfit, policy_scores, sandwich
from surrogate_policy.problems import WeightedSample


@pytest.fixture(scope="module")
def fitted():
    rng = np.random.default_rng(7)
    n = 300
    x = rng.random((n, 1))
    spec = BasisSpec(3, 1)
    P = eval_basis(spec, x)
    wp = rng.exponential(size=n) * (1 + x[:, 0])
    wm = rng.exponential(size=n) * (2 - x[:, 0])
    s = WeightedSample(psi_plus=wp, psi_minus=wm, basis=P, fold=np.arange(n) % 2)
    m = fit_crossfit(s, spec, "logistic")
    sandwich(m, s)
    return m, s, EvalGrid(np.linspace(0.05, 0.95, 31))


# -- single draws -----------------------------------------------------------

def test_zero_multipliers(fitted):
    m, s, grid = fitted
    np.testing.assert_array_equal(bootstrap_t_draw(m, s, grid, np.zeros(s.n)), 0.0)


def test_single_row_scalar_formula():
    spec = BasisSpec(1, 1)
    m = aggregate([np.array([0.3])], spec, "logistic")
    s = WeightedSample(psi_plus=np.array([2.0]), psi_minus=np.array([0.5]), basis=np.ones((1, 1)))
    m.Q, m.Sigma = np.array([[1.7]]), np.array([[0.9]])
    score = policy_scores(m, s)[0]
    t = bootstrap_t_draw(m, s, EvalGrid([0.5]), np.array([1.0]))
    assert t[0] == pytest.approx(score / math.sqrt(0.9), rel=1e-12)


def test_negated_multipliers(fitted, rng):
    m, s, grid = fitted
    w = rng.standard_normal(s.n)
    np.testing.assert_array_equal(bootstrap_t_draw(m, s, grid, -w),
                                  -bootstrap_t_draw(m, s, grid, w))


def test_batched_equals_single_draws(fitted):
    m, s, grid = fitted
    omega = draw_multipliers(s.n, 4, seed=1)
    batch = bootstrap_t_draws(m, s, grid, omega)
    for b in range(4):
        np.testing.assert_allclose(batch[b], bootstrap_t_draw(m, s, grid, omega[b]), atol=1e-12)


def test_draws_need_matching_length(fitted):
    m, s, grid = fitted
    with pytest.raises(DomainError):
        bootstrap_t_draw(m, s, grid, np.zeros(s.n + 1))


def test_missing_sandwich_is_usage_error(fitted):
    m, s, grid = fitted
    bare = aggregate([m.beta_bar], m.spec, "logistic")
    with pytest.raises(UsageError):
        bootstrap_t_draw(bare, s, grid, np.zeros(s.n))


def test_zero_sigma_is_degenerate(fitted):
    m, s, grid = fitted
    bare = aggregate([m.beta_bar], m.spec, "logistic")
    bare.Q, bare.Sigma = m.Q, np.zeros_like(m.Sigma)
    with pytest.raises(DegenerateVarianceError):
        build_band(bare, s, grid, B=100)


def test_multiplier_streams_are_per_draw():
    a = draw_multipliers(10, 5, seed=3)
    b = draw_multipliers(10, 8, seed=3)
    np.testing.assert_array_equal(a, b[:5])


# -- critical values --------------------------------------------------------

def test_critical_value_order_statistic():
    assert critical_value(np.arange(1, 101), 0.05, "two_sided") == 95


@given(st.floats(-5, 5), st.floats(0.01, 0.99), st.sampled_from(["two_sided", "lower", "upper"]))
def test_constant_draws(c, alpha, side):
    expect = abs(c) if side == "two_sided" else c
    assert critical_value(np.full(120, c), alpha, side) == expect


def test_upper_median_of_infima():
    draws = np.concatenate([np.arange(-50, 0), np.arange(1, 51)]).astype(float)
    assert critical_value(draws, 0.5, "upper") == -1.0


def test_critical_value_sides_on_processes(rng):
    draws = rng.standard_normal((400, 6))
    assert critical_value(draws, 0.1, "two_sided") >= critical_value(draws, 0.1, "lower")
    assert critical_value(draws, 0.1, "upper") < 0 < critical_value(draws, 0.1, "lower")


def test_critical_value_empty():
    with pytest.raises(DomainError):
        critical_value([], 0.05, "two_sided")


# -- bands ------------------------------------------------------------------

def test_band_shape_and_invariants(fitted):
    m, s, grid = fitted
    band = build_band(m, s, grid, B=300, seed=2)
    assert band.cv >= 0
    assert np.all(band.lo <= band.g_hat) and np.all(band.g_hat <= band.hi)
    np.testing.assert_allclose(band.hi - band.lo, 2 * band.cv * band.sigma_hat / math.sqrt(s.n))
    d = band.to_dict()
    assert len(d["points"]) == len(grid) and d["B"] == 300


def test_band_deterministic(fitted):
    m, s, grid = fitted
    a = build_band(m, s, grid, B=200, seed=5)
    b = build_band(m, s, grid, B=200, seed=5)
    assert a.cv == b.cv and np.array_equal(a.lo, b.lo)


def test_one_sided_band_formulas(fitted):
    m, s, grid = fitted
    lower = build_band(m, s, grid, B=300, seed=1, side="lower")
    upper = build_band(m, s, grid, B=300, seed=1, side="upper")
    assert np.all(np.isinf(lower.hi)) and np.all(np.isinf(upper.lo))
    np.testing.assert_allclose(lower.lo, lower.g_hat - lower.cv * lower.se)
    np.testing.assert_allclose(upper.hi, upper.g_hat - upper.cv * upper.se)
    assert upper.cv < 0 < lower.cv


def test_critical_value_stabilizes(fitted):
    m, s, grid = fitted
    # per-draw streams: the larger run extends the smaller one
    cv1 = build_band(m, s, grid, B=1000, seed=11).cv
    cv2 = build_band(m, s, grid, B=2000, seed=11).cv
    assert abs(cv1 - cv2) <= 0.05


def test_doubling_weights_gives_same_band(fitted):
    m, s, grid = fitted
    s2 = s.scaled(2.0)
    m2 = fit_crossfit(s2, m.spec, "logistic")
    sandwich(m2, s2)
    a = build_band(m, s, grid, B=300, seed=4)
    b = build_band(m2, s2, grid, B=300, seed=4)
    # equal up to the Newton stopping tolerance
    np.testing.assert_allclose(b.g_hat, a.g_hat, atol=1e-8)
    np.testing.assert_allclose(b.lo, a.lo, atol=1e-8)
    np.testing.assert_allclose(b.hi, a.hi, atol=1e-8)
    assert b.cv == pytest.approx(a.cv, abs=1e-8)


def test_conditional_centering(fitted):
    m, s, grid = fitted
    B = 2000
    draws = bootstrap_t_draws(m, s, grid, draw_multipliers(s.n, B, seed=9))
    assert np.all(np.abs(draws.mean(axis=0)) <= 3 / math.sqrt(B) * draws.std(axis=0))


def test_nesting_across_levels(fitted):
    m, s, grid = fitted
    wide = build_band(m, s, grid, alpha=0.01, B=500, seed=3)
    narrow = build_band(m, s, grid, alpha=0.05, B=500, seed=3)
    assert np.all(wide.lo <= narrow.lo) and np.all(wide.hi >= narrow.hi)


@pytest.mark.parametrize("kw", [{"B": 99}, {"alpha": 0.0}, {"alpha": 1.0}, {"side": "both"}])
def test_band_config_errors(fitted, kw):
    m, s, grid = fitted
    with pytest.raises(ConfigError):
        build_band(m, s, grid, **kw)


# -- sign tests -------------------------------------------------------------

def toy_band(lo, hi, side):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    g = EvalGrid(np.linspace(0.1, 0.9, len(lo)))
    z = np.zeros(len(lo))
    return PolicyBand(g, z, z + 1, z + 1, lo, hi, 1.0, side, 0.05, 100, 0, 10)


def test_sign_test_examples():
    inf = np.inf
    r = uniform_sign_test(toy_band([-1, -0.5, 0.0], [inf] * 3, "lower"), "all_leq_zero")
    assert r.verdict == "fail_to_reject" and len(r.witnesses) == 0
    r = uniform_sign_test(toy_band([-1, 0.2, -0.1], [inf] * 3, "lower"), "all_leq_zero")
    assert r.reject
    np.testing.assert_allclose(r.witnesses, [[0.5]])
    r = uniform_sign_test(toy_band([-inf] * 3, [0.3, -0.01, 0.1], "upper"), "all_geq_zero")
    assert r.reject and r.statistic == -0.01


@pytest.mark.parametrize("side, null", [("two_sided", "all_leq_zero"),
                                        ("upper", "all_leq_zero"),
                                        ("lower", "all_geq_zero"), ("lower", "nonsense")])
def test_sign_test_usage_errors(side, null):
    with pytest.raises(UsageError):
        uniform_sign_test(toy_band([0, 0], [1, 1], side), null)


# -- grids ------------------------------------------------------------------

def test_grid_parse():
    g = EvalGrid.parse("0.05:0.95:5,0.5556", 2)
    assert g.points.shape == (5, 2)
    np.testing.assert_allclose(g.points[:, 0], np.linspace(0.05, 0.95, 5))
    assert np.all(g.points[:, 1] == 0.5556)
    assert len(EvalGrid.parse("0:1", 1)) == 201


@pytest.mark.parametrize("text, d", [("0:1", 2), ("a:b", 1), ("0:2", 1)])
def test_grid_parse_errors(text, d):
    with pytest.raises(ConfigError):
        EvalGrid.parse(text, d)


# -- Monte Carlo coverage -----------------------------------------------------

@pytest.mark.slow
def test_two_sided_band_covers_oracle():
    n, S, B = 250, 200, 300
    dgp = sim.DgpSpec(gamma=sim.panel_gamma("I", n), n=n, seed=31)
    grid = sim.inference_grid(51)
    target = dgp.g_star(grid.points, "logistic")
    settings = FitSettings(k=2)
    covered = 0
    for rep in range(S):
        draw = sim.draw_dataset(dgp, rep)
        fit = fit_policy(draw.table, settings, seed=sim.rep_seed(31, rep))
        band = build_band(fit.model, fit.full, grid, B=B, seed=rep)
        covered += bool(np.all((band.lo <= target) & (target <= band.hi)))
    assert covered / S >= 0.90
