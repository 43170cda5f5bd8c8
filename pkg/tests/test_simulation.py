import math

import numpy as np
import pytest

from surrogate_policy import simulation as sim
from surrogate_policy.errors import ConfigError
from surrogate_policy.problems import ObservationTable, split_signed, weights_aipw


def test_population_function_examples():
    spec = sim.DgpSpec(gamma=(0.0, 0.0, 0.0))
    x = np.array([[0.5, 0.5]])
    assert spec.pi(x)[0] == 0.5
    assert spec.s(x)[0] == 0.0
    grid = sim.inference_grid(11).points
    np.testing.assert_array_equal(spec.delta(grid), 0.0)
    assert spec.margin_flag(grid)
    assert not sim.DgpSpec().margin_flag(np.array([[0.0, 0.5]]))


def test_dgp_validation():
    with pytest.raises(ConfigError):
        sim.DgpSpec(gamma=(1.0, 2.0))
    with pytest.raises(ConfigError):
        sim.DgpSpec(edu_probs=np.ones(12))
    probs = sim.default_education_probs()
    assert probs.sum() == pytest.approx(1.0) and probs.argmax() == 5  # 12 years


def test_cost_contrast_identity(rng):
    spec = sim.DgpSpec(gamma=(0.4, -1.0, 0.7))
    x = rng.random((50, 2))
    c1, c0 = spec.costs(x)
    assert np.all(c1 >= 0) and np.all(c0 >= 0)
    np.testing.assert_allclose(c0 - c1, 2 * spec.delta(x), atol=1e-12)


def test_costs_match_monte_carlo():
    """Simulate rows at a fixed covariate and average the AIPW cost weights."""
    spec = sim.DgpSpec(gamma=(0.3, -1.0, 0.5))
    rng = np.random.default_rng(12)
    m = 400_000
    for point in ([0.2, 0.4], [0.9, 0.8]):
        x = np.tile(point, (m, 1))
        A = np.where(rng.random(m) < spec.pi(x), 1.0, -1.0)
        y = A * spec.delta(x) + spec.s(x) + rng.standard_normal(m)
        t = ObservationTable(y=y, x=x, a=(A + 1) / 2)
        w = weights_aipw(t, spec.mu1(x), spec.mu0(x), spec.pi(x))
        c1, c0 = spec.costs(np.array([point]))
        se = max(w.psi_plus.std(), w.psi_minus.std()) / math.sqrt(m)
        assert w.psi_plus.mean() == pytest.approx(c1[0], abs=5 * se)
        assert w.psi_minus.mean() == pytest.approx(c0[0], abs=5 * se)


def test_oracle_policy_sign_follows_delta(rng):
    spec = sim.DgpSpec(gamma=(0.2, -1.0, 0.3))
    x = rng.random((200, 2))
    for loss in ("logistic", "exponential", "squared"):
        g = spec.g_star(x, loss)
        clear = np.abs(spec.delta(x)) > 1e-9
        np.testing.assert_array_equal(np.sign(g[clear]), np.sign(spec.delta(x)[clear]))


def test_draw_dataset_reproducible():
    spec = sim.DgpSpec(n=300, seed=4)
    a, b = sim.draw_dataset(spec, 3), sim.draw_dataset(spec, 3)
    for f in ("y", "x", "a"):
        assert np.array_equal(getattr(a.table, f), getattr(b.table, f))
    assert not np.array_equal(sim.draw_dataset(spec, 4).table.y, a.table.y)


def test_draw_dataset_coding_and_support():
    d = sim.draw_dataset(sim.DgpSpec(n=2000, seed=1))
    assert set(np.unique(d.A)) == {-1.0, 1.0}
    np.testing.assert_array_equal(d.table.a, (d.A + 1) / 2)
    levels = np.round(d.table.x[:, 1] * 18).astype(int)
    assert set(levels) <= set(range(7, 19))
    assert np.all((d.table.x[:, 0] >= 0) & (d.table.x[:, 0] <= 1))


def test_treatment_rate_follows_propensity():
    spec = sim.DgpSpec(n=50_000, seed=2)
    d = sim.draw_dataset(spec)
    assert d.table.a.mean() == pytest.approx(spec.pi(d.table.x).mean(), abs=0.01)


def test_quadrature_resolutions_agree():
    spec = sim.DgpSpec()
    coarse = sim.population_value_dgp(spec, log2_points=17)
    fine = sim.population_value_dgp(spec, log2_points=20)
    assert abs(coarse - fine) <= 1e-4


def test_quadrature_matches_plain_monte_carlo():
    spec = sim.DgpSpec()
    x = spec.sample_x(np.random.default_rng(0), 1_000_000)
    mc = np.maximum(spec.mu1(x), spec.mu0(x))
    v0 = sim.population_value_dgp(spec)
    assert v0 == pytest.approx(mc.mean(), abs=4 * mc.std() / 1000)


def test_optimal_value_dominates_fixed_rules():
    spec = sim.DgpSpec()
    v0 = sim.population_value_dgp(spec)
    everyone = sim.population_value_dgp(spec, lambda x: np.ones(len(x)))
    nobody = sim.population_value_dgp(spec, lambda x: -np.ones(len(x)))
    assert v0 > everyone > nobody
    assert sim.population_value_dgp(spec, spec.contrast) == pytest.approx(v0, abs=1e-12)


def test_size_experiment_single_replication():
    res = sim.run_size_experiment(n=120, S=1, B=100, seed=1)
    assert res.frequency in (0.0, 1.0)


def test_rejection_experiment_single_replication():
    out = sim.run_rejection_experiment(n=200, S=1, B=100, seed=2)
    for row in out["table"].values():
        assert set(row.values()) <= {0.0, 1.0}


def test_normality_diagnostic_standardizes():
    rng = np.random.default_rng(1)
    recs = [{r: float(v) for r, v in zip(sim.RULES, rng.standard_normal(4))}
            for _ in range(250)]
    diag = sim.normality_diagnostic({"records": recs})
    for rule in sim.RULES:
        z = diag[rule]["standardized"]
        assert z.mean() == pytest.approx(0, abs=1e-12)
        assert z.std() == pytest.approx(1, abs=1e-12)
        assert 0 <= diag[rule]["ks"] <= 1


def test_normality_diagnostic_needs_replications():
    with pytest.raises(ConfigError):
        sim.run_normality_diagnostic(S=100)


@pytest.fixture(scope="module")
def small_welfare():
    return sim.run_welfare_experiment(n=500, S=12, B=150, seed=5)


def test_welfare_ordering(small_welfare):
    recs = small_welfare["records"]
    assert np.mean([r["v_hat"] for r in recs]) >= np.mean([r["v_random"] for r in recs])


def test_welfare_experiment_reproducible(small_welfare):
    again = sim.run_welfare_experiment(n=500, S=2, B=150, seed=5)
    assert again["records"] == small_welfare["records"][:2]


def test_welfare_summaries(small_welfare):
    vc = sim.variance_consistency(small_welfare)
    pc = sim.plugin_closeness(small_welfare)
    assert vc["mc_std"] > 0 and vc["bootstrap_std"] > 0
    assert pc["ratio"] >= 0
    table = sim.rejection_table(small_welfare)
    assert set(table) == {"everyone", "random"}


def test_sign_recovery_runs():
    shares = sim.sign_recovery(n=1500, seeds=[0], grid_points=41)
    assert len(shares) == 1 and 0 <= shares[0] <= 1
