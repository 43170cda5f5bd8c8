"""
Optimal value and benchmark comparisons
=======================================

Plug-in value of the fitted policy with a bootstrap confidence interval,
and tests against treating everyone and random assignment.
"""

# %%
import numpy as np

from surrogate_policy import BenchmarkPolicy, FitSettings, benchmark_test, fit_policy, value_ci
from surrogate_policy import simulation as sim

dgp = sim.DgpSpec(n=1000, seed=5)
draw = sim.draw_dataset(dgp)
fit = fit_policy(draw.table, FitSettings(k=2), seed=0, full_sample=False,
                 with_sandwich=False)
g = fit.g_rows()

# %%
report = value_ci(g, fit.cross, alpha=0.05, B=1000, seed=0)
v0 = sim.population_value_dgp(dgp)
print(f"V_hat = {report.v_hat:.3f}  CI = ({report.ci[0]:.3f}, {report.ci[1]:.3f})  "
      f"true optimum = {v0:.3f}")
print(f"one-sided lower bound = {report.lower_bound:.3f}")

# %% [markdown]
# ``T = sqrt(n) (V(g_hat) - V(g_dagger))`` with p-values from the
# bootstrap of the difference scores.

# %%
for bench in (BenchmarkPolicy("everyone"), BenchmarkPolicy("random", p=0.5, seed=0)):
    res = benchmark_test(g, bench.evaluate(draw.table.x), fit.cross, B=1000, seed=0,
                         label=bench.label)
    print(f"{res.benchmark:13s} T={res.T:6.2f}  p two={res.p_two_sided:.3f} "
          f"right={res.p_right:.3f} left={res.p_left:.3f}")

# %%
share = np.mean(g >= 0)
print(f"fitted rule treats {share:.0%} of the sample")
