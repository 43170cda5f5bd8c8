"""
Monte Carlo experiments at small scale
======================================

The drivers behind the size, rejection, normality, variance and
closeness tables. The replication counts here are tiny so the script
finishes in about a minute; the command line runs desk or full scale.
"""

# %%
from surrogate_policy import simulation as sim

size = sim.run_size_experiment(n=250, S=20, B=300, panel="I", seed=0)
print(f"panel I non-rejection over {size.S} replications: {size.frequency:.2f}")

# %%
welfare = sim.run_welfare_experiment(n=500, S=40, B=300, seed=0)
print("rejection table:", sim.rejection_table(welfare))
print("variance check:", {k: round(v, 3) for k, v in sim.variance_consistency(welfare).items()})
print("plug-in closeness:", {k: round(v, 3) for k, v in sim.plugin_closeness(welfare).items()})

# %% [markdown]
# The normality diagnostic needs at least 200 replications; with 40 we
# can still look at the standardized values by hand.

# %%
import numpy as np
from scipy import stats

v = np.array([r["v_hat"] for r in welfare["records"]])
z = (v - v.mean()) / v.std()
print("KS vs N(0,1) with 40 replications:", round(stats.kstest(z, "norm").statistic, 3))
