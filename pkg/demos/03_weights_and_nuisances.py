"""
Cost weights and cross-fitted nuisances
=======================================

Three problems feed the same estimator through per-row cost weights:
maximum score, expected utility and welfare maximization with doubly
robust (AIPW) weights built from cross-fitted nuisances.
"""

# %%
import numpy as np

from surrogate_policy import (ObservationTable, fit_nuisance, make_folds, weights_aipw,
                              weights_max_score, weights_utility)
from surrogate_policy import simulation as sim

# %% [markdown]
# Maximum score: the cost of a positive call is ``1 - y``.

# %%
t = ObservationTable(y=[1, 0, 1], x=[[0.1], [0.5], [0.9]])
w = weights_max_score(t)
print(w.psi_plus, w.psi_minus)

# %% [markdown]
# Expected utility with gain ``b`` and threshold ``c`` takes outcomes
# coded -1/1.

# %%
w = weights_utility(ObservationTable(y=[1, -1, 1], x=t.x), b=1.0, c=0.3)
print(w.psi_plus, w.psi_minus)

# %% [markdown]
# Welfare: nuisances ``mu(1, x)``, ``mu(0, x)`` and ``pi(x)`` come from
# Lasso and l1-logistic fits on a Legendre expansion, with penalties
# picked by five-fold cross-validation. Each fold's rows are predicted by
# models trained on the other folds.

# %%
draw = sim.draw_dataset(sim.DgpSpec(n=1000, seed=1))
folds = make_folds(draw.table.n, 2, seed=0)
nuis = fit_nuisance(draw.table, folds, "crossfit", k=3, seed=0)
mu1, mu0, pi = nuis.predict_rows(draw.table.x)
x = draw.table.x
print("RMSE mu1:", np.sqrt(np.mean((mu1 - draw.dgp.mu1(x)) ** 2)).round(3))
print("RMSE pi: ", np.sqrt(np.mean((pi - draw.dgp.pi(x)) ** 2)).round(3))

# %%
w = weights_aipw(draw.table, mu1, mu0, pi)
print("AIPW contrast mean:", np.mean(w.psi1 - w.psi0).round(3),
      " true:", np.mean(draw.dgp.contrast(x)).round(3))
print("row identity holds:", np.allclose(w.psi_plus - w.psi_minus, -(w.psi1 - w.psi0)))
