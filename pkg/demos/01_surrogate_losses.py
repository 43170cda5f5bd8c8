"""
Surrogate losses and their pointwise minimizers
===============================================

A cost-sensitive classifier pays ``c1`` for a positive call and ``c0``
for a negative one. Replacing the 0-1 loss by a smooth convex margin
loss keeps the sign of the optimal rule while giving it a closed form.
"""

# %%
import numpy as np

from surrogate_policy import SurrogateLoss, eval_loss, pointwise_surrogate_argmin
from surrogate_policy.oracle import golden_section_argmin

# %% [markdown]
# Each loss exposes its value and first two derivatives.

# %%
for kind in ("logistic", "exponential", "squared"):
    print(kind, eval_loss(kind, 0.5))

# %% [markdown]
# The minimizer of ``c1 phi(-g) + c0 phi(g)`` has the sign of ``c0 - c1``
# for every loss; only its magnitude differs.

# %%
costs = [(1.0, 3.0), (2.0, 0.5), (1.0, 1.0), (0.0, 1.0)]
print(f"{'c1':>5} {'c0':>5} {'logistic':>10} {'exponential':>12} {'squared':>9}")
for c1, c0 in costs:
    row = [pointwise_surrogate_argmin(k, c1, c0) for k in ("logistic", "exponential", "squared")]
    print(f"{c1:5.1f} {c0:5.1f} {row[0]:10.4f} {row[1]:12.4f} {row[2]:9.4f}")

# %% [markdown]
# A zero cost pushes the exponential-family minimizers to the cap of 30;
# the squared loss stays at +-1. A brute-force golden-section search on
# the derivative agrees with the closed forms.

# %%
rng = np.random.default_rng(0)
worst = 0.0
for _ in range(200):
    c1, c0 = np.exp(rng.uniform(-2, 2, 2))
    for kind in ("logistic", "exponential", "squared"):
        gap = abs(pointwise_surrogate_argmin(kind, c1, c0) - golden_section_argmin(kind, c1, c0))
        worst = max(worst, gap)
print("largest closed-form vs search gap:", worst)

# %%
phi = SurrogateLoss("logistic")
g = np.linspace(-3, 3, 7)
print("logistic risk on a grid (c1=1, c0=3):", np.round(phi.value(-g) + 3 * phi.value(g), 3))
