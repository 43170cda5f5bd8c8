"""
Tensor Legendre sieve
=====================

Policies are linear in a tensor product of shifted, orthonormal
Legendre polynomials on the unit cube.
"""

# %%
import warnings

import numpy as np
from numpy.polynomial.legendre import leggauss

from surrogate_policy import BasisSpec, eval_basis
from surrogate_policy.basis import RateConditionWarning, check_sieve_growth, complexity_xi

# %% [markdown]
# ``k`` functions per covariate give ``k**d`` terms, ordered
# lexicographically by their degree multi-index.

# %%
spec = BasisSpec(3, 2)
print(spec.total_terms, spec.multi_indices[:4])
print(eval_basis(spec, [[0.2, 0.7]]).round(4))

# %% [markdown]
# Orthonormality under the uniform measure, checked by Gauss-Legendre
# quadrature.

# %%
nodes, weights = leggauss(10)
nodes, weights = (nodes + 1) / 2, weights / 2
mesh = np.meshgrid(nodes, nodes, indexing="ij")
pts = np.column_stack([m.ravel() for m in mesh])
w = np.outer(weights, weights).ravel()
P = eval_basis(spec, pts)
print("max |Gram - I| =", np.abs((P.T * w) @ P - np.eye(9)).max())

# %% [markdown]
# Points outside ``[0, 1]`` are clamped and counted. The growth check
# asks that ``K**4`` stay below ``n``, up to a small exponent slack.

# %%
eval_basis(spec, [[1.2, -0.1]])
print("clamped coordinates:", spec.n_clamped)
print("xi =", complexity_xi(spec))
with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always", RateConditionWarning)
    print("K=4, n=500 ok?", check_sieve_growth(BasisSpec(2, 2), 500))
    print("K=9, n=500 ok?", check_sieve_growth(BasisSpec(3, 2), 500), len(caught), "warning(s)")
