"""
Potential theory on a three-state model
=======================================

The reference model ``A`` walks on ``0 - 1 - 2`` and every individual has
zero or two children with mean ``0.8``.  Everything on this page is exact
linear algebra: no sampling is involved.
"""

# %%
# The intensity operator and its Green function
# ---------------------------------------------
# ``Q = m p`` is sub-Markovian here, so ``G = (I - Q)^{-1}`` is finite.
import numpy as np

from bqp import reference_model
from bqp.potential import entrance_measure, riesz_decomposition, taboo_return_kernel

A = reference_model("A")
print("Q =\n", A.Q)
print("9 G =\n", np.round(9 * A.G, 12))

# %%
# Expected number of entrance individuals
# ---------------------------------------
# With ``B = {0}``, ``h(x)`` is the expected number of individuals that enter
# ``B`` before any of their ancestors did.
from bqp.model import normed_model

nm = normed_model(A, [0])
print("h =", nm.h, " 17 h =", np.round(17 * nm.h, 12))

# %%
# Returning to B and the entrance measure
# ---------------------------------------
# The first-return kernel on ``{0}`` equals 8/17.  The entrance measure of
# the Green row ``g(1, .)`` then has mass ``g(1,0) (1 - 8/17) = 10/17``.
print("Q^B =", taboo_return_kernel(A, [0]))
print("entrance of g(1,.) =", entrance_measure(A.G[1], A, [0]))

# %%
# Riesz decomposition
# -------------------
# A sum of Green rows is a pure potential: the charges come back out and
# the invariant part vanishes.
rp = riesz_decomposition(A.G[0] + 3 * A.G[2], A)
print("charge =", np.round(rp.pot, 12), " invariant =", rp.inv)
