"""
Branching interlacements
========================

At level ``u`` the trees that hit ``B`` form a Poisson process.  Their
entrance individuals are distributed as ``u`` times the entrance measure,
and the progeny of the entrance individuals has mean occupation
``u mu_B G``.
"""

# %%
# One realisation
# ---------------
from bqp import reference_model
from bqp.interlacement import InterlacementSampler, progeny_occupation_check
from bqp.rng import stream

A = reference_model("A")
nu = A.G[0]
sampler = InterlacementSampler(nu, A, [0])
sample = sampler.sample(2.0, stream(0, 0))
print(f"{sample.n_paths} paths hit B, {len(sample.trees)} trees kept")
print("decorability constant:", sample.advisory["C"])

# %%
# Occupation of the entrance progeny
# ----------------------------------
# Averaged over many independent replicas the empirical occupation is
# close to ``mu_B G``.  For a Green row that is the row itself.
samples = [sampler.sample(1.0, stream(1, k)) for k in range(2000)]
report, target, empirical, z = progeny_occupation_check(samples, A, [0], threshold=4.0)
print("target   ", target)
print("empirical", empirical)
print(report.line())
