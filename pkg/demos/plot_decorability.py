"""
Hit probabilities and decorability
==================================

The decorability constant ``C`` gives a lower bound on the probability that
the tree started at ``x`` ever visits ``B``.  On finite models the exact
probability is the minimal fixed point of the generating-function system,
so the bound can be inspected directly.
"""

# %%
from bqp import reference_model
from bqp.decorability import criteria_report, hit_probability_exact

A = reference_model("A")
rep = criteria_report(A, [0])
print(rep.text(A.states))
print("exact hit probabilities:", hit_probability_exact(A, [0]))

# %%
# Summability on a single state
# -----------------------------
# With one state the sums reduce to ``sum_k k m^k``.  This is finite for
# ``m = 0.8`` and diverges at ``m = 1``.
for name in ("C", "B"):
    c = criteria_report(reference_model(name), [0]).criterion("sup-sum")
    print(name, c.verdict, c.value)
