# %% [markdown]
# # Error-rate diagnostics
#
# The per-level significance halves (for B=2) at each level, and every
# classified region gets an error bound from its sample count, its estimated
# probability and the level significance.  The bounds are reported only.

# %%
from partx import PartXConfig, get_problem, part_x
from partx.core import pac_delta, significance

print([significance(0.05, 2, j) for j in range(1, 6)])
print("delta(p=1, alpha=1, n=10) =", round(pac_delta(1.0, 1.0, 10), 5))
print([round(pac_delta(0.5, 0.0125, n), 3) for n in (10, 20, 50, 100, 200)])

# %%
p = get_problem("goldstein_price")
rep = part_x(p.objective, p.domain, PartXConfig(T=1500, seed=3))
diag = rep.diagnostics
print("events:", len(rep.events))
print("eta+ per level:", {j: round(v, 4) for j, v in diag.eta_plus.items()})
print("eta- per level:", {j: round(v, 4) for j, v in diag.eta_minus.items()})
print("joint bound:", diag.joint_bound, "plus overall:", diag.plus_overall, "minus overall:", diag.minus_overall)
