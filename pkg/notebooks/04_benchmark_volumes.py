# %% [markdown]
# # Falsification volumes on the benchmark functions
#
# One Part-X run per benchmark at the default settings (n0=10, n_bo=10,
# n_c=100, T=5000, R=10, M=100, B=2).  Each run takes tens of seconds.  The
# uniform Monte-Carlo oracle gives the reference negative volume.

# %%
import time

import numpy as np

from partx import PartXConfig, get_problem, mc_volume_oracle, part_x

for name in ("rosenbrock", "goldstein_price", "himmelblau"):
    p = get_problem(name)
    est, se = mc_volume_oracle(p, 150_000, np.random.default_rng(0))
    t0 = time.time()
    rep = part_x(p.objective, p.domain, PartXConfig(seed=0))
    q = rep.volume.gp_quantile_volume
    print(f"{name:16s} oracle {est:7.3f} +- {se:.3f} | quantile volumes "
          f"{q[0.5]:7.3f} {q[0.95]:7.3f} {q[0.99]:7.3f} | hyperbox {rep.volume.hyperbox_volume:7.3f} "
          f"| best {rep.best_value:8.3f} | {time.time() - t0:5.1f}s")

# %% [markdown]
# The per-iteration ledger shows how the budget went.

# %%
for rec in rep.ledger:
    print(rec.iteration, rec.phase, rec.evaluations, rec.leaves)
