# %% [markdown]
# # Expected-improvement sampling inside one box
#
# `sample_bo` tops a box up to `n0` points with a Latin hypercube and then adds
# `n_bo` points that maximise expected improvement.  Here it runs on a small box
# around one of the Himmelblau minima.

# %%
import numpy as np

from partx.bench import himmelblau_shifted
from partx.hyperbox import Hyperbox
from partx.sampling import expected_improvement, latin_hypercube, proportional_allocation, sample_bo

box = Hyperbox([2.0, 1.0], [4.0, 3.0])
rng = np.random.default_rng(1)

design = latin_hypercube(box, 10, np.random.default_rng(2))
strata = np.floor(box.to_unit(design) * 10).astype(int)
print("LHS strata per axis:", sorted(strata[:, 0]), sorted(strata[:, 1]))

# %%
res = sample_bo(box, himmelblau_shifted, None, n0=10, n_bo=10, rng=rng)
print("evaluations:", res.evaluations)
print("best of the LHS points:", res.samples.values[:10].min().round(3))
print("best after EI steps:   ", round(res.best_value, 3), "at", res.best_point.round(3))

# %%
probe = box.uniform(5, np.random.default_rng(3))
print("EI at random points:", expected_improvement(res.model, probe, res.best_value))

# %% [markdown]
# Budget shares for classified regions come from largest-remainder rounding.

# %%
print(proportional_allocation([0.7, 0.2, 0.1], 100))
print(proportional_allocation([1, 1, 1], 4))
