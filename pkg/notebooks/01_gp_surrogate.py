# %% [markdown]
# # Kriging surrogate
#
# Fit an ordinary-kriging GP to a handful of noiseless samples, look at the
# predictive mean, variance and quantiles, and check that it interpolates.

# %%
import numpy as np

from partx import gp as gplib
from partx.hyperbox import Hyperbox

rng = np.random.default_rng(0)
box = Hyperbox([0.0], [1.0])
x = np.sort(rng.uniform(0, 1, 8)).reshape(-1, 1)
y = np.sin(6 * x[:, 0]) + 0.3 * x[:, 0]

model = gplib.fit(x, y, box=box)
print("theta", model.theta, "mu", round(model.mu, 4), "tau2", round(model.tau2, 4), "jitter", model.jitter)

# %% [markdown]
# At the data the mean reproduces the observations and the variance collapses.

# %%
mean, var = model.predict_many(x)
print("max |mean - y| at data:", np.abs(mean - y).max())
print("max variance at data:  ", var.max())

# %%
grid = np.linspace(0, 1, 11).reshape(-1, 1)
mean, var = model.predict_many(grid)
lo, hi = model.quantile(grid, 0.025), model.quantile(grid, 0.975)
for g, m, a, b in zip(grid[:, 0], mean, lo, hi):
    print(f"x={g:.1f}  mean={m:+.3f}  95% band=[{a:+.3f}, {b:+.3f}]")

# %% [markdown]
# Far from every sample the prediction falls back to the process mean.

# %%
print(model.predict([50.0]), "mu =", model.mu)
