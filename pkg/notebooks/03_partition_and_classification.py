# %% [markdown]
# # Branching, min/max quantiles and classification
#
# Build a partition by hand: branch the unit square, fit a GP on each child,
# estimate the min and max predictive bounds with replicated Monte Carlo and
# run the classifier.

# %%
import numpy as np

from partx import gp as gplib
from partx.hyperbox import Hyperbox
from partx.partition import PartitionTree, RegionLabel, branch, classify, mc_step
from partx.sampling import SampleBatch, latin_hypercube


def f(x):
    return float(x[0] + 0.2 * np.sin(6 * x[1]) - 0.3)


root = Hyperbox([0.0, 0.0], [1.0, 1.0])
tree = PartitionTree(root)
rng = np.random.default_rng(0)

for level in range(3):
    for leaf in tree.theta(RegionLabel.REMAINING):
        kids = branch(leaf, 2, 0.001, root.extents, rng, iteration=level + 1)
        tree.replace(leaf, kids)
    for leaf in tree.theta(RegionLabel.REMAINING):
        pts = latin_hypercube(leaf.box, 12, rng)
        leaf.samples = leaf.samples.extend(pts, [f(p) for p in pts])
        leaf.model = gplib.fit(leaf.samples.points, leaf.samples.values, box=leaf.box)
        leaf.quantiles = mc_step(leaf, leaf.model, 10, 100, 0.05, rng)
        tree.relabel(leaf, classify(leaf, leaf.quantiles, 0.05, 0.001, root.extents))

tree.check()
for leaf in tree.leaves:
    q = leaf.quantiles
    print(f"{leaf.name:8s} {leaf.label.value:2s} lower={leaf.box.lower} upper={leaf.box.upper} "
          f"q_min={q.q_min_mean:+.3f} q_max={q.q_max_mean:+.3f}")
print({lab.value: round(tree.volume(lab), 4) for lab in RegionLabel})
