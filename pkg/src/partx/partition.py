"""Partition tree of hyperbox subregions, min/max quantile estimation and classification."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .exceptions import MissingQuantiles, NoBranchableDimension, NotALeaf
from .gp import GaussianProcess, normal_quantile
from .hyperbox import Hyperbox
from .sampling import SampleBatch


class RegionLabel(enum.Enum):
    SATISFYING = "+"
    VIOLATING = "-"
    RECLASSIFIED_PLUS = "r+"
    RECLASSIFIED_MINUS = "r-"
    REMAINING = "r"
    UNCLASSIFIED = "u"

    def __str__(self) -> str:
        return self.value


PLUS, MINUS = RegionLabel.SATISFYING, RegionLabel.VIOLATING
R_PLUS, R_MINUS = RegionLabel.RECLASSIFIED_PLUS, RegionLabel.RECLASSIFIED_MINUS
REMAINING, UNCLASSIFIED = RegionLabel.REMAINING, RegionLabel.UNCLASSIFIED

CLASSIFIED = (PLUS, MINUS)
TO_BRANCH = (REMAINING, R_PLUS, R_MINUS)

# reachable relabelings; r+ and r- leaves leave the tree by branching
TRANSITIONS = {
    REMAINING: {PLUS, MINUS, REMAINING, UNCLASSIFIED},
    PLUS: {PLUS, R_PLUS, UNCLASSIFIED},
    MINUS: {MINUS, R_MINUS, UNCLASSIFIED},
    R_PLUS: {R_PLUS, UNCLASSIFIED},
    R_MINUS: {R_MINUS, UNCLASSIFIED},
    UNCLASSIFIED: {UNCLASSIFIED},
}


@dataclass(frozen=True)
class QuantileEstimate:
    q_max_mean: float
    q_max_var: float
    q_min_mean: float
    q_min_var: float


@dataclass(eq=False)
class Subregion:
    box: Hyperbox
    label: RegionLabel = REMAINING
    level: int = 0
    birth_iteration: int = 0
    samples: Optional[SampleBatch] = None
    model: Optional[GaussianProcess] = None
    quantiles: Optional[QuantileEstimate] = None
    path: tuple = ()
    # closest ancestor surrogate, used when this leaf has none of its own
    parent_model: Optional[GaussianProcess] = field(default=None, repr=False)

    def __post_init__(self):
        if self.samples is None:
            self.samples = SampleBatch.empty(self.box.dim)

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    @property
    def volume(self) -> float:
        return self.box.volume

    @property
    def surrogate(self) -> Optional[GaussianProcess]:
        return self.model if self.model is not None else self.parent_model

    @property
    def name(self) -> str:
        return "root" if not self.path else ".".join(map(str, self.path))


class PartitionTree:
    """Leaves of the partition of ``root`` grouped into one set per label."""

    def __init__(self, root: Hyperbox, samples: Optional[SampleBatch] = None):
        self.root = root
        leaf = Subregion(root, REMAINING, 0, 0, samples)
        self._leaves: dict[tuple, Subregion] = {(): leaf}
        self._sets: dict[RegionLabel, set] = {lab: set() for lab in RegionLabel}
        self._sets[REMAINING].add(())

    @property
    def root_leaf(self) -> Subregion:
        """The leaf covering the whole root; only valid before the first branch."""
        return self._leaves[()]

    @property
    def leaves(self) -> list[Subregion]:
        return [self._leaves[p] for p in sorted(self._leaves)]

    def theta(self, *labels: RegionLabel) -> list[Subregion]:
        """Leaves carrying any of ``labels``, in tree order."""
        paths = set().union(*(self._sets[lab] for lab in labels))
        return [self._leaves[p] for p in sorted(paths)]

    def is_leaf(self, region: Subregion) -> bool:
        return self._leaves.get(region.path) is region

    def volume(self, *labels: RegionLabel) -> float:
        return float(sum(leaf.volume for leaf in self.theta(*labels)))

    def relabel(self, region: Subregion, label: RegionLabel) -> None:
        if not self.is_leaf(region):
            raise NotALeaf(region.name)
        if label not in TRANSITIONS[region.label]:
            raise ValueError(f"illegal relabel {region.label} -> {label} for {region.name}")
        self._sets[region.label].discard(region.path)
        region.label = label
        self._sets[label].add(region.path)

    def replace(self, region: Subregion, children: Iterable[Subregion]) -> None:
        """Swap a leaf for its children."""
        if not self.is_leaf(region):
            raise NotALeaf(region.name)
        del self._leaves[region.path]
        self._sets[region.label].discard(region.path)
        for child in children:
            self._leaves[child.path] = child
            self._sets[child.label].add(child.path)

    def check(self, rtol: float = 1e-9) -> None:
        """Raise AssertionError unless the leaves tile the root exactly."""
        leaves = self.leaves
        total = sum(leaf.volume for leaf in leaves)
        assert abs(total - self.root.volume) <= rtol * self.root.volume, (total, self.root.volume)
        labelled = sum(len(s) for s in self._sets.values())
        assert labelled == len(leaves)
        for leaf in leaves:
            assert leaf.path in self._sets[leaf.label]
            assert np.all(leaf.box.lower >= self.root.lower) and np.all(leaf.box.upper <= self.root.upper)
        # interior-disjointness: overlap volume of every pair is zero
        lo = np.array([leaf.box.lower for leaf in leaves])
        hi = np.array([leaf.box.upper for leaf in leaves])
        for i in range(len(leaves)):
            side = np.minimum(hi[i], hi[i + 1:]) - np.maximum(lo[i], lo[i + 1:])
            overlap = np.prod(np.clip(side, 0.0, None), axis=1)
            assert np.all(overlap <= rtol * self.root.volume), leaves[i].name


def tree_update(tree: PartitionTree, region: Subregion, new_label: RegionLabel) -> PartitionTree:
    tree.relabel(region, new_label)
    return tree


def branchable_dims(box: Hyperbox, B: int, delta_v: float, root_extents) -> np.ndarray:
    """Dimensions whose cut into ``B`` pieces keeps every side above ``delta_v`` of the root."""
    rel = box.extents / np.asarray(root_extents, dtype=float)
    return np.flatnonzero(rel > delta_v * B)


def branch(region: Subregion, B: int, delta_v: float, root_extents, rng: np.random.Generator,
           iteration: Optional[int] = None) -> list[Subregion]:
    """Cut ``region`` into ``B`` equal boxes along a random branchable dimension.

    Children are labelled remaining, inherit the parent's samples they
    contain (points on a shared face go to the lower child) and carry the
    parent's surrogate as a fallback.
    """
    if B < 2:
        raise ValueError("B must be >= 2")
    dims = branchable_dims(region.box, B, delta_v, root_extents)
    if dims.size == 0:
        raise NoBranchableDimension(region.name)
    dim = int(dims[rng.integers(dims.size)])
    boxes = region.box.split(dim, B)
    born = region.birth_iteration if iteration is None else iteration
    fallback = region.surrogate

    pts = region.samples.points
    cut = pts[:, dim]
    taken = np.zeros(len(region.samples), dtype=bool)
    children = []
    for i, box in enumerate(boxes):
        mask = ~taken & (cut >= box.lower[dim]) & (cut <= box.upper[dim])
        taken |= mask
        children.append(Subregion(box, REMAINING, region.level + 1, born, region.samples.subset(mask),
                                  path=region.path + (i,), parent_model=fallback))
    return children


def mc_step(region, model: GaussianProcess, R: int, M: int, delta_c: float,
            rng: np.random.Generator) -> QuantileEstimate:
    """Replicated Monte-Carlo estimate of the min and max predictive bounds over a box.

    Each of ``R`` replicates draws ``M`` uniform points and records the max of
    ``mean + z*sd`` and the min of ``mean - z*sd`` with ``z = z(1 - delta_c/2)``.
    Returns replicate means and the variance of those means.
    """
    if R < 2 or M < 1:
        raise ValueError("need R >= 2 and M >= 1")
    box = region.box if isinstance(region, Subregion) else region
    z = normal_quantile(1.0 - delta_c / 2.0)
    x = box.uniform(R * M, rng)
    mean, var = model.predict_many(x)
    sd = np.sqrt(var)
    upper = (mean + z * sd).reshape(R, M).max(axis=1)
    lower = (mean - z * sd).reshape(R, M).min(axis=1)
    return QuantileEstimate(
        q_max_mean=float(upper.mean()),
        q_max_var=float(upper.var(ddof=1) / R),
        q_min_mean=float(lower.mean()),
        q_min_var=float(lower.var(ddof=1) / R),
    )


def classify(region: Subregion, quantiles: Optional[QuantileEstimate], delta_c: float,
             delta_v: float, root_extents) -> RegionLabel:
    """Next label for ``region`` given its quantile estimate.

    Bounds are ``Q_max + z*sqrt(Var)`` and ``Q_min - z*sqrt(Var)`` with
    ``z = z(1 - delta_c/2)``.
    """
    floor = float(np.prod(delta_v * np.asarray(root_extents, dtype=float)))
    if region.volume <= floor:
        return UNCLASSIFIED
    if quantiles is None:
        raise MissingQuantiles(region.name)
    z = normal_quantile(1.0 - delta_c / 2.0)
    upper = quantiles.q_max_mean + z * np.sqrt(quantiles.q_max_var)
    lower = quantiles.q_min_mean - z * np.sqrt(quantiles.q_min_var)
    label = region.label
    if label is PLUS:
        return R_PLUS if lower <= 0 else PLUS
    if label is MINUS:
        return R_MINUS if upper >= 0 else MINUS
    if label is REMAINING:
        if upper < 0:
            return MINUS
        if lower > 0:
            return PLUS
        return REMAINING
    return label


LEAF_COLUMNS = ("lower", "upper", "label", "level", "birth_iteration", "n_samples", "q_min_mean", "q_max_mean")


def leaf_records(tree: PartitionTree) -> list[dict]:
    """One flat record per leaf, in tree order."""
    out = []
    for leaf in tree.leaves:
        q = leaf.quantiles
        out.append({
            "path": leaf.name,
            "lower": leaf.box.lower.tolist(),
            "upper": leaf.box.upper.tolist(),
            "label": leaf.label.value,
            "level": leaf.level,
            "birth_iteration": leaf.birth_iteration,
            "n_samples": leaf.n_samples,
            "q_min_mean": None if q is None else q.q_min_mean,
            "q_max_mean": None if q is None else q.q_max_mean,
        })
    return out
