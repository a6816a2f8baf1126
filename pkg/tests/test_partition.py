import numpy as np
import pytest
from scipy.special import ndtri

from partx import gp as gplib
from partx.exceptions import MissingQuantiles, NoBranchableDimension, NotALeaf
from partx.hyperbox import Hyperbox
from partx.partition import (
    MINUS,
    PLUS,
    R_MINUS,
    R_PLUS,
    REMAINING,
    TRANSITIONS,
    UNCLASSIFIED,
    PartitionTree,
    QuantileEstimate,
    RegionLabel,
    Subregion,
    branch,
    branchable_dims,
    classify,
    leaf_records,
    mc_step,
    tree_update,
)
from partx.sampling import SampleBatch

UNIT2 = Hyperbox([0.0, 0.0], [1.0, 1.0])


class FixedRng:
    """Generator stand-in that always picks a given branch dimension."""

    def __init__(self, pick):
        self.pick = pick

    def integers(self, n):
        return self.pick


class Lookup:
    """Model stand-in with hand-set predictions keyed by call order."""

    def __init__(self, means, variances):
        self.means, self.variances = np.asarray(means, float), np.asarray(variances, float)

    def predict_many(self, x):
        return self.means[: len(x)].copy(), self.variances[: len(x)].copy()


def test_bisect_unit_square():
    kids = branch(Subregion(UNIT2), 2, 0.001, UNIT2.extents, FixedRng(0))
    assert kids[0].box == Hyperbox([0, 0], [0.5, 1]) and kids[1].box == Hyperbox([0.5, 0], [1, 1])
    assert all(k.label is REMAINING and k.level == 1 for k in kids)


def test_children_inherit_contained_samples():
    s = SampleBatch(np.array([[0.1, 0.5], [0.9, 0.5]]), [1.0, 2.0])
    kids = branch(Subregion(UNIT2, samples=s), 2, 0.001, UNIT2.extents, FixedRng(0))
    assert [k.n_samples for k in kids] == [1, 1]
    assert kids[0].samples.values.tolist() == [1.0]


def test_thirds_1d():
    box = Hyperbox([0.0], [9.0])
    kids = branch(Subregion(box), 3, 0.001, box.extents, np.random.default_rng(0))
    assert [(k.box.lower[0], k.box.upper[0]) for k in kids] == [(0, 3), (3, 6), (6, 9)]


def test_no_branchable_dimension():
    small = Hyperbox([0.0, 0.0], [0.0015, 0.0015])
    assert branchable_dims(small, 2, 0.001, UNIT2.extents).size == 0
    with pytest.raises(NoBranchableDimension):
        branch(Subregion(small), 2, 0.001, UNIT2.extents, np.random.default_rng(0))


def test_relabel_moves_between_sets():
    tree = PartitionTree(UNIT2)
    leaf = tree.leaves[0]
    tree_update(tree, leaf, MINUS)
    assert tree.theta(MINUS) == [leaf] and tree.theta(REMAINING) == []
    tree_update(tree, leaf, R_MINUS)
    assert tree.theta(R_MINUS) == [leaf]
    tree.check()


def test_relabel_plus_to_r_plus():
    tree = PartitionTree(UNIT2)
    leaf = tree.leaves[0]
    tree.relabel(leaf, PLUS)
    tree.relabel(leaf, R_PLUS)
    assert tree.volume(R_PLUS) == 1.0


def test_not_a_leaf():
    tree = PartitionTree(UNIT2)
    root = tree.leaves[0]
    tree.replace(root, branch(root, 2, 0.001, UNIT2.extents, FixedRng(1)))
    with pytest.raises(NotALeaf):
        tree.relabel(root, MINUS)


def test_illegal_transition_rejected():
    tree = PartitionTree(UNIT2)
    leaf = tree.leaves[0]
    tree.relabel(leaf, PLUS)
    with pytest.raises(ValueError):
        tree.relabel(leaf, MINUS)


@pytest.mark.parametrize("seed", range(1000))
def test_fuzzed_branch_update_sequences_tile(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    root = Hyperbox(-rng.uniform(0.5, 3, d), rng.uniform(0.5, 3, d))
    B = int(rng.integers(2, 4))
    tree = PartitionTree(root)
    for _ in range(int(rng.integers(1, 25))):
        leaves = tree.leaves
        leaf = leaves[int(rng.integers(len(leaves)))]
        if leaf.label in (REMAINING, R_PLUS, R_MINUS) and rng.random() < 0.6:
            try:
                kids = branch(leaf, B, 0.01, root.extents, rng)
            except NoBranchableDimension:
                tree.relabel(leaf, UNCLASSIFIED)
                continue
            for k in kids:
                assert np.all(k.box.extents >= 0.01 * root.extents - 1e-12)
            tree.replace(leaf, kids)
        else:
            options = sorted(TRANSITIONS[leaf.label], key=lambda lab: lab.value)
            tree.relabel(leaf, options[int(rng.integers(len(options)))])
    tree.check(1e-9)
    total = sum(tree.volume(lab) for lab in RegionLabel)
    assert abs(total - root.volume) <= 1e-9 * root.volume


def reachable(start):
    seen, todo = {start}, [start]
    while todo:
        for nxt in TRANSITIONS[todo.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return seen


def test_automaton_reachability():
    assert TRANSITIONS[REMAINING] == {PLUS, MINUS, REMAINING, UNCLASSIFIED}
    assert reachable(PLUS) == {PLUS, R_PLUS, UNCLASSIFIED}
    assert reachable(MINUS) == {MINUS, R_MINUS, UNCLASSIFIED}
    # no path from + to - (or back to r) without branching
    assert MINUS not in reachable(PLUS) and REMAINING not in reachable(MINUS)


def test_classify_automaton_only_produces_allowed_labels():
    rng = np.random.default_rng(0)
    for _ in range(500):
        label = [PLUS, MINUS, REMAINING, R_PLUS, R_MINUS][int(rng.integers(5))]
        lo, hi = sorted(rng.normal(size=2) * 3)
        q = QuantileEstimate(hi, rng.random() * 0.1, lo, rng.random() * 0.1)
        new = classify(Subregion(UNIT2, label), q, 0.05, 0.001, UNIT2.extents)
        assert new in TRANSITIONS[label]


def test_mc_step_constant_field():
    model = gplib.fit(np.array([[0.0, 0.0], [1.0, 1.0]]), [3.0, 3.0])
    q = mc_step(UNIT2, model, 5, 20, 0.05, np.random.default_rng(0))
    assert q == QuantileEstimate(3.0, 0.0, 3.0, 0.0)


def test_mc_step_two_replicate_hand_oracle():
    means, variances = [1.0, -2.0], [0.25, 4.0]
    q = mc_step(UNIT2, Lookup(means, variances), 2, 1, 0.05, np.random.default_rng(0))
    z = float(ndtri(0.975))
    hi = np.array([1.0 + z * 0.5, -2.0 + z * 2.0])
    lo = np.array([1.0 - z * 0.5, -2.0 - z * 2.0])
    assert q.q_max_mean == pytest.approx(hi.mean(), abs=1e-12)
    assert q.q_min_mean == pytest.approx(lo.mean(), abs=1e-12)
    assert q.q_max_var == pytest.approx(np.var(hi, ddof=1) / 2, abs=1e-12)
    assert q.q_min_var == pytest.approx(np.var(lo, ddof=1) / 2, abs=1e-12)


def fitted_model(seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, (10, 2))
    return gplib.fit(x, np.sin(5 * x[:, 0]) * x[:, 1] - 0.2)


def test_mc_step_deterministic_and_ordered():
    model = fitted_model()
    a = mc_step(UNIT2, model, 10, 50, 0.05, np.random.default_rng(3))
    b = mc_step(UNIT2, model, 10, 50, 0.05, np.random.default_rng(3))
    assert a == b
    assert a.q_min_mean <= a.q_max_mean and a.q_min_var >= 0 and a.q_max_var >= 0


def test_mc_step_variance_shrinks_with_r():
    model = fitted_model(1)
    v10 = np.mean([mc_step(UNIT2, model, 10, 5, 0.05, np.random.default_rng(s)).q_max_var for s in range(100)])
    v20 = np.mean([mc_step(UNIT2, model, 20, 5, 0.05, np.random.default_rng(s)).q_max_var for s in range(100)])
    assert 1.4 < v10 / v20 < 2.8


@pytest.mark.parametrize("q,expected", [
    (QuantileEstimate(-5.0, 1e-8, -9.0, 1e-8), MINUS),
    (QuantileEstimate(9.0, 1e-8, 5.0, 1e-8), PLUS),
    (QuantileEstimate(1.0, 1e-6, -1.0, 1e-6), REMAINING),
])
def test_classify_remaining(q, expected):
    assert classify(Subregion(UNIT2), q, 0.05, 0.001, UNIT2.extents) is expected


def test_classify_reclassification():
    z = float(ndtri(0.975))
    plus = Subregion(UNIT2, PLUS)
    # lower bound q_min - z*sqrt(var) = 1 - z*1 < 0
    assert classify(plus, QuantileEstimate(5.0, 0.0, 1.0, 1.0), 0.05, 0.001, UNIT2.extents) is R_PLUS
    assert classify(plus, QuantileEstimate(5.0, 0.0, z + 0.01, 1.0), 0.05, 0.001, UNIT2.extents) is PLUS
    minus = Subregion(UNIT2, MINUS)
    assert classify(minus, QuantileEstimate(-1.0, 1.0, -5.0, 0.0), 0.05, 0.001, UNIT2.extents) is R_MINUS
    assert classify(minus, QuantileEstimate(-3.0, 1.0, -5.0, 0.0), 0.05, 0.001, UNIT2.extents) is MINUS


def test_classify_volume_floor_and_missing_quantiles():
    tiny = Subregion(Hyperbox([0.0, 0.0], [0.001, 0.001]))
    assert classify(tiny, None, 0.05, 0.001, UNIT2.extents) is UNCLASSIFIED
    with pytest.raises(MissingQuantiles):
        classify(Subregion(UNIT2), None, 0.05, 0.001, UNIT2.extents)


def test_leaf_records_columns():
    tree = PartitionTree(UNIT2)
    rec = leaf_records(tree)
    assert len(rec) == 1
    assert rec[0]["label"] == "r" and rec[0]["q_min_mean"] is None
