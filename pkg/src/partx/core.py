"""The Part-X driver: branch, sample, classify, and report falsification volumes."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import gp as gplib
from .exceptions import (ConfigInvalid, EvaluationError, InvalidProbability, NoBranchableDimension,
                         PointOutsideDomain)
from .hyperbox import Hyperbox
from .partition import (
    CLASSIFIED,
    MINUS,
    PLUS,
    R_MINUS,
    R_PLUS,
    REMAINING,
    TO_BRANCH,
    UNCLASSIFIED,
    PartitionTree,
    RegionLabel,
    branch,
    classify,
    mc_step,
)
from .sampling import (
    classified_mass_metric,
    evaluate,
    SampleBatch,
    proportional_allocation,
    sample_bo,
)

log = logging.getLogger(__name__)

DEFAULT_LEVELS = (0.5, 0.95, 0.99)

# labels counted by the hyperbox estimator: everything not certified satisfying
NOT_SATISFYING = (MINUS, REMAINING, R_MINUS, UNCLASSIFIED)


@dataclass
class PartXConfig:
    n0: int = 10
    n_bo: int = 10
    n_c: int = 100
    T: int = 5000
    R: int = 10
    M: int = 100
    B: int = 2
    delta_c: float = 0.05
    delta_v: float = 0.001
    alpha: float = 0.05
    epsilon: float = 0.0
    seed: int = 0
    macro_reps: int = 1
    quantile_levels: tuple = DEFAULT_LEVELS
    volume_mc: int = 1000  # uniform draws per leaf for the quantile volume
    metric_mc_per_dim: int = 100  # uniform draws per dimension for the sampling metric
    gp_restarts: int = 5

    def validate(self) -> "PartXConfig":
        ints = ("n0", "n_bo", "n_c", "T", "R", "M", "B", "seed", "macro_reps", "volume_mc",
                "metric_mc_per_dim", "gp_restarts")
        for name in ints:
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise ConfigInvalid(f"{name} must be an integer, got {v!r}")
        checks = [
            (self.n0 >= 2, "n0 >= 2"),
            (self.n_bo >= 0, "n_bo >= 0"),
            (self.n_c >= 0, "n_c >= 0"),
            (self.T >= self.n0, "T >= n0"),
            (self.B >= 2, "B >= 2"),
            (self.R >= 2, "R >= 2"),
            (self.M >= 1, "M >= 1"),
            (0 < self.delta_c < 1, "0 < delta_c < 1"),
            (0 < self.delta_v < 1, "0 < delta_v < 1"),
            (0 < self.alpha < 1, "0 < alpha < 1"),
            (self.epsilon >= 0, "epsilon >= 0"),
            (self.seed >= 0, "seed >= 0"),
            (self.macro_reps >= 1, "macro_reps >= 1"),
            (self.volume_mc >= 1, "volume_mc >= 1"),
            (self.metric_mc_per_dim >= 1, "metric_mc_per_dim >= 1"),
            (self.gp_restarts >= 1, "gp_restarts >= 1"),
            (len(self.quantile_levels) > 0 and all(0 < q < 1 for q in self.quantile_levels),
             "quantile levels in (0, 1)"),
        ]
        for ok, what in checks:
            if not ok:
                raise ConfigInvalid(f"config violates {what}")
        return self


@dataclass(frozen=True)
class ClassificationEvent:
    """A leaf entering +, -, r+ or r- at some iteration."""

    iteration: int
    level: int
    path: tuple
    label: RegionLabel
    n_samples: int
    p: float


@dataclass
class IterationRecord:
    iteration: int
    phase: str  # "sample" or "residual"
    evaluations: int
    total_evaluations: int
    leaves: dict
    volumes: dict


@dataclass
class FalsificationVolume:
    domain_volume: float
    hyperbox_volume: float
    violating_volume: float
    gp_quantile_volume: dict

    @property
    def normalized(self) -> float:
        """Violating-set volume over the domain volume."""
        return self.violating_volume / self.domain_volume

    @property
    def hyperbox_normalized(self) -> float:
        return self.hyperbox_volume / self.domain_volume

    def quantile_normalized(self) -> dict:
        return {q: v / self.domain_volume for q, v in self.gp_quantile_volume.items()}


@dataclass
class ConfidenceDiagnostics:
    alpha_levels: dict
    deltas: list  # (event, delta) pairs
    eta_plus: dict
    eta_minus: dict
    gamma_plus: dict
    gamma_minus: dict
    plus_bound: float  # product of eta_plus over levels
    minus_bound: float  # product of eta_minus over levels
    joint_bound: float  # prod_{h>1} gamma_plus * gamma_minus
    plus_overall: float  # prod_{h>1} gamma_minus * gamma_plus^2
    minus_overall: float  # prod_{h>1} gamma_plus * gamma_minus^2

    def probabilities(self) -> list[float]:
        vals = [d for _, d in self.deltas]
        vals += list(self.alpha_levels.values())
        vals += list(self.eta_plus.values()) + list(self.eta_minus.values())
        vals += list(self.gamma_plus.values()) + list(self.gamma_minus.values())
        vals += [self.plus_bound, self.minus_bound, self.joint_bound, self.plus_overall, self.minus_overall]
        return vals


@dataclass
class RunReport:
    config: PartXConfig
    domain: Hyperbox
    tree: PartitionTree
    ledger: list
    volume: FalsificationVolume
    diagnostics: ConfidenceDiagnostics
    best_point: Optional[np.ndarray]
    best_value: float
    evaluations: int
    iterations: int
    events: list = field(default_factory=list)
    completed: bool = True

    def summary(self) -> dict:
        out = {
            "evaluations": self.evaluations,
            "iterations": self.iterations,
            "best_value": self.best_value,
            "best_point": None if self.best_point is None else self.best_point.tolist(),
            "hyperbox_volume": self.volume.hyperbox_volume,
            "violating_volume": self.volume.violating_volume,
            "normalized_violating_volume": self.volume.normalized,
        }
        for q, v in self.volume.gp_quantile_volume.items():
            out[f"quantile_volume_{q:g}"] = v
        return out


class _Budgeted:
    """Objective wrapper that counts calls and tracks the incumbent."""

    def __init__(self, objective: Callable, budget: int):
        self.objective = objective
        self.budget = budget
        self.count = 0
        self.best_value = math.inf
        self.best_point = None

    def __call__(self, x):
        if self.count >= self.budget:
            raise RuntimeError("evaluation budget exceeded")
        self.count += 1
        v = float(self.objective(x))
        if v < self.best_value:
            self.best_value, self.best_point = v, np.array(x, dtype=float)
        return v


_TAGS = {"branch": 1, "bo": 2, "mc": 3, "metric": 4, "extra": 5, "residual": 6, "volume": 7}


def substream(seed: int, tag: str, iteration: int, path: tuple = ()) -> np.random.Generator:
    """Independent generator keyed by (seed, purpose, iteration, leaf path)."""
    key = (_TAGS[tag], iteration) + tuple(int(p) for p in path)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _region_probability(model, box, label: RegionLabel, count: int, rng) -> float:
    mass = classified_mass_metric(model, box, count, rng)
    p = 1.0 - mass if label in (PLUS, R_PLUS) else mass
    return max(p, 1e-12)


def part_x(objective: Callable, domain: Hyperbox, config: PartXConfig) -> RunReport:
    """Run Part-X on ``objective`` over ``domain``.

    Raises :class:`EvaluationError` with ``.report`` holding the partial
    report if the objective fails.
    """
    cfg = config.validate()
    f = _Budgeted(objective, cfg.T)
    tree = PartitionTree(domain)
    X = domain.extents
    d = domain.dim
    fit_kwargs = {"restarts": cfg.gp_restarts}
    ledger: list[IterationRecord] = []
    events: list[ClassificationEvent] = []
    k = 0

    def record(leaf, label):
        p = _region_probability(leaf.model, leaf.box, label, cfg.metric_mc_per_dim * d,
                                substream(cfg.seed, "metric", k, leaf.path))
        events.append(ClassificationEvent(k, leaf.level, leaf.path, label, leaf.n_samples, p))

    def finish(completed: bool) -> RunReport:
        return _report(cfg, domain, tree, ledger, events, f.best_point, f.best_value, f.count, k, completed)

    try:
        while f.count < cfg.T:
            to_branch = tree.theta(*TO_BRANCH)
            if not to_branch:
                break
            k += 1
            start = f.count
            for leaf in to_branch:
                try:
                    children = branch(leaf, cfg.B, cfg.delta_v, X, substream(cfg.seed, "branch", k, leaf.path),
                                      iteration=k)
                except NoBranchableDimension:
                    tree.relabel(leaf, UNCLASSIFIED)
                    continue
                tree.replace(leaf, children)

            unclassified = tree.theta(REMAINING)
            need = sum(cfg.n_bo + max(cfg.n0 - leaf.n_samples, 0) for leaf in unclassified)
            if cfg.T - f.count >= need:
                phase = "sample"
                for leaf in unclassified:
                    res = sample_bo(leaf.box, f, leaf.samples, cfg.n0, cfg.n_bo,
                                    substream(cfg.seed, "bo", k, leaf.path), fit_kwargs)
                    leaf.samples, leaf.model = res.samples, res.model
                    leaf.quantiles = mc_step(leaf, leaf.model, cfg.R, cfg.M, cfg.delta_c,
                                             substream(cfg.seed, "mc", k, leaf.path))
                    new = classify(leaf, leaf.quantiles, cfg.delta_c, cfg.delta_v, X)
                    tree.relabel(leaf, new)
                    if new in CLASSIFIED:
                        record(leaf, new)

                classified = tree.theta(*CLASSIFIED)
                extra = min(cfg.n_c, cfg.T - f.count)
                if classified and extra > 0:
                    weights = [classified_mass_metric(leaf.model, leaf.box, cfg.metric_mc_per_dim * d,
                                                      substream(cfg.seed, "metric", k, leaf.path))
                               for leaf in classified]
                    for leaf, m in zip(classified, proportional_allocation(weights, extra)):
                        if m == 0:
                            continue
                        pts = leaf.box.uniform(m, substream(cfg.seed, "extra", k, leaf.path))
                        leaf.samples = leaf.samples.extend(pts, evaluate(f, pts))
                        leaf.model = _refit(leaf, fit_kwargs)
                for leaf in classified:
                    leaf.quantiles = mc_step(leaf, leaf.model, cfg.R, cfg.M, cfg.delta_c,
                                             substream(cfg.seed, "mc", k, leaf.path + (9999,)))
                    new = classify(leaf, leaf.quantiles, cfg.delta_c, cfg.delta_v, X)
                    if new is not leaf.label:
                        tree.relabel(leaf, new)
                        if new in (R_PLUS, R_MINUS):
                            record(leaf, new)
            else:
                phase = "residual"
                _spend_residual(tree, f, cfg, k, fit_kwargs)

            ledger.append(IterationRecord(
                iteration=k, phase=phase, evaluations=f.count - start, total_evaluations=f.count,
                leaves={lab.value: len(tree.theta(lab)) for lab in RegionLabel},
                volumes={lab.value: tree.volume(lab) for lab in RegionLabel},
            ))
            log.debug("iteration %d (%s): %d evaluations, leaves %s", k, phase, f.count - start,
                      ledger[-1].leaves)
            if phase == "residual":
                break
    except EvaluationError as exc:
        exc.report = finish(completed=False)
        raise
    return finish(completed=True)


def _report(cfg, domain, tree, ledger, events, best_point, best_value, evaluations, iterations,
            completed) -> RunReport:
    vol = FalsificationVolume(
        domain_volume=domain.volume,
        hyperbox_volume=falsification_volume_hyperbox(tree),
        violating_volume=tree.volume(MINUS),
        gp_quantile_volume=falsification_volume_quantile(
            tree, cfg.quantile_levels, cfg.volume_mc, substream(cfg.seed, "volume", 0)),
    )
    return RunReport(cfg, domain, tree, ledger, vol, confidence_diagnostics(events, cfg),
                     best_point, best_value, evaluations, iterations, events, completed)


def evaluate_samples(points, values, domain: Hyperbox, config: PartXConfig,
                     max_fit_points: int = 200) -> RunReport:
    """Partition and classify ``domain`` from existing samples only.

    Leaves are branched until they are classified, hold fewer than ``n0``
    points (these stay remaining) or hit the volume floor.  Leaves holding
    more than ``max_fit_points`` samples are fitted on a seeded random subset.
    No objective evaluations are made.
    """
    cfg = config.validate()
    d = domain.dim
    pts = np.asarray(points, dtype=float).reshape(-1, d)
    vals = np.asarray(values, dtype=float).reshape(-1)
    if pts.shape[0] != vals.shape[0]:
        raise ValueError("points and values differ in length")
    for i, row in enumerate(pts):
        if not domain.contains(row[None, :])[0]:
            raise PointOutsideDomain(i, f"row {i} lies outside the domain: {row.tolist()}")
    tree = PartitionTree(domain, SampleBatch(pts, vals))
    X = domain.extents
    fit_kwargs = {"restarts": cfg.gp_restarts}
    events: list[ClassificationEvent] = []
    queue = [tree.root_leaf]
    deepest = 0
    while queue:
        leaf = queue.pop(0)
        deepest = max(deepest, leaf.level)
        if leaf.n_samples < cfg.n0:
            continue
        batch = leaf.samples
        if leaf.n_samples > max_fit_points:
            rng = substream(cfg.seed, "extra", 0, leaf.path)
            batch = batch.subset(np.sort(rng.choice(leaf.n_samples, max_fit_points, replace=False)))
        leaf.model = gplib.fit(batch.points, batch.values, box=leaf.box, **fit_kwargs)
        leaf.quantiles = mc_step(leaf, leaf.model, cfg.R, cfg.M, cfg.delta_c,
                                 substream(cfg.seed, "mc", leaf.level, leaf.path))
        new = classify(leaf, leaf.quantiles, cfg.delta_c, cfg.delta_v, X)
        tree.relabel(leaf, new)
        if new in CLASSIFIED:
            p = _region_probability(leaf.model, leaf.box, new, cfg.metric_mc_per_dim * d,
                                    substream(cfg.seed, "metric", leaf.level, leaf.path))
            events.append(ClassificationEvent(leaf.level, leaf.level, leaf.path, new, leaf.n_samples, p))
        if new is not REMAINING:
            continue
        try:
            children = branch(leaf, cfg.B, cfg.delta_v, X, substream(cfg.seed, "branch", leaf.level, leaf.path),
                              iteration=leaf.level + 1)
        except NoBranchableDimension:
            tree.relabel(leaf, UNCLASSIFIED)
            continue
        tree.replace(leaf, children)
        queue.extend(children)

    if vals.size:
        i = int(np.argmin(vals))
        best_point, best_value = pts[i].copy(), float(vals[i])
    else:
        best_point, best_value = None, math.inf
    return _report(cfg, domain, tree, [], events, best_point, best_value, 0, deepest, True)


def _spend_residual(tree: PartitionTree, f: _Budgeted, cfg: PartXConfig, k: int, fit_kwargs: dict) -> None:
    leaves = tree.leaves
    alloc = proportional_allocation([leaf.volume for leaf in leaves], cfg.T - f.count)
    for leaf, m in zip(leaves, alloc):
        if m == 0:
            continue
        pts = leaf.box.uniform(m, substream(cfg.seed, "residual", k, leaf.path))
        leaf.samples = leaf.samples.extend(pts, evaluate(f, pts))
        if leaf.model is not None or leaf.n_samples >= cfg.n0:
            leaf.model = _refit(leaf, fit_kwargs)


def _refit(leaf, fit_kwargs: dict):
    # warm start from the leaf's own parameters when it has a model
    if leaf.model is None:
        theta0 = None
        parent = leaf.parent_model
        if parent is not None:
            # same length scales, re-expressed in the child's unit cube
            theta0 = parent.theta * (leaf.box.extents / parent.box.extents) ** 2
        return gplib.fit(leaf.samples.points, leaf.samples.values, box=leaf.box, theta0=theta0, **fit_kwargs)
    return gplib.fit(leaf.samples.points, leaf.samples.values, box=leaf.box, theta0=leaf.model.theta,
                     **{**fit_kwargs, "restarts": 0})


def falsification_volume_hyperbox(tree: PartitionTree) -> float:
    """Total volume of leaves not certified satisfying (-, r, r-, u)."""
    return tree.volume(*NOT_SATISFYING)


def falsification_volume_quantile(tree: PartitionTree, levels: Sequence[float] = DEFAULT_LEVELS,
                                  mc_count: int = 1000, rng: Optional[np.random.Generator] = None) -> dict:
    """Volume where the pointwise lower ``q`` predictive quantile is negative, per level ``q``.

    Each leaf uses its own surrogate, else the nearest ancestor's; a leaf with
    neither counts in full.  The same uniform draws serve every level.
    """
    rng = np.random.default_rng() if rng is None else rng
    z = np.array([gplib.normal_quantile(q) for q in levels])
    totals = np.zeros(len(levels))
    for leaf in tree.leaves:
        x = leaf.box.uniform(mc_count, rng)
        model = leaf.surrogate
        if model is None:
            totals += leaf.volume
            continue
        mean, var = model.predict_many(x)
        lower = mean[None, :] - z[:, None] * np.sqrt(var)[None, :]
        totals += leaf.volume * np.mean(lower < 0, axis=1)
    return {q: float(v) for q, v in zip(levels, totals)}


def significance(alpha: float, B: int, level: int) -> float:
    """Per-level significance: ``alpha`` at level 1, divided by ``B`` per level below."""
    if level < 1:
        raise ValueError("levels start at 1")
    a = alpha
    for _ in range(level - 1):
        a /= B
    return a


def pac_delta(p: float, alpha_j: float, n: int) -> float:
    """Per-region error-rate bound ``(ln 1/p + ln 1/alpha_j + 2 ln n + 1) / n``, clamped to [0, 1]."""
    if not 0 < p <= 1:
        raise InvalidProbability(f"p must lie in (0, 1], got {p}")
    if not 0 < alpha_j <= 1:
        raise InvalidProbability(f"alpha_j must lie in (0, 1], got {alpha_j}")
    if n < 1:
        raise ValueError("n must be >= 1")
    raw = (math.log(1.0 / p) + math.log(1.0 / alpha_j) + 2.0 * math.log(n) + 1.0) / n
    return min(max(raw, 0.0), 1.0)


def confidence_diagnostics(events: Sequence[ClassificationEvent], config: PartXConfig,
                           max_level: Optional[int] = None) -> ConfidenceDiagnostics:
    """Per-event PAC deltas and the product bounds built from them.

    The bounds are reported only; nothing here feeds back into the search.
    """
    levels = [e.level for e in events]
    top = max(levels + [max_level or 1, 1])
    alpha_levels = {j: significance(config.alpha, config.B, j) for j in range(1, top + 1)}
    deltas = [(e, pac_delta(e.p, alpha_levels[max(e.level, 1)], e.n_samples)) for e in events]

    eta_plus: dict = {}
    eta_minus: dict = {}
    gamma_plus: dict = {}
    gamma_minus: dict = {}
    iterations = sorted({e.iteration for e in events})
    for e, dlt in deltas:
        j, h = max(e.level, 1), e.iteration
        factor = 1.0 - dlt
        if e.label is PLUS or (e.label is R_PLUS and h > 1):
            eta_plus[j] = eta_plus.get(j, 1.0) * factor
        if e.label is MINUS or (e.label is R_MINUS and h > 1):
            eta_minus[j] = eta_minus.get(j, 1.0) * factor
        if e.label in (PLUS, R_PLUS):
            gamma_plus[h] = gamma_plus.get(h, 1.0) * factor
        else:
            gamma_minus[h] = gamma_minus.get(h, 1.0) * factor
    for h in iterations:
        gamma_plus.setdefault(h, 1.0)
        gamma_minus.setdefault(h, 1.0)

    gp_later = math.prod(v for h, v in gamma_plus.items() if h > 1)
    gm_later = math.prod(v for h, v in gamma_minus.items() if h > 1)
    return ConfidenceDiagnostics(
        alpha_levels=alpha_levels,
        deltas=deltas,
        eta_plus=eta_plus,
        eta_minus=eta_minus,
        gamma_plus=gamma_plus,
        gamma_minus=gamma_minus,
        plus_bound=math.prod(eta_plus.values()),
        minus_bound=math.prod(eta_minus.values()),
        joint_bound=gp_later * gm_later,
        plus_overall=gm_later * gp_later ** 2,
        minus_overall=gp_later * gm_later ** 2,
    )


def config_dict(cfg: PartXConfig) -> dict:
    out = asdict(cfg)
    out["quantile_levels"] = list(cfg.quantile_levels)
    return out
