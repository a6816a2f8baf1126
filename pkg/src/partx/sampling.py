"""Space-filling designs, expected-improvement sampling and budget allocation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtr

from . import gp as gplib
from .exceptions import EvaluationError
from .hyperbox import Hyperbox

Objective = Callable[[np.ndarray], float]

_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass
class SampleBatch:
    """Evaluated points; ``points`` is (n, d), ``values`` is (n,)."""

    points: np.ndarray
    values: np.ndarray

    @classmethod
    def empty(cls, dim: int) -> "SampleBatch":
        return cls(np.empty((0, dim)), np.empty(0))

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, np.shape(self.points)[-1])
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.points.shape[0] != self.values.shape[0]:
            raise ValueError("points and values differ in length")

    def __len__(self) -> int:
        return self.values.size

    def extend(self, points, values) -> "SampleBatch":
        p = np.asarray(points, dtype=float).reshape(-1, self.points.shape[1])
        return SampleBatch(np.vstack([self.points, p]), np.concatenate([self.values, np.asarray(values, float).reshape(-1)]))

    def subset(self, mask) -> "SampleBatch":
        return SampleBatch(self.points[mask], self.values[mask])

    def argmin(self) -> int:
        return int(np.argmin(self.values))


def latin_hypercube(box: Hyperbox, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` points with exactly one point per stratum along every axis."""
    if count < 1:
        raise ValueError("count must be >= 1")
    d = box.dim
    strata = np.stack([rng.permutation(count) for _ in range(d)], axis=1)
    u = (strata + rng.random((count, d))) / count
    return box.from_unit(u)


def expected_improvement(model: gplib.GaussianProcess, x, f_star: float):
    """Closed-form EI for minimisation; zero wherever the predictive sd is zero."""
    mean, var = model.predict_many(x)
    ei = _ei(mean, np.sqrt(var), f_star)
    return float(ei[0]) if np.ndim(x) == 1 else ei


def _ei(mean: np.ndarray, sd: np.ndarray, f_star: float) -> np.ndarray:
    out = np.zeros_like(mean)
    pos = sd > 0
    if np.any(pos):
        diff = f_star - mean[pos]
        with np.errstate(over="ignore"):
            z = diff / sd[pos]
            pdf = np.exp(-0.5 * z * z) / _SQRT_2PI
        out[pos] = diff * ndtr(z) + sd[pos] * pdf
    # rounding can push tiny values below zero
    return np.maximum(out, 0.0)


def maximize_ei(model, box: Hyperbox, f_star: float, rng: np.random.Generator,
                candidates_per_dim: int = 100, max_steps: int = 50) -> np.ndarray:
    """Candidate-set search followed by a bounded compass search on EI."""
    d = box.dim
    cand = latin_hypercube(box, candidates_per_dim * d, rng)
    scores = expected_improvement(model, cand, f_star)
    i = int(np.argmax(scores))
    x, best = cand[i].copy(), scores[i]
    step = 0.25 * box.extents / (candidates_per_dim * d) ** (1.0 / d)
    floor = 1e-6 * box.extents
    directions = np.vstack([np.eye(d), -np.eye(d)])
    for _ in range(max_steps):
        trial = np.clip(x + directions * step, box.lower, box.upper)
        s = expected_improvement(model, trial, f_star)
        j = int(np.argmax(s))
        if s[j] > best:
            x, best = trial[j], s[j]
        else:
            step = step / 2.0
            if np.all(step < floor):
                break
    return x


def evaluate(objective: Objective, points: np.ndarray) -> np.ndarray:
    out = np.empty(points.shape[0])
    for i, p in enumerate(points):
        try:
            v = float(objective(p))
        except EvaluationError:
            raise
        except Exception as exc:  # noqa: BLE001 - any objective failure is reported the same way
            raise EvaluationError(p, f"objective raised {exc!r} at {list(p)}") from exc
        if not np.isfinite(v):
            raise EvaluationError(p, f"objective returned non-finite value {v} at {list(p)}")
        out[i] = v
    return out


@dataclass
class BOResult:
    samples: SampleBatch
    model: gplib.GaussianProcess
    best_point: np.ndarray
    best_value: float
    evaluations: int = 0
    new_points: np.ndarray = field(default=None, repr=False)


def sample_bo(
    box: Hyperbox,
    objective: Objective,
    existing: Optional[SampleBatch],
    n0: int,
    n_bo: int,
    rng: np.random.Generator,
    fit_kwargs: Optional[dict] = None,
) -> BOResult:
    """Initialise a subregion to ``n0`` points with an LHS, then add ``n_bo`` EI points.

    The surrogate is refitted after every EI evaluation by a single local
    likelihood search warm-started from the previous correlation parameters.  The incumbent is the smallest value
    observed inside ``box``.
    """
    if n0 < 2:
        raise ValueError("n0 must be >= 2")
    if n_bo < 0:
        raise ValueError("n_bo must be >= 0")
    fit_kwargs = dict(fit_kwargs or {})
    samples = existing if existing is not None else SampleBatch.empty(box.dim)
    start = len(samples)

    shortfall = max(n0 - len(samples), 0)
    if shortfall:
        pts = latin_hypercube(box, shortfall, rng)
        samples = samples.extend(pts, evaluate(objective, pts))

    model = gplib.fit(samples.points, samples.values, box=box, **fit_kwargs)
    for _ in range(n_bo):
        f_star = float(samples.values.min())
        x = maximize_ei(model, box, f_star, rng)
        samples = samples.extend(x, evaluate(objective, x[None, :]))
        model = gplib.fit(samples.points, samples.values, box=box, theta0=model.theta,
                          **{**fit_kwargs, "restarts": 0})

    i = samples.argmin()
    return BOResult(samples, model, samples.points[i].copy(), float(samples.values[i]),
                    evaluations=len(samples) - start, new_points=samples.points[start:])


def classified_mass_metric(model, box: Hyperbox, mc_count: int, rng: np.random.Generator) -> float:
    """Average over uniform draws of the predictive probability of a negative value."""
    x = box.uniform(mc_count, rng)
    return mass_below_zero(model, x)


def mass_below_zero(model, x: np.ndarray) -> float:
    mean, var = model.predict_many(x)
    sd = np.sqrt(var)
    p = np.where(sd > 0, ndtr(-mean / np.where(sd > 0, sd, 1.0)), (mean < 0).astype(float))
    return float(np.mean(p))


def proportional_allocation(weights, total: int) -> list[int]:
    """Largest-remainder apportionment of ``total`` by ``weights``.

    Ties in the remainders go to the lowest index.  All-zero weights with a
    positive total fall back to an equal split.
    """
    w = np.asarray(weights, dtype=float).reshape(-1)
    if total < 0:
        raise ValueError("total must be nonnegative")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    if w.size == 0:
        if total:
            raise ValueError("cannot allocate a positive total over no weights")
        return []
    if total == 0:
        return [0] * w.size
    if w.sum() <= 0:
        w = np.ones_like(w)
    quota = total * w / w.sum()
    base = np.floor(quota).astype(int)
    left = total - int(base.sum())
    rem = np.round(quota - base, 12)
    # stable sort on -remainder keeps lower indices first among ties
    order = np.argsort(-rem, kind="stable")
    base[order[:left]] += 1
    return base.tolist()
