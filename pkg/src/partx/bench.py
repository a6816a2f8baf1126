"""Shifted benchmark objectives and a plain Monte-Carlo volume estimate."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .exceptions import DimensionTooSmall
from .hyperbox import Hyperbox


def rosenbrock_shifted(x) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size < 2:
        raise DimensionTooSmall("Rosenbrock needs d >= 2")
    a, b = x[:-1], x[1:]
    return float(np.sum(100.0 * (b - a * a) ** 2 + (1.0 - a) ** 2) - 20.0)


def goldstein_price_shifted(x, y=None) -> float:
    if y is None:
        x, y = np.asarray(x, dtype=float).reshape(-1)
    first = 1.0 + (x + y + 1.0) ** 2 * (19.0 - 14.0 * x + 3.0 * x * x - 14.0 * y + 6.0 * x * y + 3.0 * y * y)
    second = 30.0 + (2.0 * x - 3.0 * y) ** 2 * (18.0 - 32.0 * x + 12.0 * x * x + 48.0 * y - 36.0 * x * y + 27.0 * y * y)
    return float(first * second - 50.0)


def himmelblau_shifted(x, y=None) -> float:
    if y is None:
        x, y = np.asarray(x, dtype=float).reshape(-1)
    return float((x * x + y - 11.0) ** 2 + (x + y * y - 7.0) ** 2 - 40.0)


@dataclass(frozen=True)
class BenchmarkProblem:
    name: str
    domain: Hyperbox
    objective: Callable[[np.ndarray], float]
    reference_negative_volume: Optional[float] = None
    reference_note: str = ""


# reference volumes: published uniform Monte-Carlo estimates for these domains
PROBLEMS = {
    "rosenbrock": BenchmarkProblem(
        "rosenbrock", Hyperbox.from_bounds([(-1, 1), (-1, 1)]), rosenbrock_shifted,
        1.626, "one-shot Monte-Carlo estimate, 2-d"),
    "goldstein_price": BenchmarkProblem(
        "goldstein_price", Hyperbox.from_bounds([(-1, 1), (-1, 1)]), goldstein_price_shifted,
        0.302, "one-shot Monte-Carlo estimate"),
    "himmelblau": BenchmarkProblem(
        "himmelblau", Hyperbox.from_bounds([(-5, 5), (-5, 5)]), himmelblau_shifted,
        17.030, "one-shot Monte-Carlo estimate"),
}


def get_problem(name: str) -> BenchmarkProblem:
    try:
        return PROBLEMS[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None


def mc_volume_oracle(problem: BenchmarkProblem, sample_count: int,
                     rng: np.random.Generator) -> tuple[float, float]:
    """Volume of ``{f < 0}`` from uniform sampling, with its binomial standard error."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    x = problem.domain.uniform(sample_count, rng)
    hits = sum(problem.objective(p) < 0 for p in x)
    frac = hits / sample_count
    vol = problem.domain.volume
    return vol * frac, vol * float(np.sqrt(frac * (1.0 - frac) / sample_count))
