"""Ordinary-kriging Gaussian process with a separable Gaussian kernel.

The model is ``Y(x) = mu + Z(x)`` with ``Cov(Z(a), Z(b)) = tau2 * R(a, b)`` and
``R(a, b) = prod_l exp(-theta_l (a_l - b_l)^2)``.  ``mu`` and ``tau2`` take their
closed-form maximum-likelihood values given ``theta``; ``theta`` maximises the
profile log-likelihood.  Inputs are mapped to the unit cube of a reference box
before anything else, so ``theta`` is expressed in unit-cube coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.special import ndtri

from .exceptions import DimensionMismatch, FactorizationFailure, InvalidLevel
from .hyperbox import Hyperbox

JITTERS = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
THETA_BOUNDS = (1e-3, 1e3)
# isotropic log10(theta) starting points for the multi-start search
START_GRID = (-2.0, -1.0, 0.0, 1.0, 2.0)


@dataclass(frozen=True)
class Prediction:
    mean: float
    variance: float


@dataclass(frozen=True)
class TrainingSet:
    """Deduplicated, canonically ordered training data."""

    points: np.ndarray
    values: np.ndarray

    @classmethod
    def build(cls, points, values) -> "TrainingSet":
        x = np.asarray(points, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        y = np.asarray(values, dtype=float).reshape(-1)
        if x.ndim != 2 or x.shape[1] < 1:
            raise DimensionMismatch("points must be an (n, d) array with d >= 1")
        if x.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"{x.shape[0]} points but {y.shape[0]} values")
        # exact duplicates: keep the first occurrence
        _, first = np.unique(x, axis=0, return_index=True)
        keep = np.sort(first)
        x, y = x[keep], y[keep]
        if x.shape[0] < 2:
            raise ValueError("need at least 2 distinct training points")
        # lexicographic order makes the fit independent of input ordering
        order = np.lexsort(x.T[::-1])
        x, y = x[order], y[order]
        x.setflags(write=False)
        y.setflags(write=False)
        return cls(x, y)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def correlation(a: np.ndarray, b: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Gaussian correlation matrix between the rows of ``a`` and ``b``."""
    diff2 = (a[:, None, :] - b[None, :, :]) ** 2
    return np.exp(-np.einsum("ijl,l->ij", diff2, theta))


def factorize(R: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``R + jitter*I`` with escalating jitter."""
    eye = np.eye(R.shape[0])
    for jitter in JITTERS:
        try:
            return cholesky(R + jitter * eye, lower=True, check_finite=False), jitter
        except LinAlgError:
            continue
    raise FactorizationFailure(f"correlation matrix not positive definite with jitter {JITTERS[-1]:g}")


def _profile(L: np.ndarray, y: np.ndarray):
    ones = np.ones_like(y)
    rinv_one = cho_solve((L, True), ones, check_finite=False)
    rinv_y = cho_solve((L, True), y, check_finite=False)
    denom = float(ones @ rinv_one)
    mu = float(ones @ rinv_y) / denom
    resid = y - mu
    alpha = cho_solve((L, True), resid, check_finite=False)
    tau2 = max(float(resid @ alpha) / y.size, 0.0)
    return mu, tau2, alpha, rinv_one, denom


def profile_loglik(log_theta: np.ndarray, x: np.ndarray, y: np.ndarray, diff2=None, grad: bool = False):
    """Concentrated log-likelihood ``-n/2 log tau2 - 1/2 log|R|`` (constants dropped).

    Returns ``(value, gradient wrt log theta)`` when ``grad`` is set.
    """
    theta = np.exp(log_theta)
    if diff2 is None:
        diff2 = (x[:, None, :] - x[None, :, :]) ** 2
    R = np.exp(-np.einsum("ijl,l->ij", diff2, theta))
    L, _ = factorize(R)
    _, tau2, alpha, _, _ = _profile(L, y)
    n = y.size
    tau2 = max(tau2, 1e-300)
    value = -0.5 * n * np.log(tau2) - np.sum(np.log(np.diag(L)))
    if not grad:
        return value
    rinv = cho_solve((L, True), np.eye(n), check_finite=False)
    # dR/dtheta_l = -diff2_l * R
    outer = np.outer(alpha, alpha) / tau2 - rinv
    g = -0.5 * np.einsum("ij,ijl->l", outer * R, diff2)
    return value, g * theta


@dataclass(frozen=True, eq=False)
class GaussianProcess:
    """A fitted, immutable surrogate.  Build with :func:`fit`."""

    theta: np.ndarray
    mu: float
    tau2: float
    training: TrainingSet
    box: Hyperbox
    chol: np.ndarray
    jitter: float
    degenerate: bool = False

    def __post_init__(self):
        y = self.training.values
        _, _, alpha, rinv_one, denom = _profile(self.chol, y)
        object.__setattr__(self, "_unit", self.box.to_unit(self.training.points))
        object.__setattr__(self, "_alpha", alpha)
        object.__setattr__(self, "_linv_one", solve_triangular(self.chol, np.ones_like(y), lower=True))
        object.__setattr__(self, "_denom", denom)

    @property
    def dim(self) -> int:
        return self.training.dim

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(1, -1)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise DimensionMismatch(f"expected {self.dim}-d input, got shape {x.shape}")
        return x

    def predict_many(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised mean and variance at the rows of ``x``."""
        x = self._check(x)
        if self.degenerate:
            return np.full(x.shape[0], self.mu), np.zeros(x.shape[0])
        r = correlation(self.box.to_unit(x), self._unit, self.theta)
        mean = self.mu + r @ self._alpha
        if self.tau2 == 0.0:
            return mean, np.zeros_like(mean)
        v = solve_triangular(self.chol, r.T, lower=True, check_finite=False)
        rr = np.sum(v * v, axis=0)
        one_r = self._linv_one @ v
        var = self.tau2 * (1.0 - rr + (1.0 - one_r) ** 2 / self._denom)
        return mean, np.maximum(var, 0.0)

    def predict(self, x) -> Prediction:
        mean, var = self.predict_many(x)
        if mean.size != 1:
            raise DimensionMismatch("predict takes a single point; use predict_many")
        return Prediction(float(mean[0]), float(var[0]))

    def quantile(self, x, level: float):
        """Pointwise predictive quantile ``mean + z(level) * sd``."""
        z = normal_quantile(level)
        mean, var = self.predict_many(x)
        q = mean + z * np.sqrt(var)
        return float(q[0]) if np.ndim(x) == 1 else q


def normal_quantile(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise InvalidLevel(f"level must lie in (0, 1), got {level}")
    return float(ndtri(level))


def _unit_box(points: np.ndarray) -> Hyperbox:
    lo, hi = points.min(axis=0), points.max(axis=0)
    flat = hi <= lo
    hi = np.where(flat, lo + 1.0, hi)
    return Hyperbox(lo, hi)


def fit(
    points,
    values,
    box: Optional[Hyperbox] = None,
    theta: Optional[Sequence[float]] = None,
    theta0: Optional[Sequence[float]] = None,
    restarts: int = len(START_GRID),
) -> GaussianProcess:
    """Fit a GP to noiseless observations.

    Args:
        points: (n, d) inputs; exact duplicates are dropped.
        values: n observations.
        box: reference box for unit-cube normalisation (defaults to the
            bounding box of ``points``).
        theta: fix the correlation parameters instead of estimating them.
        theta0: extra warm-start point for the likelihood search.
        restarts: how many of the grid starts get a local search; with
            ``theta0`` given, 0 means a single local search from ``theta0``.
    """
    data = TrainingSet.build(points, values)
    if box is None:
        box = _unit_box(data.points)
    elif box.dim != data.dim:
        raise DimensionMismatch(f"box is {box.dim}-d but points are {data.dim}-d")
    x = box.to_unit(data.points)
    y = data.values
    degenerate = bool(np.ptp(y) == 0.0)

    if theta is not None:
        th = np.broadcast_to(np.asarray(theta, dtype=float), (data.dim,)).copy()
        if np.any(th <= 0):
            raise ValueError("theta must be positive")
    elif degenerate:
        th = np.ones(data.dim)
    else:
        th = _estimate_theta(x, y, theta0, restarts)

    L, jitter = factorize(correlation(x, x, th))
    mu, tau2, *_ = _profile(L, y)
    if degenerate:
        mu, tau2 = float(y[0]), 0.0
    return GaussianProcess(th, mu, tau2, data, box, L, jitter, degenerate)


def _estimate_theta(x: np.ndarray, y: np.ndarray, theta0, restarts: int) -> np.ndarray:
    d = x.shape[1]
    diff2 = (x[:, None, :] - x[None, :, :]) ** 2
    lb, ub = np.log(THETA_BOUNDS[0]), np.log(THETA_BOUNDS[1])

    def objective(z):
        try:
            v, g = profile_loglik(z, x, y, diff2, grad=True)
        except FactorizationFailure:
            return 1e300, np.zeros(d)
        return -v, -g

    if theta0 is None:
        restarts = max(restarts, 1)
    scored = []
    if restarts > 0:
        starts = [np.full(d, g * np.log(10.0)) for g in START_GRID]
        scored = sorted(starts, key=lambda z: objective(z)[0])[:restarts]
    if theta0 is not None:
        z0 = np.clip(np.log(np.broadcast_to(np.asarray(theta0, dtype=float), (d,))), lb, ub)
        scored.insert(0, z0)

    best_z, best_f = scored[0], np.inf
    for z in scored:
        res = minimize(objective, z, jac=True, method="L-BFGS-B", bounds=[(lb, ub)] * d,
                       options={"maxiter": 100, "ftol": 1e-7, "gtol": 1e-4})
        if res.fun < best_f:
            best_z, best_f = res.x, res.fun
    return np.exp(best_z)
