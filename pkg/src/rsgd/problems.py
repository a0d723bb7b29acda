"""Cost functions with finite-sample stochastic gradient oracles.

Each problem couples a manifold, a finite outcome space with probability
weights, and a per-outcome gradient field H(x, l) whose weighted average over
all outcomes equals the exact Riemannian gradient of the cost.  Because the
outcome spaces are finite, that unbiasedness identity can be certified by
exhaustive enumeration rather than sampling.

Two instances are provided: a mean-of-targets cost on the unit sphere (whose
domain is compact by itself) and Tikhonov-regularized least squares on flat
space (which needs the confinement machinery to stay in a compact region).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import UnboundedRegion
from .manifolds import Euclidean, Manifold, Sphere


@dataclass(frozen=True)
class FiniteSampleSpace:
    """Outcome set {0, .., N-1} with strictly positive probability weights."""

    weights: np.ndarray
    cumulative: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("weights must be a nonempty 1-d array")
        if not np.all(w > 0):
            raise ValueError("all outcome weights must be > 0")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 (got {w.sum()!r})")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "cumulative", np.cumsum(w))

    @classmethod
    def uniform(cls, n: int) -> "FiniteSampleSpace":
        if n < 1:
            raise ValueError("sample space must have at least one outcome")
        return cls(np.full(n, 1.0 / n))

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))


class GradientOracle:
    """Base class: cost F, exact gradient, and per-outcome gradients H(x, l).

    Subclasses fill in the vectorized primitives; everything here broadcasts
    over leading axes of x exactly like the manifold operations.
    """

    manifold: Manifold
    space: FiniteSampleSpace
    data_seed: int | None

    def cost(self, x):
        raise NotImplementedError

    def full_gradient(self, x):
        raise NotImplementedError

    def sample_gradients(self, x, idx):
        """H(x, l) for an index array: x (..., d), idx (..., b) -> (..., b, d)."""
        raise NotImplementedError

    def sample_gradient(self, x, l: int):
        n = self.space.size
        if not 0 <= l < n:
            raise IndexError(f"outcome index {l} outside [0, {n})")
        return self.sample_gradients(x, np.array([l]))[..., 0, :]

    def gradient_bound(self, rho1: float | None = None) -> float:
        """A valid bound A with ||H(x, l)|| <= A on the problem's region."""
        raise NotImplementedError

    def sample_region(self, rng: np.random.Generator, size: int):
        """Points covering the compact region the gradient bound refers to."""
        raise NotImplementedError

    @property
    def region_label(self) -> str:
        raise NotImplementedError


class SphereMeanProblem(GradientOracle):
    """Weighted mean of squared distances to fixed targets, on the unit sphere.

    F(x) = sum_l w_l ||x - a_l||^2 / 2, which for uniform weights is the
    mean (1/2N) sum_l ||x - a_l||^2.  The per-outcome gradient is the tangent
    projection of x - a_l, and the exact gradient projects x - abar where
    abar is the weighted target mean.
    """

    def __init__(self, targets, weights=None, data_seed: int | None = None):
        a = np.asarray(targets, dtype=float)
        if a.ndim != 2 or a.shape[0] < 1:
            raise ValueError("targets must be a (N, d) array with N >= 1")
        n, d = a.shape
        self.targets = a
        self.space = FiniteSampleSpace.uniform(n) if weights is None else FiniteSampleSpace(weights)
        if self.space.size != n:
            raise ValueError("weights length must match number of targets")
        self.manifold = Sphere(d)
        self.data_seed = data_seed
        self.target_mean = (self.space.weights[:, None] * a).sum(axis=0)
        self._sq_mean = float((self.space.weights * (a * a).sum(axis=1)).sum())

    def cost(self, x):
        x = np.asarray(x, dtype=float)
        xx = (x * x).sum(axis=-1)
        return 0.5 * (xx - 2.0 * (x * self.target_mean).sum(axis=-1) + self._sq_mean)

    def full_gradient(self, x):
        x = np.asarray(x, dtype=float)
        return self.manifold.project_tangent(x, x - self.target_mean)

    def sample_gradients(self, x, idx):
        x = np.asarray(x, dtype=float)
        av = self.targets[np.asarray(idx)]
        xb = x[..., None, :]
        diff = xb - av
        return diff - (diff * xb).sum(axis=-1)[..., None] * xb

    def gradient_bound(self, rho1: float | None = None) -> float:
        # ||proj_x(x - a_l)|| <= ||x|| + ||a_l|| <= 1 + max ||a_l||; pad to the
        # simpler majorant 2 + max, which stays valid for non-unit targets.
        return 2.0 + float(np.sqrt((self.targets**2).sum(axis=1)).max())

    def sample_region(self, rng, size: int):
        return self.manifold.random_point(rng, size)

    @property
    def region_label(self) -> str:
        return "unit sphere"


class RegularizedLeastSquaresProblem(GradientOracle):
    """Tikhonov-regularized least squares on R^d.

    F(x) = sum_l w_l (<a_l, x> - y_l)^2 / 2 + tau ||x||^2 / 2, with
    per-outcome gradient H(x, l) = (<a_l, x> - y_l) a_l + tau x.  The
    regularizer makes rho(x) = ||x||^2 a confinement of H, so runs can be
    certified to stay in a ball without being clamped.
    """

    def __init__(self, features, labels, tau: float, weights=None,
                 region_rho1: float | None = None, data_seed: int | None = None):
        a = np.asarray(features, dtype=float)
        y = np.asarray(labels, dtype=float)
        if a.ndim != 2 or a.shape[0] < 1:
            raise ValueError("features must be a (N, d) array with N >= 1")
        if y.shape != (a.shape[0],):
            raise ValueError("labels must be a (N,) array matching features")
        if not tau > 0:
            raise ValueError("tau must be > 0")
        self.features = a
        self.labels = y
        self.tau = float(tau)
        n, d = a.shape
        self.space = FiniteSampleSpace.uniform(n) if weights is None else FiniteSampleSpace(weights)
        if self.space.size != n:
            raise ValueError("weights length must match number of rows")
        self.manifold = Euclidean(d)
        self.region_rho1 = None if region_rho1 is None else float(region_rho1)
        self.data_seed = data_seed

    def _residuals(self, x):
        x = np.asarray(x, dtype=float)
        return (x[..., None, :] * self.features).sum(axis=-1) - self.labels

    def cost(self, x):
        x = np.asarray(x, dtype=float)
        r = self._residuals(x)
        return 0.5 * (self.space.weights * r * r).sum(axis=-1) + 0.5 * self.tau * (x * x).sum(axis=-1)

    def full_gradient(self, x):
        x = np.asarray(x, dtype=float)
        r = self._residuals(x)
        return ((self.space.weights * r)[..., None] * self.features).sum(axis=-2) + self.tau * x

    def sample_gradients(self, x, idx):
        x = np.asarray(x, dtype=float)
        idx = np.asarray(idx)
        av = self.features[idx]
        r = (x[..., None, :] * av).sum(axis=-1) - self.labels[idx]
        return r[..., None] * av + self.tau * x[..., None, :]

    def rho0_for_norm_squared(self) -> float:
        """Threshold max_l y_l^2 / (4 tau) above which <2x, H(x, l)> >= 0."""
        return float((self.labels**2).max() / (4.0 * self.tau))

    def gradient_bound(self, rho1: float | None = None) -> float:
        rho1 = self.region_rho1 if rho1 is None else float(rho1)
        if rho1 is None:
            raise UnboundedRegion(
                "least squares lives on all of R^d; pass rho1 for the ball ||x||^2 <= rho1"
            )
        root = float(np.sqrt(rho1))
        an = np.sqrt((self.features**2).sum(axis=1))
        return float((an * an * root + np.abs(self.labels) * an).max() + self.tau * root)

    def sample_region(self, rng, size: int, rho1: float | None = None):
        rho1 = self.region_rho1 if rho1 is None else float(rho1)
        if rho1 is None:
            raise UnboundedRegion("no ball radius declared for region sampling")
        d = self.manifold.ambient_dim
        dirs = self.manifold.random_point(rng, size)
        dirs = dirs / np.sqrt((dirs * dirs).sum(axis=-1))[..., None]
        radii = np.sqrt(rho1) * rng.uniform(size=size) ** (1.0 / d)
        return dirs * radii[:, None]

    @property
    def region_label(self) -> str:
        if self.region_rho1 is None:
            return "R^d (no region declared)"
        return f"ball ||x||^2 <= {self.region_rho1:g}"


def random_sphere_mean(dim: int, n_outcomes: int, seed: int,
                       unit_targets: bool = True) -> SphereMeanProblem:
    """Sphere-mean instance with pseudo-random targets; the seed is recorded."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n_outcomes, dim))
    if unit_targets:
        a = a / np.sqrt((a * a).sum(axis=1))[:, None]
    return SphereMeanProblem(a, data_seed=seed)


def random_least_squares(dim: int, n_outcomes: int, seed: int, tau: float,
                         region_rho1: float | None = None) -> RegularizedLeastSquaresProblem:
    """Least-squares instance with unit feature rows and normal labels."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n_outcomes, dim))
    a = a / np.sqrt((a * a).sum(axis=1))[:, None]
    y = rng.normal(size=n_outcomes)
    return RegularizedLeastSquaresProblem(a, y, tau, region_rho1=region_rho1, data_seed=seed)


def _read_csv_rows(path) -> list[list[float]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header row plus at least one data row")
    header = rows[0]
    try:
        [float(cell) for cell in header]
    except ValueError:
        pass
    else:
        raise ValueError(f"{path}: first row parses as numbers; a header row is required")
    try:
        return [[float(cell) for cell in row] for row in rows[1:]]
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric data cell ({exc})") from None


def load_sphere_mean_csv(path, weights=None) -> SphereMeanProblem:
    """Targets from a CSV file: header row, then one row of coordinates per outcome."""
    data = np.asarray(_read_csv_rows(path), dtype=float)
    return SphereMeanProblem(data, weights=weights)


def load_least_squares_csv(path, tau: float, weights=None,
                           region_rho1: float | None = None) -> RegularizedLeastSquaresProblem:
    """Rows of feature coordinates followed by the label in the last column."""
    data = np.asarray(_read_csv_rows(path), dtype=float)
    if data.shape[1] < 2:
        raise ValueError(f"{path}: least-squares rows need feature columns plus a label")
    return RegularizedLeastSquaresProblem(
        data[:, :-1], data[:, -1], tau, weights=weights, region_rho1=region_rho1
    )
