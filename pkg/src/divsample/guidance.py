"""Diversity guidance for batched diffusion sampling, and set-diversity metrics.

At every step each clean-signal prediction in the batch is pushed away from
its nearest neighbour within the batch. The push is the gradient of a
clamped squared-L2 dissimilarity, so predictions that are already farther
apart than ``s * d_max`` are left alone, and its strength decays linearly
with the timestep.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import DataError, UsageError
from .features import METRICS, as_feature_matrix


# calibrated on the default toy inverse problem (observe x of the 2-D ring prior)
DEFAULT_ETA = 1.0
DEFAULT_D_MAX = 2.0


@dataclass(frozen=True)
class GuidanceConfig:
    """Step size ``eta``, per-unknown distance bound ``d_max`` and unknown count ``s``."""

    eta: float
    d_max: float
    s: int = 1

    def __post_init__(self):
        if not self.eta >= 0:
            raise UsageError(f"eta must be nonnegative, got {self.eta}")
        if not self.d_max > 0:
            raise UsageError(f"d_max must be positive, got {self.d_max}")
        if int(self.s) != self.s or self.s < 1:
            raise UsageError(f"s must be a positive integer, got {self.s}")

    @property
    def bound(self) -> float:
        return self.s * self.d_max

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GuidanceConfig":
        return cls(eta=float(d["eta"]), d_max=float(d["d_max"]), s=int(d["s"]))


def clamped_sq_l2(u, v, s: int, d_max: float) -> float:
    """Half squared distance, capped at ``(s * d_max)**2 / 2`` beyond the bound."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DataError(f"dimension mismatch: {u.shape} vs {v.shape}")
    dist = float(np.linalg.norm(u - v))
    bound = s * d_max
    if dist <= bound:
        return 0.5 * dist**2
    return 0.5 * bound**2


def _check_batch(batch) -> np.ndarray:
    x = as_feature_matrix(batch)
    if x.shape[0] < 2:
        raise UsageError(f"batch must hold at least two predictions, got {x.shape[0]}")
    return x


def nearest_neighbors(batch) -> np.ndarray:
    """Index of every row's nearest other row (ties to the lowest index)."""
    x = _check_batch(batch)
    dist = squareform(pdist(x))
    np.fill_diagonal(dist, np.inf)
    return np.argmin(dist, axis=1)


def nearest_neighbor_in_batch(batch, i: int) -> int:
    x = _check_batch(batch)
    if not 0 <= i < x.shape[0]:
        raise UsageError(f"index {i} outside batch of size {x.shape[0]}")
    dist = np.sqrt(np.sum((x - x[i]) ** 2, axis=1))
    dist[i] = np.inf
    return int(np.argmin(dist))


def diversity_guidance_step(
    batch,
    cfg: GuidanceConfig,
    t: int,
    t_max: int,
    dissimilarity_grad: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
) -> np.ndarray:
    """Push every prediction away from its nearest neighbour in the batch.

    Neighbours are found on the input snapshot and all rows move at once::

        x_i += eta * (t / t_max) * (x_i - x_nn) * [|x_i - x_nn| < s * d_max]

    ``dissimilarity_grad(u, v)`` replaces the clamped squared-L2 gradient
    with any other dissimilarity gradient taken with respect to ``u``; it is
    applied row-wise to ``(batch, neighbours)``.
    """
    x = _check_batch(batch)
    if not 0 <= t <= t_max:
        raise UsageError(f"t must lie in [0, {t_max}], got {t}")
    if cfg.eta == 0 or t == 0:
        return x.copy()
    nn = x[nearest_neighbors(x)]
    if dissimilarity_grad is None:
        diff = x - nn
        active = np.sqrt(np.sum(diff**2, axis=1)) < cfg.bound
        grad = diff * active[:, None]
    else:
        grad = np.asarray(dissimilarity_grad(x, nn), dtype=np.float64)
    return x + cfg.eta * (t / t_max) * grad


# --------------------------------------------------------------------------
# set metrics


@dataclass(frozen=True)
class DiversityReport:
    mean_pairwise: float
    min_pairwise: float
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


def _pair_metric(metric: str) -> str:
    if metric not in METRICS:
        raise UsageError(f"unknown metric {metric!r}; expected one of {METRICS}")
    return "euclidean" if metric == "euclidean" else "sqeuclidean"


def mean_pairwise_distance(points, metric: str = "euclidean") -> DiversityReport:
    x = as_feature_matrix(points)
    if x.shape[0] < 2:
        raise UsageError("need at least two points")
    d = pdist(x, metric=_pair_metric(metric))
    return DiversityReport(float(d.mean()), float(d.min()), int(x.shape[0]))


def coverage_distance(points, target, metric: str = "euclidean") -> float:
    """Distance from ``target`` to its nearest member of ``points``."""
    if np.asarray(points, dtype=np.float64).size == 0:
        raise UsageError("coverage of an empty set is undefined")
    x = as_feature_matrix(points)
    target = np.asarray(target, dtype=np.float64).ravel()
    if target.size != x.shape[1]:
        raise DataError(f"target has dimension {target.size}, set has {x.shape[1]}")
    sq = np.sum((x - target) ** 2, axis=1)
    if _pair_metric(metric) == "euclidean":
        return float(np.sqrt(sq.min()))
    return float(sq.min())


def covered_components(points, g, radius_sigmas: float) -> np.ndarray:
    """Boolean mask of mixture components with a point within the radius."""
    if not radius_sigmas > 0:
        raise UsageError(f"radius_sigmas must be positive, got {radius_sigmas}")
    x = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if x.size == 0:
        return np.zeros(g.n_components, dtype=bool)
    if x.shape[1] != g.dim:
        raise DataError(f"points have dimension {x.shape[1]}, mixture has {g.dim}")
    radius = radius_sigmas * np.sqrt(g.max_variances())
    dist = np.sqrt(np.sum((x[:, None, :] - g.means[None]) ** 2, axis=2))
    return np.any(dist <= radius[None], axis=0)


def mode_coverage(points, g, radius_sigmas: float = 3.0) -> int:
    """Number of mixture components with at least one point near their mean.

    "Near" means within ``radius_sigmas`` times the component's largest
    standard deviation.
    """
    return int(np.count_nonzero(covered_components(points, g, radius_sigmas)))
