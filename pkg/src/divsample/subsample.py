"""Choosing a small representative subset of a large candidate set.

Four strategies share one result type:

* :func:`fps` - greedy farthest-point selection, optionally run on a random
  sub-pool of size ``l``;
* :func:`kmeans_representatives` - the member nearest to each K-means centroid;
* :func:`uniformization` - sampling without replacement with probabilities
  inversely proportional to a k-NN density estimate;
* :func:`random_subset` - plain uniform sampling (the posterior baseline).

Every strategy is a pure function of its inputs and an integer seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateDataError, UsageError
from .features import DistanceMatrix, as_feature_matrix

METHODS = ("fps", "kmeans", "uniformization", "random")


@dataclass(frozen=True)
class SelectionResult:
    indices: list[int]
    method: str
    seed: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.indices)) != len(self.indices):
            raise ValueError(f"selection contains repeated indices: {self.indices}")

    def __len__(self) -> int:
        return len(self.indices)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "seed": self.seed,
            "params": dict(self.params),
            "indices": list(self.indices),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionResult":
        return cls(
            indices=[int(i) for i in d["indices"]],
            method=d["method"],
            seed=int(d["seed"]),
            params=dict(d.get("params", {})),
        )


@dataclass(frozen=True)
class UniformizationWeights:
    """Inverse-density sampling probabilities.

    ``rho`` is each sample's distance to its k-th nearest neighbour (itself
    excluded); ``weights`` is ``rho**dim_used`` normalised to sum to one.
    """

    weights: np.ndarray
    k: int
    dim_used: int
    rho: np.ndarray


def _check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise UsageError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def _check_n(n: int, limit: int, what: str = "number of samples") -> int:
    n = int(n)
    if n < 1:
        raise UsageError(f"n must be at least 1, got {n}")
    if n > limit:
        raise UsageError(f"n={n} exceeds the {what} ({limit})")
    return n


# --------------------------------------------------------------------------
# farthest point strategy


def fps(x, n: int, l: int | None = None, seed: int = 0, first: int | None = None):
    """Farthest point selection of ``n`` rows.

    A uniformly random pool of ``l`` candidates is drawn first (all of them
    when ``l`` is None), the first pick is uniform within the pool, and each
    later pick maximises its minimum euclidean distance to those already
    chosen. Exact ties go to the lowest index.

    ``x`` may be a feature matrix or a precomputed :class:`DistanceMatrix`.
    ``first`` forces the initial pick; it must belong to the pool.
    """
    seed = _check_seed(seed)
    if isinstance(x, DistanceMatrix):
        dist = x.values
        total = dist.shape[0]

        def dist_from(i, cand):
            return dist[i, cand]

    else:
        feats = as_feature_matrix(x)
        total = feats.shape[0]

        def dist_from(i, cand):
            return np.sqrt(np.sum((feats[cand] - feats[i]) ** 2, axis=1))

    l = total if l is None else int(l)
    if l > total:
        raise UsageError(f"l={l} exceeds the number of samples ({total})")
    n = _check_n(n, l, what="pool size l")

    rng = np.random.default_rng(seed)
    if l < total:
        pool = np.sort(rng.choice(total, size=l, replace=False))
    else:
        pool = np.arange(total)
    if first is None:
        start = int(pool[rng.integers(l)])
    else:
        start = int(first)
        if start not in set(pool.tolist()):
            raise UsageError(f"forced first index {start} is not in the candidate pool")

    chosen = [start]
    min_dist = dist_from(start, pool).astype(np.float64)
    min_dist[pool == start] = -np.inf
    for _ in range(n - 1):
        pos = int(np.argmax(min_dist))
        nxt = int(pool[pos])
        chosen.append(nxt)
        np.minimum(min_dist, dist_from(nxt, pool), out=min_dist)
        min_dist[pos] = -np.inf
    return SelectionResult(chosen, "fps", seed, {"l": l})


# --------------------------------------------------------------------------
# K-means


@dataclass(frozen=True)
class KMeansFit:
    centroids: np.ndarray
    labels: np.ndarray
    objective_history: list[float]
    n_iter: int
    converged: bool


def _sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    picked = [int(rng.integers(n))]
    closest = np.sum((x - x[picked[0]]) ** 2, axis=1)
    for _ in range(k - 1):
        total = closest.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=closest / total))
        else:
            # every point coincides with a centre already; pick any unused row
            free = np.setdiff1d(np.arange(n), picked)
            nxt = int(free[rng.integers(free.size)])
        picked.append(nxt)
        np.minimum(closest, np.sum((x - x[nxt]) ** 2, axis=1), out=closest)
    return x[picked].copy()


def kmeans(x, k: int, seed: int = 0, max_iter: int = 300) -> KMeansFit:
    """Lloyd's algorithm with seeded k-means++ initialisation.

    Stops when assignments no longer change or after ``max_iter`` rounds.
    A cluster that empties is refilled with the point farthest from its own
    centroid. ``objective_history`` records the within-cluster sum of squares
    after every assignment step.
    """
    x = as_feature_matrix(x)
    seed = _check_seed(seed)
    k = _check_n(k, x.shape[0])
    if max_iter < 1:
        raise UsageError(f"max_iter must be at least 1, got {max_iter}")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(x, k, rng)
    labels = np.full(x.shape[0], -1)
    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sq_dists(x, centroids)
        new_labels = np.argmin(d2, axis=1)
        counts = np.bincount(new_labels, minlength=k)
        for empty in np.flatnonzero(counts == 0):
            own = d2[np.arange(x.shape[0]), new_labels]
            # only steal from clusters that keep at least one member
            own[counts[new_labels] <= 1] = -np.inf
            far = int(np.argmax(own))
            counts[new_labels[far]] -= 1
            new_labels[far] = empty
            counts[empty] = 1
            centroids[empty] = x[far]
            d2[far] = np.inf
            d2[far, empty] = 0.0
        history.append(float(np.sum((x - centroids[new_labels]) ** 2)))
        if np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
        for c in range(k):
            centroids[c] = x[labels == c].mean(axis=0)
    return KMeansFit(centroids, labels, history, it, converged)


def kmeans_representatives(x, n: int, seed: int = 0, max_iter: int = 300):
    """One representative per K-means cluster (``K = n``).

    For each cluster, in label order, the member closest to the centroid is
    returned; ties (up to rounding of the centroid) go to the lowest index.
    """
    x = as_feature_matrix(x)
    fit = kmeans(x, n, seed=seed, max_iter=max_iter)
    reps = []
    for c in range(n):
        members = np.flatnonzero(fit.labels == c)
        dist = np.sqrt(np.sum((x[members] - fit.centroids[c]) ** 2, axis=1))
        # distances equal up to centroid rounding error count as ties
        slack = 1e-9 * (dist.min() + np.abs(fit.centroids[c]).max())
        reps.append(int(members[np.flatnonzero(dist <= dist.min() + slack)[0]]))
    params = {"max_iter": max_iter, "n_iter": fit.n_iter, "converged": fit.converged}
    return SelectionResult(reps, "kmeans", int(seed), params)


# --------------------------------------------------------------------------
# Uniformization


def knn_radius(x, k: int) -> np.ndarray:
    """Distance from every row to its k-th nearest other row."""
    x = as_feature_matrix(x)
    n = x.shape[0]
    if n < 2:
        raise UsageError("k-NN density needs at least two samples")
    if not 1 <= k <= n - 1:
        raise UsageError(f"k must lie in [1, {n - 1}], got {k}")
    # querying k+1 neighbours includes the point itself at distance zero
    dist, _ = cKDTree(x).query(x, k=k + 1)
    return dist[:, k]


def knn_density_weights(x, k: int) -> UniformizationWeights:
    """Sampling probabilities proportional to ``rho_k ** d``.

    This is the reciprocal of the k-NN density estimate, normalised; the ball
    volume constant cancels and is never evaluated. Work is done in log space
    so large ``d`` does not overflow.
    """
    x = as_feature_matrix(x)
    rho = knn_radius(x, k)
    if not np.any(rho > 0):
        raise DegenerateDataError(
            "every point has k coincident neighbours; the density estimate is infinite"
        )
    d = x.shape[1]
    return UniformizationWeights(_power_weights(rho, d), int(k), d, rho)


def _power_weights(rho: np.ndarray, d: int) -> np.ndarray:
    with np.errstate(divide="ignore"):
        logw = d * np.log(rho)
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


def weighted_sample_without_replacement(weights, n: int, seed: int = 0) -> list[int]:
    """Sequential weighted draws; each drawn index leaves the pool."""
    seed = _check_seed(seed)
    w = np.array(weights, dtype=np.float64)
    if w.ndim != 1 or np.any(~np.isfinite(w)) or np.any(w < 0):
        raise UsageError("weights must be a 1-D array of finite nonnegative numbers")
    positive = int(np.count_nonzero(w))
    if n > positive:
        raise DegenerateDataError(
            f"cannot draw {n} items: only {positive} have positive weight"
        )
    rng = np.random.default_rng(seed)
    drawn = []
    for _ in range(n):
        i = int(rng.choice(w.size, p=w / w.sum()))
        drawn.append(i)
        w[i] = 0.0
    return drawn


def kept_count(tau: float, total: int) -> int:
    # tolerate representation error such as 0.3 * 10 = 3.0000000000000004
    return min(total, max(1, math.ceil(tau * total - 1e-9)))


def uniformization(x, n: int, k: int = 6, tau: float = 1.0, seed: int = 0):
    """Draw ``n`` rows with probability inversely proportional to density.

    Only the ``ceil(tau * len(x))`` rows with the highest estimated density
    (smallest k-NN radius, ties to the lowest index) are eligible; weights are
    renormalised over that kept set.
    """
    x = as_feature_matrix(x)
    if not 0 < tau <= 1:
        raise UsageError(f"tau must lie in (0, 1], got {tau}")
    total = x.shape[0]
    m = kept_count(tau, total)
    n = _check_n(n, m, what="number of kept samples")
    uw = knn_density_weights(x, k)
    kept = np.sort(np.argsort(uw.rho, kind="stable")[:m])
    if not np.any(uw.rho[kept] > 0):
        raise DegenerateDataError("all kept samples have zero k-NN radius")
    w = _power_weights(uw.rho[kept], uw.dim_used)
    local = weighted_sample_without_replacement(w, n, seed)
    indices = [int(kept[i]) for i in local]
    return SelectionResult(indices, "uniformization", int(seed), {"k": int(k), "tau": tau})


# --------------------------------------------------------------------------
# posterior baseline


def random_subset(n: int, n_total: int, seed: int = 0) -> SelectionResult:
    seed = _check_seed(seed)
    n = _check_n(n, n_total)
    rng = np.random.default_rng(seed)
    indices = rng.choice(n_total, size=n, replace=False)
    return SelectionResult([int(i) for i in indices], "random", seed, {})


# --------------------------------------------------------------------------


Sampler = Callable[[np.ndarray, int, int], SelectionResult]


def make_sampler(method: str, **params) -> Sampler:
    """Bind a strategy name and its parameters into ``sampler(x, n, seed)``.

    For ``fps`` an ``l`` of None means "the whole set given to the call".
    """
    if method == "fps":
        l = params.get("l")
        return lambda x, n, seed: fps(x, n, l=l, seed=seed)
    if method == "kmeans":
        max_iter = params.get("max_iter", 300)
        return lambda x, n, seed: kmeans_representatives(x, n, seed=seed, max_iter=max_iter)
    if method == "uniformization":
        k = params.get("k", 6)
        tau = params.get("tau", 1.0)

        def sampler(x, n, seed):
            # k can never exceed the subset size minus one
            kk = min(k, len(x) - 1)
            m = kept_count(tau, len(x))
            return uniformization(x, min(n, m), k=kk, tau=tau, seed=seed)

        return sampler
    if method == "random":
        return lambda x, n, seed: random_subset(n, len(x), seed=seed)
    raise UsageError(f"unknown method {method!r}; expected one of {METHODS}")
