"""Heavy-tail diagnostics for collections of restorations.

The collection is projected onto its first principal component and the
kurtosis of the projection is compared against what isotropic Gaussians of
the same dimension and sample size produce.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateDataError, UsageError
from .features import as_feature_matrix, pca_fit, pca_project

PERCENTILES = (5, 25, 50, 75, 95)
DEFAULT_THRESHOLDS = (3.0, 4.0, 5.0)


@dataclass(frozen=True)
class KurtosisReport:
    kurtosis: float
    n: int
    mean: float
    variance: float

    def to_dict(self) -> dict:
        return asdict(self)


def kurtosis(samples) -> KurtosisReport:
    """Plain moment estimate ``m4 / m2**2`` (3 for a Gaussian, not 0)."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 4:
        raise UsageError(f"kurtosis needs at least 4 samples, got {x.size}")
    if np.all(x == x[0]):
        raise DegenerateDataError("samples have zero variance")
    mean = x.mean()
    dev = x - mean
    m2 = np.mean(dev**2)
    m4 = np.mean(dev**4)
    return KurtosisReport(float(m4 / m2**2), int(x.size), float(mean), float(m2))


def first_pc_projection(x) -> np.ndarray:
    x = as_feature_matrix(x)
    if x.shape[0] < 4:
        raise UsageError(f"need at least 4 samples, got {x.shape[0]}")
    model = pca_fit(x, 1)
    return pca_project(model, x)[:, 0]


def first_pc_kurtosis(x) -> KurtosisReport:
    return kurtosis(first_pc_projection(x))


@dataclass(frozen=True)
class BaselineStats:
    kurtoses: list[float]
    percentiles: dict[int, float]
    fraction_above: dict[float, float]
    dim: int = 0
    n_samples: int = 0
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "n_samples": self.n_samples,
            "n_trials": len(self.kurtoses),
            "seed": self.seed,
            "percentiles": {str(k): v for k, v in self.percentiles.items()},
            "fraction_above": {repr(float(k)): v for k, v in self.fraction_above.items()},
            "kurtoses": list(self.kurtoses),
        }


def summarize_kurtoses(values, thresholds=DEFAULT_THRESHOLDS) -> tuple[dict, dict]:
    values = np.asarray(values, dtype=np.float64)
    pct = {p: float(np.percentile(values, p)) for p in PERCENTILES}
    above = {float(t): float(np.mean(values > t)) for t in thresholds}
    return pct, above


def gaussian_kurtosis_baseline(
    dim: int, n_samples: int, n_trials: int, seed: int = 0, thresholds=DEFAULT_THRESHOLDS
) -> BaselineStats:
    """First-PC kurtosis of ``n_trials`` isotropic Gaussian sample sets.

    Trial ``i`` draws from its own generator seeded with ``seed + i`` so the
    result does not depend on evaluation order.
    """
    if n_trials < 1 or n_samples < 4 or dim < 1:
        raise UsageError("need n_trials >= 1, n_samples >= 4 and dim >= 1")
    values = []
    for i in range(n_trials):
        rng = np.random.default_rng(seed + i)
        values.append(first_pc_kurtosis(rng.standard_normal((n_samples, dim))).kurtosis)
    pct, above = summarize_kurtoses(values, thresholds)
    return BaselineStats(values, pct, above, dim=dim, n_samples=n_samples, seed=seed)


# --------------------------------------------------------------------------
# two-component 1-D mixture


@dataclass(frozen=True)
class TwoGaussianFit:
    """Two-component 1-D Gaussian mixture, dominant component first."""

    weights: tuple[float, float]
    means: tuple[float, float]
    stds: tuple[float, float]
    log_likelihood: float
    n_iter: int
    converged: bool
    log_likelihood_history: list[float] = field(default_factory=list, repr=False)
    merged: bool = False

    dominant = 0

    def to_dict(self) -> dict:
        return {
            "weights": list(self.weights),
            "means": list(self.means),
            "stds": list(self.stds),
            "log_likelihood": self.log_likelihood,
            "n_iter": self.n_iter,
            "converged": self.converged,
            "dominant": self.dominant,
            "merged": self.merged,
        }


def _component_logpdf(x, means, stds):
    z = (x[:, None] - means[None, :]) / stds[None, :]
    return -0.5 * z**2 - np.log(stds)[None, :] - 0.5 * np.log(2 * np.pi)


def fit_two_gaussian_mixture_1d(
    samples, seed: int = 0, max_iter: int = 500, merge_unresolved: bool = True
) -> TwoGaussianFit:
    """EM fit of a two-component Gaussian mixture.

    Starts from means at the 25th/75th percentiles, both stds equal to the
    sample std and equal weights; stops when the log-likelihood gains less
    than 1e-8 or after ``max_iter`` iterations. Stds are floored at 1e-6 of
    the sample std. The initialisation is deterministic, so ``seed`` is only
    recorded.

    On unimodal data the split into two components is not identifiable and
    the dominant component drifts with sampling noise. With
    ``merge_unresolved`` the fit falls back to a single Gaussian (weights
    ``(1, 0)``, ``merged=True``) whenever the mixture does not beat it on BIC.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 10:
        raise UsageError(f"need at least 10 samples, got {x.size}")
    std = x.std()
    if np.all(x == x[0]):
        raise DegenerateDataError("samples have zero variance")
    floor = 1e-6 * std
    means = np.percentile(x, [25, 75]).astype(np.float64)
    stds = np.array([std, std])
    weights = np.array([0.5, 0.5])

    def loglik(w, m, s):
        return float(np.sum(logsumexp(_component_logpdf(x, m, s) + np.log(w), axis=1)))

    history = [loglik(weights, means, stds)]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        joint = _component_logpdf(x, means, stds) + np.log(weights)
        resp = np.exp(joint - logsumexp(joint, axis=1, keepdims=True))
        nk = resp.sum(axis=0)
        # a component with no responsibility keeps its previous parameters
        nk_safe = np.maximum(nk, 1e-300)
        weights = nk / x.size
        weights = np.maximum(weights, 1e-300)
        weights /= weights.sum()
        new_means = (resp * x[:, None]).sum(axis=0) / nk_safe
        means = np.where(nk > 0, new_means, means)
        var = (resp * (x[:, None] - means[None, :]) ** 2).sum(axis=0) / nk_safe
        stds = np.where(nk > 0, np.maximum(np.sqrt(var), floor), stds)
        history.append(loglik(weights, means, stds))
        if abs(history[-1] - history[-2]) < 1e-8:
            converged = True
            break
    if merge_unresolved:
        single = loglik(np.array([1.0]), np.array([x.mean()]), np.array([std]))
        # three extra free parameters: one weight, one mean, one std
        if history[-1] - single <= 1.5 * np.log(x.size):
            return TwoGaussianFit(
                weights=(1.0, 0.0),
                means=(float(x.mean()), float(x.mean())),
                stds=(float(std), float(std)),
                log_likelihood=single,
                n_iter=it,
                converged=converged,
                log_likelihood_history=history,
                merged=True,
            )
    order = np.argsort(-weights, kind="stable")
    return TwoGaussianFit(
        weights=tuple(float(v) for v in weights[order]),
        means=tuple(float(v) for v in means[order]),
        stds=tuple(float(v) for v in stds[order]),
        log_likelihood=history[-1],
        n_iter=it,
        converged=converged,
        log_likelihood_history=history,
    )


def histogram(values, bins: int) -> list[tuple[float, float, int]]:
    """(left edge, right edge, count) for each of ``bins`` equal-width bins."""
    if bins < 1:
        raise UsageError(f"bins must be at least 1, got {bins}")
    counts, edges = np.histogram(np.asarray(values, dtype=np.float64), bins=bins)
    return [(float(edges[i]), float(edges[i + 1]), int(c)) for i, c in enumerate(counts)]
