"""An exactly solvable restoration problem.

The prior is a Gaussian mixture, the degradation is ``y = H x + noise``, so
the posterior is again a Gaussian mixture and every quantity a diffusion
sampler needs (diffused marginals, scores, clean-signal estimates) has a
closed form. This lets the diversity guidance be exercised end to end
without a trained network.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.special import logsumexp

from .errors import DataError, UsageError
from .features import as_feature_matrix


@dataclass(frozen=True)
class GaussianMixture:
    """Mixture with either diagonal ``variances`` (J, d) or full ``covariances`` (J, d, d)."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray | None = None
    covariances: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        mu = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        if w.size != mu.shape[0]:
            raise DataError(f"{w.size} weights but {mu.shape[0]} means")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise DataError("weights must be positive and sum to 1")
        if (self.variances is None) == (self.covariances is None):
            raise DataError("give exactly one of variances or covariances")
        if self.variances is not None:
            v = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))
            if v.shape != mu.shape:
                raise DataError(f"variances shape {v.shape} does not match means {mu.shape}")
            if np.any(v <= 0):
                raise DataError("variances must be positive")
            object.__setattr__(self, "variances", v)
        else:
            c = np.asarray(self.covariances, dtype=np.float64)
            if c.shape != (mu.shape[0], mu.shape[1], mu.shape[1]):
                raise DataError(f"covariances shape {c.shape} does not match means {mu.shape}")
            try:
                np.linalg.cholesky(c)
            except np.linalg.LinAlgError:
                raise DataError("covariances must be symmetric positive definite") from None
            object.__setattr__(self, "covariances", c)

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def is_diagonal(self) -> bool:
        return self.variances is not None

    def full_covariances(self) -> np.ndarray:
        if self.covariances is not None:
            return self.covariances
        j, d = self.means.shape
        out = np.zeros((j, d, d))
        out[:, np.arange(d), np.arange(d)] = self.variances
        return out

    def max_variances(self) -> np.ndarray:
        """Largest per-component variance along any direction."""
        if self.variances is not None:
            return self.variances.max(axis=1)
        return np.linalg.eigvalsh(self.covariances)[:, -1]

    def to_dict(self) -> dict:
        d = {"weights": self.weights.tolist(), "means": self.means.tolist()}
        if self.variances is not None:
            d["variances"] = self.variances.tolist()
        else:
            d["covariances"] = self.covariances.tolist()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianMixture":
        try:
            return cls(
                weights=d["weights"],
                means=d["means"],
                variances=d.get("variances"),
                covariances=d.get("covariances"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, DataError):
                raise
            raise DataError(f"malformed mixture: {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "GaussianMixture":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise DataError(f"malformed mixture JSON: {exc}") from None


FIG4_RADIUS = 8.0
FIG4_VARIANCE = 0.25
FIG4_CENTRAL_WEIGHT = 0.95


def make_fig4_mixture() -> GaussianMixture:
    """Ten 2-D Gaussians: one heavy central mode plus nine on a ring.

    The central mode at the origin carries 95% of the mass; the rest is
    split evenly over nine modes at radius 8, angles ``2*pi*j/9``. Every
    component has variance 0.25 per axis.
    """
    angles = 2 * np.pi * np.arange(9) / 9
    ring = FIG4_RADIUS * np.column_stack([np.cos(angles), np.sin(angles)])
    means = np.vstack([np.zeros((1, 2)), ring])
    outer = (1 - FIG4_CENTRAL_WEIGHT) / 9
    weights = np.array([FIG4_CENTRAL_WEIGHT] + [outer] * 9)
    weights /= weights.sum()
    return GaussianMixture(weights, means, variances=np.full((10, 2), FIG4_VARIANCE))


def gmm_sample(g: GaussianMixture, n: int, seed: int = 0) -> np.ndarray:
    if n < 1:
        raise UsageError(f"n must be at least 1, got {n}")
    rng = np.random.default_rng(seed)
    comp = rng.choice(g.n_components, size=n, p=g.weights)
    z = rng.standard_normal((n, g.dim))
    if g.is_diagonal:
        return g.means[comp] + np.sqrt(g.variances[comp]) * z
    chol = np.linalg.cholesky(g.covariances)
    return g.means[comp] + np.einsum("nij,nj->ni", chol[comp], z)


def component_of(g: GaussianMixture, x) -> np.ndarray:
    """Most responsible component for every row of ``x``."""
    return np.argmax(_component_log_joint(g, x), axis=1)


def _component_log_joint(g: GaussianMixture, x) -> np.ndarray:
    """log w_j + log N(x; mu_j, Sigma_j) for rows of x, shape (n, J)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != g.dim:
        raise DataError(f"dimension mismatch: mixture has d={g.dim}, point has {x.shape[1]}")
    diff = x[:, None, :] - g.means[None, :, :]
    d = g.dim
    if g.is_diagonal:
        maha = np.sum(diff**2 / g.variances[None], axis=2)
        logdet = np.sum(np.log(g.variances), axis=1)
    else:
        chol = np.linalg.cholesky(g.covariances)
        sol = np.linalg.solve(chol[None], diff[..., None])[..., 0]
        maha = np.sum(sol**2, axis=2)
        logdet = 2 * np.sum(np.log(np.diagonal(chol, axis1=1, axis2=2)), axis=1)
    return np.log(g.weights)[None] - 0.5 * (maha + logdet[None] + d * np.log(2 * np.pi))


def gmm_logpdf(g: GaussianMixture, x):
    """Log density at a point (returns a float) or at each row (returns an array)."""
    arr = np.asarray(x, dtype=np.float64)
    out = logsumexp(_component_log_joint(g, arr), axis=1)
    return float(out[0]) if arr.ndim == 1 else out


# --------------------------------------------------------------------------
# measurement model and conjugate posterior


@dataclass(frozen=True)
class InverseProblem:
    h: np.ndarray
    noise_std: float
    y: np.ndarray

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.h, dtype=np.float64))
        y = np.atleast_1d(np.asarray(self.y, dtype=np.float64))
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "y", y)
        m, d = h.shape
        if m > d:
            raise DataError(f"measurement matrix has more rows ({m}) than unknowns ({d})")
        if np.linalg.matrix_rank(h) < m:
            raise DataError("measurement matrix must have full row rank")
        if y.shape != (m,):
            raise DataError(f"measurement has shape {y.shape}, expected ({m},)")
        if self.noise_std < 0:
            raise UsageError(f"noise_std must be nonnegative, got {self.noise_std}")

    def to_dict(self) -> dict:
        return {"h": self.h.tolist(), "noise_std": self.noise_std, "y": self.y.tolist()}


DEFAULT_NOISE_STD = 0.05
# x-coordinate shared by the ring modes at 80 and 280 degrees
DEFAULT_Y = FIG4_RADIUS * np.cos(2 * np.pi * 2 / 9)


def default_inverse_problem(y: float = DEFAULT_Y) -> InverseProblem:
    """Observe the first coordinate of a 2-D point with noise std 0.05."""
    return InverseProblem(np.array([[1.0, 0.0]]), DEFAULT_NOISE_STD, np.array([y]))


def gmm_posterior(g: GaussianMixture, prob: InverseProblem) -> GaussianMixture:
    """Exact posterior of a Gaussian-mixture prior under a linear-Gaussian measurement.

    Each component is updated in Kalman form; component weights are
    reweighted by the evidence ``N(y; H mu_j, H Sigma_j H^T + s^2 I)``. The
    result is stored diagonally whenever every posterior covariance is
    exactly diagonal.
    """
    if prob.noise_std <= 0:
        raise UsageError("noise_std must be positive; noiseless posteriors are not supported")
    h = prob.h
    if h.shape[1] != g.dim:
        raise DataError(f"measurement acts on d={h.shape[1]}, mixture has d={g.dim}")
    sigma2 = prob.noise_std**2
    covs = g.full_covariances()
    m = h.shape[0]
    post_means = np.empty_like(g.means)
    post_covs = np.empty_like(covs)
    log_ev = np.empty(g.n_components)
    for j in range(g.n_components):
        s = h @ covs[j] @ h.T + sigma2 * np.eye(m)
        gain = np.linalg.solve(s, h @ covs[j]).T
        resid = prob.y - h @ g.means[j]
        post_means[j] = g.means[j] + gain @ resid
        c = covs[j] - gain @ h @ covs[j]
        post_covs[j] = 0.5 * (c + c.T)
        _, logdet = np.linalg.slogdet(s)
        log_ev[j] = -0.5 * (resid @ np.linalg.solve(s, resid) + logdet + m * np.log(2 * np.pi))
    logw = np.log(g.weights) + log_ev
    weights = np.exp(logw - logsumexp(logw))
    weights = np.maximum(weights, np.finfo(float).tiny)
    weights /= weights.sum()
    off = post_covs.copy()
    off[:, np.arange(g.dim), np.arange(g.dim)] = 0.0
    if not np.any(off):
        diag = np.diagonal(post_covs, axis1=1, axis2=2).copy()
        return GaussianMixture(weights, post_means, variances=diag)
    return GaussianMixture(weights, post_means, covariances=post_covs)


# --------------------------------------------------------------------------
# variance-preserving diffusion


@dataclass(frozen=True)
class DiffusionSchedule:
    """Noise levels for steps ``1..T``; ``alpha_bars[0] == 1`` is the clean signal."""

    betas: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.betas, dtype=np.float64).ravel()
        if b.size < 1 or np.any(b <= 0) or np.any(b >= 1):
            raise UsageError("betas must be a non-empty sequence in (0, 1)")
        object.__setattr__(self, "betas", b)

    @property
    def t_max(self) -> int:
        return self.betas.size

    @property
    def alpha_bars(self) -> np.ndarray:
        return np.concatenate([[1.0], np.cumprod(1.0 - self.betas)])

    def beta(self, t: int) -> float:
        return float(self.betas[t - 1])


DEFAULT_T_MAX = 100
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.1


def linear_schedule(
    t_max: int = DEFAULT_T_MAX,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
) -> DiffusionSchedule:
    if t_max < 1:
        raise UsageError(f"t_max must be at least 1, got {t_max}")
    return DiffusionSchedule(np.linspace(beta_start, beta_end, t_max))


def schedule_to_dict(t_max: int, beta_start: float, beta_end: float) -> dict:
    return {"t_max": t_max, "beta_start": beta_start, "beta_end": beta_end}


def diffused_gmm(g: GaussianMixture, alpha_bar: float) -> GaussianMixture:
    """Marginal of ``sqrt(ab) x0 + sqrt(1 - ab) eps`` for ``x0 ~ g``."""
    if not 0 < alpha_bar <= 1:
        raise UsageError(f"alpha_bar must lie in (0, 1], got {alpha_bar}")
    means = np.sqrt(alpha_bar) * g.means
    if g.is_diagonal:
        return GaussianMixture(g.weights, means, variances=alpha_bar * g.variances + (1 - alpha_bar))
    covs = alpha_bar * g.covariances + (1 - alpha_bar) * np.eye(g.dim)[None]
    return GaussianMixture(g.weights, means, covariances=covs)


def _responsibilities(g: GaussianMixture, x: np.ndarray) -> np.ndarray:
    lj = _component_log_joint(g, x)
    return np.exp(lj - logsumexp(lj, axis=1, keepdims=True))


def score(g: GaussianMixture, x_t, alpha_bar: float) -> np.ndarray:
    """Gradient of the diffused log density, for one point or a batch of rows."""
    x = np.asarray(x_t, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    gt = diffused_gmm(g, alpha_bar)
    resp = _responsibilities(gt, x)
    diff = x[:, None, :] - gt.means[None]
    if gt.is_diagonal:
        comp_scores = -diff / gt.variances[None]
    else:
        prec = np.linalg.inv(gt.covariances)
        comp_scores = -np.einsum("jab,njb->nja", prec, diff)
    out = np.einsum("nj,nja->na", resp, comp_scores)
    return out[0] if single else out


def tweedie_x0(g: GaussianMixture, x_t, schedule: DiffusionSchedule, t: int) -> np.ndarray:
    """Posterior-mean clean signal ``(x_t + (1 - ab) * score) / sqrt(ab)``."""
    if not 1 <= t <= schedule.t_max:
        raise UsageError(f"t must lie in [1, {schedule.t_max}], got {t}")
    ab = schedule.alpha_bars[t]
    return (np.asarray(x_t, dtype=np.float64) + (1 - ab) * score(g, x_t, ab)) / np.sqrt(ab)


def x0_posterior_cov(g: GaussianMixture, x_t, alpha_bar: float) -> np.ndarray:
    """Cov[x0 | x_t] under the mixture prior, one (d, d) matrix per row of ``x_t``."""
    x = np.atleast_2d(np.asarray(x_t, dtype=np.float64))
    covs = g.full_covariances()
    eye = np.eye(g.dim)
    gt_cov = alpha_bar * covs + (1 - alpha_bar) * eye[None]
    # gain_j = sqrt(ab) Sigma_j (ab Sigma_j + (1 - ab) I)^-1
    gain = np.sqrt(alpha_bar) * np.linalg.solve(gt_cov, covs).transpose(0, 2, 1)
    comp_cov = covs - np.sqrt(alpha_bar) * gain @ covs
    resid = x[:, None, :] - np.sqrt(alpha_bar) * g.means[None]
    comp_mean = g.means[None] + np.einsum("jab,njb->nja", gain, resid)
    resp = _responsibilities(diffused_gmm(g, alpha_bar), x)
    mean = np.einsum("nj,nja->na", resp, comp_mean)
    second = np.einsum("nj,jab->nab", resp, comp_cov) + np.einsum(
        "nj,nja,njb->nab", resp, comp_mean, comp_mean
    )
    cov = second - mean[:, :, None] * mean[:, None, :]
    return 0.5 * (cov + cov.transpose(0, 2, 1))


def ddpm_coefficients(schedule: DiffusionSchedule, t: int) -> tuple[float, float, float]:
    """Weights on (x0_hat, x_t) of the ancestral mean, and its variance."""
    if not 1 <= t <= schedule.t_max:
        raise UsageError(f"t must lie in [1, {schedule.t_max}], got {t}")
    ab = schedule.alpha_bars
    beta = schedule.beta(t)
    c_x0 = np.sqrt(ab[t - 1]) * beta / (1 - ab[t])
    c_xt = np.sqrt(1 - beta) * (1 - ab[t - 1]) / (1 - ab[t])
    var = (1 - ab[t - 1]) * beta / (1 - ab[t])
    return float(c_x0), float(c_xt), float(var)


def ddpm_step(x_t, x0_hat, schedule: DiffusionSchedule, t: int, seed=None, x0_cov=None, noise=None):
    """One ancestral step from ``x_t`` to ``x_{t-1}``.

    The mean recombines ``x0_hat`` and ``x_t``; the noise variance is
    ``beta_tilde_t``. When ``x0_cov`` (per-row Cov[x0 | x_t]) is given the
    variance becomes ``beta_tilde_t I + c_x0**2 x0_cov``, which matches the
    second moment of the exact reverse transition. No noise is added at
    ``t == 1``. ``seed`` may be an int or a ``numpy.random.Generator``;
    ``noise`` supplies the standard-normal draw directly.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    c_x0, c_xt, var = ddpm_coefficients(schedule, t)
    mean = c_x0 * np.asarray(x0_hat, dtype=np.float64) + c_xt * x_t
    if t == 1:
        return mean
    z = np.random.default_rng(seed).standard_normal(x_t.shape) if noise is None else noise
    if x0_cov is None:
        return mean + np.sqrt(var) * z
    cov = var * np.eye(x_t.shape[-1]) + c_x0**2 * np.asarray(x0_cov)
    chol = np.linalg.cholesky(cov)
    if x_t.ndim == 1:
        return mean + chol.reshape(x_t.size, x_t.size) @ z
    return mean + np.einsum("nij,nj->ni", chol, z)


@dataclass(frozen=True)
class DiffusionBatch:
    states: np.ndarray
    x0_predictions: np.ndarray
    t: int


def iterate_batch(
    g: GaussianMixture,
    n: int,
    schedule: DiffusionSchedule,
    seed: int = 0,
    guidance=None,
    variance: str = "analytic",
) -> Iterator[DiffusionBatch]:
    """Run ``n`` chains jointly from ``t = T`` down to 1.

    Yields the batch at each step after the clean-signal predictions (and
    the guidance update, if any) have been formed and before recombination.
    Chain ``i`` draws all of its noise from a generator seeded with
    ``seed + i``.
    """
    from .guidance import diversity_guidance_step

    if n < 1:
        raise UsageError(f"n must be at least 1, got {n}")
    if variance not in ("analytic", "tilde"):
        raise UsageError(f"variance must be 'analytic' or 'tilde', got {variance!r}")
    if schedule.alpha_bars[-1] >= 0.01:
        raise UsageError("schedule must reach alpha_bar_T < 0.01 to start from pure noise")
    if guidance is not None and n < 2:
        raise UsageError("guidance needs a batch of at least two chains")
    rngs = [np.random.default_rng(seed + i) for i in range(n)]
    x = np.stack([r.standard_normal(g.dim) for r in rngs])
    t_max = schedule.t_max
    for t in range(t_max, 0, -1):
        x0 = tweedie_x0(g, x, schedule, t)
        if guidance is not None and guidance.eta > 0:
            x0 = diversity_guidance_step(x0, guidance, t, t_max)
        yield DiffusionBatch(x, x0, t)
        if t == 1:
            x = x0
            break
        z = np.stack([r.standard_normal(g.dim) for r in rngs])
        cov = x0_posterior_cov(g, x, schedule.alpha_bars[t]) if variance == "analytic" else None
        x = ddpm_step(x, x0, schedule, t, x0_cov=cov, noise=z)


def sample_batch(
    g: GaussianMixture,
    n: int,
    schedule: DiffusionSchedule | None = None,
    seed: int = 0,
    guidance=None,
    variance: str = "analytic",
) -> np.ndarray:
    """Final clean samples of ``n`` jointly run chains (see :func:`iterate_batch`)."""
    schedule = linear_schedule() if schedule is None else schedule
    last = None
    for last in iterate_batch(g, n, schedule, seed, guidance, variance):
        pass
    return as_feature_matrix(last.x0_predictions)
