"""Per-frame Gaussian mixture models and the GMM soft distance.

Fitting is plain EM over full (or diagonal) covariances. Membership is the
weighted sum of *unnormalised* Gaussian kernels,

    P(q) = sum_k alpha_k * exp(-0.5 (q-mu_k)^T Sigma_k^-1 (q-mu_k)),

deliberately without the (2pi)^{d/2}|Sigma|^{1/2} factor, so P lies in
(0, 1] and the soft distance exp(-P) lies in [1/e, 1). Anyone expecting
density values must note the missing constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

MAX_EM_ITER = 200
REL_LL_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class GmmModel:
    """A fitted mixture: weights (G,), means (G, d), covariances (G, d, d)."""

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    _precisions: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        mu = np.asarray(self.means, dtype=float)
        cov = np.asarray(self.covariances, dtype=float)
        if w.ndim != 1 or mu.ndim != 2 or cov.ndim != 3:
            raise ValueError("weights must be (G,), means (G,d), covariances (G,d,d)")
        g, d = mu.shape
        if w.shape != (g,) or cov.shape != (g, d, d):
            raise ValueError("inconsistent component shapes")
        if abs(float(w.sum()) - 1.0) > 1e-9:
            raise ValueError(f"mixture weights must sum to 1 (got {w.sum()!r})")
        if np.any(w <= 0):
            raise ValueError("mixture weights must be positive")
        if not np.array_equal(cov, np.swapaxes(cov, 1, 2)):
            raise ValueError("covariances must be exactly symmetric")
        np.linalg.cholesky(cov)  # raises LinAlgError if not positive-definite
        for name, arr in (("weights", w), ("means", mu), ("covariances", cov)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_precisions", np.linalg.inv(cov))

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def gmm_membership(q: np.ndarray, model: GmmModel) -> float:
    """Weighted sum of unnormalised Gaussian kernels at q; in (0, 1]."""
    q = np.asarray(q, dtype=float)
    if q.shape != (model.dim,):
        raise ValueError(f"expected a {model.dim}-vector, got shape {q.shape}")
    diff = q - model.means
    quad = np.einsum("gi,gij,gj->g", diff, model._precisions, diff)
    return float(np.dot(model.weights, np.exp(-0.5 * quad)))


def gmm_soft_distance(q: np.ndarray, model: GmmModel) -> float:
    """exp(-membership): a DTW-compatible dissimilarity in [1/e, 1)."""
    return float(np.exp(-gmm_membership(q, model)))


def _regularization(points: np.ndarray) -> float:
    mean_var = float(np.var(points, axis=0).mean())
    return max(1e-6 * mean_var, 1e-9)


def _kmeanspp_centers(points: np.ndarray, g: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = [points[rng.integers(n)]]
    for _ in range(1, g):
        d2 = np.min(
            [np.sum((points - c) ** 2, axis=1) for c in centers], axis=0)
        total = d2.sum()
        if total <= 0:
            # all remaining mass on existing centers; pick any other point
            probs = np.full(n, 1.0 / n)
        else:
            probs = d2 / total
        centers.append(points[rng.choice(n, p=probs)])
    return np.array(centers)


def _log_densities(points, weights, means, covs):
    """log of the *normalised* component densities, (N, G). Used by EM only."""
    n, d = points.shape
    g = means.shape[0]
    out = np.empty((n, g))
    for k in range(g):
        chol = np.linalg.cholesky(covs[k])
        diff = points - means[k]
        sol = np.linalg.solve(chol, diff.T)
        maha = np.sum(sol * sol, axis=0)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        out[:, k] = -0.5 * (maha + logdet + d * np.log(2.0 * np.pi))
    return out + np.log(weights)


def _em_once(points, g, rng, diagonal, eps):
    n, d = points.shape
    centers = _kmeanspp_centers(points, g, rng)
    assign = np.argmin(
        np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2), axis=1)
    weights = np.empty(g)
    means = np.empty((g, d))
    covs = np.empty((g, d, d))
    for k in range(g):
        members = points[assign == k]
        if members.shape[0] == 0:
            members = centers[k][None, :]
        weights[k] = max(members.shape[0], 1) / n
        means[k] = members.mean(axis=0)
        covs[k] = _cov_of(members, means[k], diagonal) + eps * np.eye(d)
    weights = weights / weights.sum()

    logdens = _log_densities(points, weights, means, covs)
    norm = _logsumexp_rows(logdens)
    ll = float(norm.sum())
    history = [ll]
    for _ in range(MAX_EM_ITER - 1):
        resp = np.exp(logdens - norm[:, None])
        nk = np.maximum(resp.sum(axis=0), 1e-300)
        new_weights = nk / n
        new_weights = new_weights / new_weights.sum()
        new_means = (resp.T @ points) / nk[:, None]
        new_covs = np.empty_like(covs)
        for k in range(g):
            diff = points - new_means[k]
            cov = (resp[:, k][:, None] * diff).T @ diff / nk[k]
            cov = 0.5 * (cov + cov.T)
            if diagonal:
                cov = np.diag(np.diag(cov))
            new_covs[k] = cov + eps * np.eye(d)
        new_logdens = _log_densities(points, new_weights, new_means, new_covs)
        new_norm = _logsumexp_rows(new_logdens)
        new_ll = float(new_norm.sum())
        if new_ll < ll:
            # the covariance floor can push the likelihood down once EM has
            # converged; treat that as convergence and keep the old step
            break
        weights, means, covs = new_weights, new_means, new_covs
        logdens, norm = new_logdens, new_norm
        improved = new_ll - ll
        ll = new_ll
        history.append(ll)
        if improved <= REL_LL_TOL * max(1.0, abs(ll)):
            break
    return weights, means, covs, history


def _cov_of(members, mean, diagonal):
    diff = members - mean
    cov = diff.T @ diff / members.shape[0]
    cov = 0.5 * (cov + cov.T)
    if diagonal:
        cov = np.diag(np.diag(cov))
    return cov


def _logsumexp_rows(a):
    mx = a.max(axis=1)
    return mx + np.log(np.sum(np.exp(a - mx[:, None]), axis=1))


def fit_gmm_em(points: Iterable, n_components: int, seed,
               diagonal: bool = False, restarts: int = 1,
               ) -> tuple[GmmModel, list[float]]:
    """EM fit returning the model and its per-iteration log-likelihood trace.

    The effective component count is min(n_components, distinct points).
    Initialisation is k-means++ from the seeded RNG; covariances get an
    eps*I floor (eps = 1e-6 * mean feature variance, floored at 1e-9) after
    every M-step, which the small per-frame sample sizes make mandatory.
    Iteration stops on relative improvement below 1e-7, after 200 rounds,
    or as soon as the floored step fails to improve the likelihood (the
    floor can push a converged fit down), so the returned trace is
    non-decreasing. Deterministic for a fixed seed.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.size == 0:
        raise ValueError("cannot fit a mixture on an empty point set")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    if n_components < 1:
        raise ValueError("n_components must be >= 1")
    distinct = np.unique(pts, axis=0).shape[0]
    g = min(n_components, distinct)
    eps = _regularization(pts)
    rng = np.random.default_rng(seed)

    best = None
    for _ in range(max(1, restarts)):
        weights, means, covs, history = _em_once(pts, g, rng, diagonal, eps)
        if best is None or history[-1] > best[3][-1]:
            best = (weights, means, covs, history)
    weights, means, covs, history = best
    return GmmModel(weights, means, covs), history


def fit_gmm(points: Iterable, n_components: int, seed,
            diagonal: bool = False, restarts: int = 1) -> GmmModel:
    """EM-fitted mixture; see fit_gmm_em for the exact procedure."""
    model, _ = fit_gmm_em(points, n_components, seed,
                          diagonal=diagonal, restarts=restarts)
    return model
