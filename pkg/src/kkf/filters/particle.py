"""Bootstrap particle filter with systematic resampling."""

from __future__ import annotations

import time

import numpy as np
from scipy.special import logsumexp

from kkf.errors import NumericalError
from kkf.filters.base import FilterTrace, GaussianPrior, symmetrize
from kkf.filters.kalman import _observations


def systematic_resample(weights: np.ndarray, rng) -> np.ndarray:
    """Indices drawn with one uniform offset and ``len(weights)`` even strata."""
    Np = weights.shape[0]
    positions = (rng.random() + np.arange(Np)) / Np
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, positions, side="right").clip(max=Np - 1)


def gaussian_loglik(residuals: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Log-density of ``N(0, R)`` at each column of ``residuals`` (up to a constant)."""
    L = np.linalg.cholesky(R)
    z = np.linalg.solve(L, residuals)
    return -0.5 * np.sum(z * z, axis=0)


def particle_filter(system, prior: GaussianPrior, observations, N_p: int = 1000,
                    rng=None) -> FilterTrace:
    """Bootstrap filter: propagate, weight by the Gaussian likelihood, resample.

    ``trace.extras["weight_sums"]`` keeps the normalized weight total per step.
    """
    if N_p < 2:
        raise ValueError(f"N_p must be at least 2, got {N_p}")
    t0 = time.perf_counter()
    rng = np.random.default_rng(rng)
    Y = _observations(observations, system.p)
    n, T = system.n, Y.shape[1]
    R = system.obs_cov

    particles = prior.sample(rng, N_p)
    est = np.empty((n, T + 1))
    covs = np.empty((T + 1, n, n))
    innov = np.empty((system.p, T))
    est[:, 0], covs[0] = prior.mean, prior.cov
    weight_sums = np.empty(T)

    for k in range(T):
        particles = system.step_batch(particles, rng)
        pred_obs = system.observe(particles)
        innov[:, k] = Y[:, k] - pred_obs.mean(axis=1)
        logw = gaussian_loglik(Y[:, k][:, None] - pred_obs, R)
        logw[~np.isfinite(logw)] = -np.inf
        norm = logsumexp(logw)
        if not np.isfinite(norm):
            raise NumericalError("all particle weights vanished (likelihood underflow)", step=k + 1)
        w = np.exp(logw - norm)
        weight_sums[k] = w.sum()
        mean = particles @ w
        D = particles - mean[:, None]
        est[:, k + 1] = mean
        covs[k + 1] = symmetrize((D * w) @ D.T)
        particles = particles[:, systematic_resample(w, rng)]

    trace = FilterTrace("pf", est, covs, innov, wall_time=time.perf_counter() - t0,
                        dof=N_p - 1)
    trace.extras["weight_sums"] = weight_sums
    return trace
