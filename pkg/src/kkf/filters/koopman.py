"""Koopman Kalman filter: a Kalman recursion on kernel feature vectors."""

from __future__ import annotations

import time

import numpy as np

from kkf.filters.base import FilterTrace, GaussianPrior, check_finite, kalman_gain, symmetrize
from kkf.filters.kalman import _observations
from kkf.kedmd import KoopmanModel, _draw
from kkf.systems import _noise_factor


def _centered_factor(samples: np.ndarray) -> np.ndarray:
    """``L`` with ``L L^T`` the unbiased covariance of the columns of ``samples``."""
    m = samples.shape[1]
    return (samples - samples.mean(axis=1, keepdims=True)) / np.sqrt(m - 1)


def _compress(L: np.ndarray) -> np.ndarray:
    """An equivalent factor with at most ``L.shape[0]`` columns (via QR of ``L^T``)."""
    if L.shape[1] <= L.shape[0]:
        return L
    return np.linalg.qr(L.T, mode="r").T


def kkf(system, model: KoopmanModel, prior: GaussianPrior, observations, n_samples: int = 100,
        rng=None, freeze_R: bool = False, keep_feature_cov: bool = True,
        record_steps: bool = False) -> FilterTrace:
    """Filter ``observations`` with the fitted Koopman model.

    Per step the state mean is predicted in the original space from
    ``n_samples`` draws of ``f(x, .)`` and re-embedded; the same draws give
    the feature-space process covariance. ``U`` only propagates the feature
    covariance; ``B`` lifts the posterior feature mean and covariance back.
    With ``freeze_R`` the system's observation covariance replaces the
    per-step sample estimate.

    The feature covariance is carried as a square-root factor and updated in
    Joseph form, so ``S`` stays positive semi-definite even when ``U`` and
    ``C`` are large (ill-conditioned Gram matrices).

    ``record_steps`` stores the a priori covariance, gain and observation
    covariance of every step in ``trace.extras["steps"]``.
    """
    if n_samples < 2:
        raise ValueError(f"n_samples must be at least 2, got {n_samples}")
    t0 = time.perf_counter()
    rng = np.random.default_rng(rng)
    Y = _observations(observations, system.p)
    n, T, N = system.n, Y.shape[1], model.N
    U, C, B = model.U, model.C, model.B

    x = prior.mean.copy()
    z = model.embed(x)
    Lz = _centered_factor(model.embed_batch(_draw(prior, rng, n_samples)))

    est = np.empty((n, T + 1))
    covs = np.empty((T + 1, n, n))
    innov = np.empty((system.p, T))
    zs = np.empty((N, T + 1))
    pzs = np.empty((T + 1, N, N)) if keep_feature_cov else None
    steps = []
    est[:, 0], covs[0], zs[:, 0] = x, prior.cov, z
    if keep_feature_cov:
        pzs[0] = symmetrize(Lz @ Lz.T)
    R_factor = _noise_factor(system.obs_cov) if freeze_R else None

    for k in range(T):
        succ = system.step_samples(x, n_samples, rng)
        x_pred = succ.mean(axis=1)
        check_finite(x_pred, k + 1, "a priori state")
        z_pred = model.embed(x_pred)
        # square-root factors: P- = L- L-^T with L- = [U Lz, Q_k factor]
        L_pred = np.concatenate([U @ Lz, _centered_factor(model.embed_batch(succ))], axis=1)

        obs = system.obs_samples(x_pred, n_samples, rng)
        y_pred = obs.mean(axis=1)
        e = Y[:, k] - y_pred
        Lr = R_factor if freeze_R else _centered_factor(obs)
        CL = C @ L_pred
        S = CL @ CL.T + Lr @ Lr.T
        K = kalman_gain(L_pred @ CL.T, S, step=k + 1)

        z = z_pred + K @ e
        x = B @ z
        check_finite(x, k + 1)
        # Joseph form (I-KC) P- (I-KC)^T + K R K^T, carried as a factor
        Lz = _compress(np.concatenate([L_pred - K @ CL, K @ Lr], axis=1))

        BL = B @ Lz
        est[:, k + 1] = x
        covs[k + 1] = symmetrize(BL @ BL.T)
        innov[:, k] = e
        zs[:, k + 1] = z
        if keep_feature_cov:
            pzs[k + 1] = symmetrize(Lz @ Lz.T)
        if record_steps:
            steps.append({"P_pred": L_pred @ L_pred.T, "K": K, "R": Lr @ Lr.T, "S": S})

    trace = FilterTrace("kkf", est, covs, innov, feature_state=zs,
                        feature_cov=pzs if keep_feature_cov else symmetrize(Lz @ Lz.T)[None],
                        wall_time=time.perf_counter() - t0, dof=n_samples - 1)
    if record_steps:
        trace.extras["steps"] = steps
    return trace
