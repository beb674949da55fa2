"""Classical Kalman filter and its EKF / UKF extensions."""

from __future__ import annotations

import time

import numpy as np

from kkf.errors import NumericalError
from kkf.filters.base import (
    JITTER_LADDER,
    FilterTrace,
    GaussianPrior,
    check_finite,
    kalman_gain,
    symmetrize,
)


def _observations(observations, p: int) -> np.ndarray:
    Y = np.asarray(observations, float)
    if Y.ndim == 1:
        Y = Y[None, :] if p == 1 else Y[:, None]
    if Y.shape[0] != p:
        raise ValueError(f"observations must have {p} rows, got shape {Y.shape}")
    return Y


def kalman_filter(system, prior: GaussianPrior, observations) -> FilterTrace:
    """Exact Kalman filter for a :class:`~kkf.systems.LinearGaussianSystem`.

    The innovation covariance uses the a priori covariance ``P-``.
    """
    t0 = time.perf_counter()
    A, C, Q, R = system.A, system.C, system.Q, system.R
    Y = _observations(observations, system.p)
    n, T = system.n, Y.shape[1]
    x = prior.mean.copy()
    P = prior.cov.copy()
    est = np.empty((n, T + 1))
    covs = np.empty((T + 1, n, n))
    innov = np.empty((system.p, T))
    est[:, 0], covs[0] = x, P
    I = np.eye(n)
    for k in range(T):
        x_pred = A @ x
        P_pred = A @ P @ A.T + Q
        e = Y[:, k] - C @ x_pred
        S = C @ P_pred @ C.T + R
        K = kalman_gain(P_pred @ C.T, S, step=k + 1, jitter=(0.0,))
        x = x_pred + K @ e
        P = symmetrize((I - K @ C) @ P_pred)
        check_finite(x, k + 1)
        est[:, k + 1], covs[k + 1], innov[:, k] = x, P, e
    return FilterTrace("kf", est, covs, innov, wall_time=time.perf_counter() - t0)


def numerical_jacobian(func, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central differences with per-coordinate step ``step * (1 + |x_i|)``."""
    x = np.asarray(x, float)
    h = step * (1.0 + np.abs(x))
    E = np.diag(h)
    fwd = func(x[:, None] + E)
    bwd = func(x[:, None] - E)
    return (fwd - bwd) / (2.0 * h)


def ekf(system, prior: GaussianPrior, observations, jacobian_step: float = 1e-6) -> FilterTrace:
    """Extended Kalman filter on the deterministic parts ``drift`` / ``observe``."""
    t0 = time.perf_counter()
    Y = _observations(observations, system.p)
    n, T = system.n, Y.shape[1]
    Q, R = system.process_cov, system.obs_cov
    x = prior.mean.copy()
    P = prior.cov.copy()
    est = np.empty((n, T + 1))
    covs = np.empty((T + 1, n, n))
    innov = np.empty((system.p, T))
    est[:, 0], covs[0] = x, P
    I = np.eye(n)
    for k in range(T):
        F = numerical_jacobian(system.drift, x, jacobian_step)
        x_pred = system.drift(x[:, None])[:, 0]
        P_pred = symmetrize(F @ P @ F.T + Q)
        H = numerical_jacobian(system.observe, x_pred, jacobian_step)
        e = Y[:, k] - system.observe(x_pred[:, None])[:, 0]
        S = H @ P_pred @ H.T + R
        K = kalman_gain(P_pred @ H.T, S, step=k + 1, jitter=(0.0,))
        x = x_pred + K @ e
        P = symmetrize((I - K @ H) @ P_pred)
        check_finite(x, k + 1)
        est[:, k + 1], covs[k + 1], innov[:, k] = x, P, e
    return FilterTrace("ekf", est, covs, innov, wall_time=time.perf_counter() - t0)


def sigma_weights(n: int, alpha: float = 1e-3, beta: float = 2.0,
                  kappa: float = 0.0) -> tuple[np.ndarray, np.ndarray, float]:
    """Scaled unscented-transform weights ``(Wm, Wc, lambda)`` for ``2n+1`` points."""
    lam = alpha**2 * (n + kappa) - n
    Wm = np.full(2 * n + 1, 1.0 / (2.0 * (n + lam)))
    Wc = Wm.copy()
    Wm[0] = lam / (n + lam)
    Wc[0] = lam / (n + lam) + (1.0 - alpha**2 + beta)
    return Wm, Wc, lam


def sigma_points(x: np.ndarray, P: np.ndarray, lam: float, step: int | None = None) -> np.ndarray:
    """``(n, 2n+1)`` sigma points; the Cholesky factor is retried with jitter."""
    n = x.shape[0]
    M = (n + lam) * symmetrize(P)
    scale = max(float(np.trace(M)) / n, 1e-300)
    for j in JITTER_LADDER:
        try:
            L = np.linalg.cholesky(M + (j * scale) * np.eye(n))
            break
        except np.linalg.LinAlgError:
            continue
    else:
        raise NumericalError("covariance square root failed", step=step)
    return np.concatenate([x[:, None], x[:, None] + L, x[:, None] - L], axis=1)


def ukf(system, prior: GaussianPrior, observations, alpha: float = 1e-3, beta: float = 2.0,
        kappa: float = 0.0) -> FilterTrace:
    """Additive-noise unscented Kalman filter."""
    t0 = time.perf_counter()
    Y = _observations(observations, system.p)
    n, T = system.n, Y.shape[1]
    Q, R = system.process_cov, system.obs_cov
    Wm, Wc, lam = sigma_weights(n, alpha, beta, kappa)
    x = prior.mean.copy()
    P = prior.cov.copy()
    est = np.empty((n, T + 1))
    covs = np.empty((T + 1, n, n))
    innov = np.empty((system.p, T))
    est[:, 0], covs[0] = x, P
    for k in range(T):
        chi = system.drift(sigma_points(x, P, lam, k + 1))
        x_pred = chi @ Wm
        D = chi - x_pred[:, None]
        P_pred = symmetrize((D * Wc) @ D.T + Q)
        chi = sigma_points(x_pred, P_pred, lam, k + 1)
        ups = system.observe(chi)
        y_pred = ups @ Wm
        Dy = ups - y_pred[:, None]
        Dx = chi - x_pred[:, None]
        S = symmetrize((Dy * Wc) @ Dy.T + R)
        Pxy = (Dx * Wc) @ Dy.T
        K = kalman_gain(Pxy, S, step=k + 1, jitter=(0.0,))
        e = Y[:, k] - y_pred
        x = x_pred + K @ e
        P = symmetrize(P_pred - K @ S @ K.T)
        check_finite(x, k + 1)
        est[:, k + 1], covs[k + 1], innov[:, k] = x, P, e
    return FilterTrace("ukf", est, covs, innov, wall_time=time.perf_counter() - t0)
