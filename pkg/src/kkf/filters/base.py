from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from kkf.errors import NumericalError

JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6)


@dataclass
class GaussianPrior:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, float))
        cov = np.asarray(self.cov, float)
        if cov.ndim == 0:
            cov = float(cov) * np.eye(self.mean.shape[0])
        self.cov = np.atleast_2d(cov)
        n = self.mean.shape[0]
        if self.cov.shape != (n, n):
            raise ValueError(f"prior covariance must be {n}x{n}, got {self.cov.shape}")
        if not np.allclose(self.cov, self.cov.T, rtol=0,
                           atol=1e-12 * max(1.0, float(np.abs(self.cov).max()))):
            raise ValueError("prior covariance must be symmetric")
        if n and np.linalg.eigvalsh(self.cov).min() < -1e-10 * max(1.0, float(np.abs(self.cov).max())):
            raise ValueError("prior covariance must be positive semi-definite")

    def sample(self, rng, size: int) -> np.ndarray:
        """``size`` draws as an ``(n, size)`` matrix; tolerates singular covariance."""
        return rng.multivariate_normal(self.mean, self.cov, size=size, method="eigh").T


@dataclass
class FilterTrace:
    """Per-step output of a filter run over ``T`` observations.

    ``estimates`` is ``(n, T+1)`` with column 0 the prior mean; ``covariances``
    is ``(T+1, n, n)``; ``innovations`` is ``(p, T)``. The feature-space fields
    are only filled by the Koopman Kalman filter.
    """

    algorithm: str
    estimates: np.ndarray
    covariances: np.ndarray
    innovations: np.ndarray
    feature_state: np.ndarray | None = None
    feature_cov: np.ndarray | None = None
    wall_time: float = 0.0
    dof: float | None = None
    extras: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return self.innovations.shape[1]

    def l2_error(self, states) -> float:
        return l2_error(self.estimates, states)


def l2_error(estimates, states) -> float:
    """Trajectory error ``sqrt(sum_k ||est_k - x_k||^2)`` over matching columns."""
    d = np.asarray(estimates, float) - np.asarray(states, float)
    return float(np.sqrt(np.sum(d * d)))


def symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def kalman_gain(PCt: np.ndarray, S: np.ndarray, step: int | None = None,
                jitter=JITTER_LADDER) -> np.ndarray:
    """``PCt S^-1`` through a Cholesky factorization of ``S``.

    Each entry of ``jitter`` is tried in turn as a multiple of ``trace(S)/p``
    added to the diagonal.
    """
    S = symmetrize(S)
    p = S.shape[0]
    scale = float(np.trace(S)) / p if p else 0.0
    for j in jitter:
        try:
            factor = cho_factor(S + (j * scale) * np.eye(p), lower=True, check_finite=True)
        except (LinAlgError, ValueError):
            continue
        return cho_solve(factor, PCt.T).T
    raise NumericalError("innovation covariance S is not positive definite", step=step)


def check_finite(x: np.ndarray, step: int, what: str = "estimate") -> None:
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"non-finite {what}", step=step)
