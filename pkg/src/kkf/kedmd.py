"""Kernel EDMD: finite-dimensional Koopman approximation from sampled data.

Feature vectors are node evaluations ``phi(x)_i = k(x_i, x)``.  The fitted
matrices act on feature vectors and interpolate at the nodes::

    U phi(x_i) = phi(x_i+),   C phi(x_i) = y_i,   B phi(x_i) = x_i

i.e. ``U = Phi(X+) (K + lam I)^-1``, ``C = Y (K + lam I)^-1`` and
``B = X (K + lam I)^-1`` where column ``i`` of ``Phi(X+)`` is ``phi(x_i+)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from kkf.errors import NumericalError
from kkf.kernels import Kernel


def default_regularization(K: np.ndarray) -> float:
    return 1e-8 * float(np.trace(K)) / K.shape[0]


@dataclass(frozen=True, eq=False)
class KoopmanModel:
    X: np.ndarray
    X_plus: np.ndarray
    Y: np.ndarray
    kernel: Kernel
    reg: float
    U: np.ndarray
    C: np.ndarray
    B: np.ndarray
    gram_factor: tuple = field(repr=False)

    @property
    def N(self) -> int:
        return self.X.shape[1]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @classmethod
    def from_data(cls, X, X_plus, Y, kernel: Kernel, reg: float | None = None) -> "KoopmanModel":
        X = np.atleast_2d(np.asarray(X, float))
        X_plus = np.atleast_2d(np.asarray(X_plus, float))
        Y = np.atleast_2d(np.asarray(Y, float))
        N = X.shape[1]
        if N < 2:
            raise ValueError(f"need at least 2 nodes, got {N}")
        if X_plus.shape != X.shape or Y.shape[1] != N:
            raise ValueError(f"inconsistent data shapes X{X.shape}, X+{X_plus.shape}, Y{Y.shape}")
        if reg is not None and reg < 0:
            raise ValueError("regularization must be non-negative")
        K = kernel.gram(X)
        lam = default_regularization(K) if reg is None else float(reg)
        try:
            factor = cho_factor(K + lam * np.eye(N), lower=True, check_finite=True)
        except LinAlgError:
            raise NumericalError(
                f"Gram matrix K + {lam:.3g} I is numerically singular; "
                "increase the regularization (kedmd.reg)") from None
        K_plus = kernel.gram(X, X_plus)
        U = cho_solve(factor, K_plus.T).T
        C = cho_solve(factor, Y.T).T
        B = cho_solve(factor, X.T).T
        if not (np.all(np.isfinite(U)) and np.all(np.isfinite(C)) and np.all(np.isfinite(B))):
            raise NumericalError("non-finite kEDMD matrices; increase the regularization")
        return cls(X, X_plus, Y, kernel, lam, U, C, B, factor)

    def embed(self, x) -> np.ndarray:
        """Feature vector ``(k(x_i, x))_i`` of one state."""
        x = np.asarray(x, float)
        return self.kernel.gram(self.X, x.reshape(self.n, 1))[:, 0]

    def embed_batch(self, Xs) -> np.ndarray:
        """Features of the columns of ``Xs`` as an ``(N, M)`` matrix."""
        return self.kernel.gram(self.X, np.asarray(Xs, float).reshape(self.n, -1))

    def lift_back(self, feature) -> np.ndarray:
        return self.B @ np.asarray(feature, float)

    def lift_back_cov(self, P_z) -> np.ndarray:
        P = self.B @ np.asarray(P_z, float) @ self.B.T
        return 0.5 * (P + P.T)

    def interpolation_residuals(self) -> dict[str, float]:
        """Max-norm node residuals of ``U``, ``C`` and ``B``, absolute and relative."""
        Phi = self.kernel.gram(self.X)
        Phi_plus = self.kernel.gram(self.X, self.X_plus)
        out = {}
        for name, M, target in (("U", self.U, Phi_plus), ("C", self.C, self.Y),
                                ("B", self.B, self.X)):
            err = float(np.abs(M @ Phi - target).max())
            out[name] = err
            out[name + "_relative"] = err / max(float(np.abs(target).max()), 1e-300)
        return out

    def condition_number(self) -> float:
        w = np.linalg.eigvalsh(self.kernel.gram(self.X) + self.reg * np.eye(self.N))
        return float(w.max() / w.min()) if w.min() > 0 else float("inf")

    def save(self, path) -> Path:
        path = Path(path)
        if path.suffix != ".npz":
            path = path.with_suffix(".npz")
        np.savez(path, X=self.X, X_plus=self.X_plus, Y=self.Y, U=self.U, C=self.C, B=self.B,
                 reg=np.array(self.reg), kernel=np.array(json.dumps(self.kernel.to_dict())))
        return path

    @classmethod
    def load(cls, path) -> "KoopmanModel":
        with np.load(Path(path), allow_pickle=False) as d:
            kernel = Kernel.from_dict(json.loads(str(d["kernel"])))
            X, X_plus, Y = d["X"], d["X_plus"], d["Y"]
            reg = float(d["reg"])
            U, C, B = d["U"], d["C"], d["B"]
        N = X.shape[1]
        factor = cho_factor(kernel.gram(X) + reg * np.eye(N), lower=True)
        # stored matrices are authoritative so that loaded models filter bit-identically
        return cls(X, X_plus, Y, kernel, reg, U, C, B, factor)


def fit(system, state_sampler: Callable, kernel: Kernel, N: int, reg: float | None = None,
        rng=None) -> KoopmanModel:
    """Sample ``N`` nodes, one successor and one observation each, and fit.

    ``state_sampler(rng, size)`` returns an ``(n, size)`` matrix. ``reg=None``
    selects ``1e-8 * trace(K) / N``.
    """
    if N < 2:
        raise ValueError(f"N must be at least 2, got {N}")
    rng = np.random.default_rng(rng)
    X = np.asarray(state_sampler(rng, N), float)
    X_plus = system.step_batch(X, rng)
    Y = system.obs_batch(X, rng)
    return KoopmanModel.from_data(X, X_plus, Y, kernel, reg)


def empirical_cov(samples, map: Callable | None = None) -> np.ndarray:
    """Unbiased covariance of ``samples`` (one sample per row), optionally mapped first."""
    Z = np.asarray(samples, float) if map is None else np.array([map(s) for s in samples], float)
    if Z.ndim == 1:
        Z = Z[:, None]
    m = Z.shape[0]
    if m < 2:
        raise ValueError(f"empirical_cov needs at least 2 samples, got {m}")
    D = Z - Z.mean(axis=0)
    P = D.T @ D / (m - 1)
    return 0.5 * (P + P.T)


def _draw(x0_sampler, rng, size: int) -> np.ndarray:
    if hasattr(x0_sampler, "sample"):
        return x0_sampler.sample(rng, size)
    return np.asarray(x0_sampler(rng, size), float)


def embedding_init(model: KoopmanModel, x0_sampler, n_samples: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Mean and unbiased covariance of embedded draws from the initial-state law."""
    if n_samples < 2:
        raise ValueError(f"n_samples must be at least 2, got {n_samples}")
    Z = model.embed_batch(_draw(x0_sampler, rng, n_samples))
    return Z.mean(axis=1), empirical_cov(Z.T)
