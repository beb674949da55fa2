"""Positive-definite kernels and Gram-matrix assembly.

Point sets are stored column-wise: a matrix of shape ``(n, N)`` holds ``N``
points of dimension ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

FAMILIES = ("matern12", "linear", "squared_exponential")

_ALIASES = {
    "matern12": "matern12",
    "matern-1/2": "matern12",
    "matern_1/2": "matern12",
    "matern": "matern12",
    "exponential": "matern12",
    "linear": "linear",
    "squared_exponential": "squared_exponential",
    "squared-exponential": "squared_exponential",
    "se": "squared_exponential",
    "rbf": "squared_exponential",
}


@dataclass(frozen=True)
class Kernel:
    """A stationary (Matérn-1/2, squared-exponential) or linear kernel.

    ``length_scale`` is ignored by the linear family; ``variance`` scales the
    stationary families so that ``k(x, x) == variance``.
    """

    family: str = "matern12"
    length_scale: float = 1.0
    variance: float = 1.0

    def __post_init__(self):
        family = _ALIASES.get(str(self.family).lower())
        if family is None:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "family", family)
        if not (np.isfinite(self.length_scale) and self.length_scale > 0):
            raise ValueError(f"length_scale must be positive, got {self.length_scale}")
        if not (np.isfinite(self.variance) and self.variance > 0):
            raise ValueError(f"variance must be positive, got {self.variance}")

    def __call__(self, x, y) -> float:
        return self.eval(x, y)

    def eval(self, x, y) -> float:
        x = _as_point(x)
        y = _as_point(y)
        if x.shape != y.shape:
            raise ValueError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
        if self.family == "linear":
            return float(x @ y)
        r = float(np.linalg.norm(x - y))
        return float(self._profile(np.asarray(r)))

    def gram(self, A, B=None) -> np.ndarray:
        """Return the matrix ``(k(A[:, i], B[:, j]))_{ij}``.

        ``A`` is ``(n, N)`` and ``B`` is ``(n, M)``; 1-d inputs are treated as a
        single point. With ``B`` omitted the result is exactly symmetric.
        """
        A = _as_points(A)
        symmetric = B is None
        B = A if symmetric else _as_points(B)
        if A.shape[0] != B.shape[0]:
            raise ValueError(f"dimension mismatch: {A.shape[0]} vs {B.shape[0]}")
        if self.family == "linear":
            G = A.T @ B
        elif self.family == "matern12":
            G = self._profile(cdist(A.T, B.T, metric="euclidean"))
        else:
            G = self._profile(np.sqrt(cdist(A.T, B.T, metric="sqeuclidean")))
        if symmetric:
            # cdist is symmetric in exact arithmetic only
            G = np.triu(G) + np.triu(G, 1).T
        return G

    def _profile(self, r: np.ndarray) -> np.ndarray:
        if self.family == "matern12":
            return self.variance * np.exp(-r / self.length_scale)
        return self.variance * np.exp(-0.5 * (r / self.length_scale) ** 2)

    def to_dict(self) -> dict:
        return {"family": self.family, "length_scale": float(self.length_scale),
                "variance": float(self.variance)}

    @classmethod
    def from_dict(cls, d: dict) -> "Kernel":
        return cls(family=d["family"], length_scale=float(d.get("length_scale", 1.0)),
                   variance=float(d.get("variance", 1.0)))


def gram(kernel: Kernel, A, B=None) -> np.ndarray:
    return kernel.gram(A, B)


def _as_point(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.ndim != 1:
        raise ValueError(f"expected a vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("kernel input contains non-finite values")
    return x


def _as_points(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise ValueError(f"expected an (n, N) point matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("kernel input contains non-finite values")
    return A
