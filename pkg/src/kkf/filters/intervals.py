"""Per-coordinate confidence bands from filter covariances, and CSV export."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from scipy import stats

from kkf.filters.base import FilterTrace


def _svd_spreads(P: np.ndarray) -> np.ndarray:
    """Square roots of the singular values of ``P``, each assigned to the
    coordinate its singular vector loads on most (greedy, largest first)."""
    Uv, s, _ = np.linalg.svd(P)
    n = P.shape[0]
    out = np.zeros(n)
    free = list(range(n))
    for j in np.argsort(-s):
        i = max(free, key=lambda c: abs(Uv[c, j]))
        out[i] = np.sqrt(max(s[j], 0.0))
        free.remove(i)
    return out


def confidence_intervals(trace: FilterTrace, level: float = 0.95, dof: float | None = None,
                         method: str = "diag") -> dict[str, np.ndarray]:
    """Intervals ``estimate +- t * sigma`` for every step and coordinate.

    ``sigma_i`` is the square root of the ``i``-th diagonal entry of the state
    covariance (``method="diag"``) or of the singular value matched to
    coordinate ``i`` (``method="svd"``). ``t`` is the two-sided Student-t
    quantile with ``dof`` degrees of freedom, defaulting to ``trace.dof``; with
    neither set the normal quantile is used.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    if method not in ("diag", "svd"):
        raise ValueError(f"unknown method {method!r}")
    dof = trace.dof if dof is None else dof
    q = 0.5 * (1.0 + level)
    z = float(stats.norm.ppf(q)) if dof is None or not np.isfinite(dof) else float(stats.t.ppf(q, dof))
    covs = trace.covariances
    if method == "diag":
        sigma = np.sqrt(np.clip(np.diagonal(covs, axis1=1, axis2=2), 0.0, None)).T
    else:
        sigma = np.stack([_svd_spreads(P) for P in covs], axis=1)
    half = z * sigma
    return {"std": sigma, "lower": trace.estimates - half, "upper": trace.estimates + half,
            "z": z}


def coverage(intervals: dict, states) -> float:
    """Fraction of (step, coordinate) cells whose interval contains the truth."""
    states = np.asarray(states, float)
    inside = (intervals["lower"] <= states) & (states <= intervals["upper"])
    return float(inside.mean())


def write_trace_csv(trace: FilterTrace, path, level: float = 0.95, method: str = "diag") -> Path:
    """Long-format CSV: step, coordinate, estimate, std, lower, upper, innovation."""
    ci = confidence_intervals(trace, level, method=method)
    path = Path(path)
    n, T1 = trace.estimates.shape
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "coordinate", "estimate", "std", "lower", "upper", "innovation"])
        for k in range(T1):
            for i in range(n):
                if k > 0 and i < trace.innovations.shape[0]:
                    innovation = repr(float(trace.innovations[i, k - 1]))
                else:
                    innovation = ""
                w.writerow([k, i, repr(float(trace.estimates[i, k])), repr(float(ci["std"][i, k])),
                            repr(float(ci["lower"][i, k])), repr(float(ci["upper"][i, k])),
                            innovation])
    return path
