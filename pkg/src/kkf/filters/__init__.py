"""Filters sharing one trace type: KF, KKF, EKF, UKF and a bootstrap PF."""

from __future__ import annotations

import numpy as np

from kkf.filters.base import FilterTrace, GaussianPrior, kalman_gain, l2_error, symmetrize
from kkf.filters.intervals import confidence_intervals, coverage, write_trace_csv
from kkf.filters.kalman import ekf, kalman_filter, numerical_jacobian, sigma_weights, ukf
from kkf.filters.koopman import kkf
from kkf.filters.particle import particle_filter, systematic_resample

ALGORITHMS = ("kf", "kkf", "ekf", "ukf", "pf")


def run_filter(algorithm: str, system, prior: GaussianPrior, observations, config=None,
               seed=None, model=None) -> FilterTrace:
    """Dispatch to one filter by name; ``config`` holds that filter's options."""
    config = dict(config or {})
    algorithm = algorithm.lower()
    if algorithm == "kf":
        return kalman_filter(system, prior, observations)
    if algorithm == "ekf":
        return ekf(system, prior, observations, **config)
    if algorithm == "ukf":
        return ukf(system, prior, observations, **config)
    if algorithm == "pf":
        return particle_filter(system, prior, observations, rng=np.random.default_rng(seed),
                               **config)
    if algorithm == "kkf":
        if model is None:
            raise ValueError("kkf needs a fitted KoopmanModel")
        return kkf(system, model, prior, observations, rng=np.random.default_rng(seed), **config)
    raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")


__all__ = [
    "ALGORITHMS",
    "FilterTrace",
    "GaussianPrior",
    "confidence_intervals",
    "coverage",
    "ekf",
    "kalman_filter",
    "kalman_gain",
    "kkf",
    "l2_error",
    "numerical_jacobian",
    "particle_filter",
    "run_filter",
    "sigma_weights",
    "symmetrize",
    "systematic_resample",
    "ukf",
    "write_trace_csv",
]
