"""Koopman Kalman filtering: kernel-EDMD state estimation, baselines and
iterated parameter estimation."""

from kkf.kernels import Kernel
from kkf.systems import (
    AugmentedSystem,
    EpidemicSystem,
    LinearGaussianSystem,
    ObservedSystem,
    PointwiseSimulator,
    ScalarGainSystem,
    augment_with_parameters,
    make_random_linear,
    simulate,
    trajectory_sampler,
    uniform_box_sampler,
)
from kkf.kedmd import KoopmanModel, embedding_init, empirical_cov, fit
from kkf.filters import (
    FilterTrace,
    GaussianPrior,
    confidence_intervals,
    ekf,
    kalman_filter,
    kkf,
    particle_filter,
    run_filter,
    ukf,
)
from kkf.paramest import (
    ChainResult,
    EstimationSummary,
    param_estim,
    pushforward_trajectories,
    run_chains,
    summarize,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentedSystem",
    "ChainResult",
    "EpidemicSystem",
    "EstimationSummary",
    "FilterTrace",
    "GaussianPrior",
    "Kernel",
    "KoopmanModel",
    "LinearGaussianSystem",
    "ObservedSystem",
    "PointwiseSimulator",
    "ScalarGainSystem",
    "augment_with_parameters",
    "confidence_intervals",
    "ekf",
    "embedding_init",
    "empirical_cov",
    "fit",
    "kalman_filter",
    "kkf",
    "make_random_linear",
    "param_estim",
    "particle_filter",
    "pushforward_trajectories",
    "run_chains",
    "run_filter",
    "simulate",
    "summarize",
    "trajectory_sampler",
    "ukf",
    "uniform_box_sampler",
]
