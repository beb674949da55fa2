"""Stochastic observed dynamical systems and the experiment model zoo.

Every system is ``x_{k+1} = f(x_k, w_k)``, ``y_k = g(x_k, v_k)``.  The generic
contract is sample access: per-point samplers ``step_sampler(x, rng)`` and
``obs_sampler(x, rng)``.  Batched variants take an ``(n, M)`` matrix of
column states; for the built-in additive-Gaussian models they are vectorized
and consume the random stream exactly like a column-by-column loop, so
:class:`PointwiseSimulator` reproduces them up to matrix-product rounding.
"""

from __future__ import annotations

from typing import Callable, Mapping, Sequence

import numpy as np

from kkf.errors import ConfigError, SimulationError


class ObservedSystem:
    """Sample-access interface shared by every filter.

    Subclasses implement :meth:`step_sampler` and :meth:`obs_sampler`, or the
    batched :meth:`step_batch` / :meth:`obs_batch`; the rest is derived.
    """

    n: int
    p: int

    def step_sampler(self, x, rng) -> np.ndarray:
        return self.step_batch(np.asarray(x, float)[:, None], rng)[:, 0]

    def obs_sampler(self, x, rng) -> np.ndarray:
        return self.obs_batch(np.asarray(x, float)[:, None], rng)[:, 0]

    def step_batch(self, X, rng) -> np.ndarray:
        X = np.asarray(X, float)
        return np.stack([self.step_sampler(X[:, j], rng) for j in range(X.shape[1])], axis=1)

    def obs_batch(self, X, rng) -> np.ndarray:
        X = np.asarray(X, float)
        return np.stack([self.obs_sampler(X[:, j], rng) for j in range(X.shape[1])], axis=1)

    def step_samples(self, x, n_samples: int, rng) -> np.ndarray:
        """``n_samples`` independent draws of ``f(x, .)`` as an ``(n, n_samples)`` matrix."""
        x = np.asarray(x, float)
        return self.step_batch(np.repeat(x[:, None], n_samples, axis=1), rng)

    def obs_samples(self, x, n_samples: int, rng) -> np.ndarray:
        x = np.asarray(x, float)
        return self.obs_batch(np.repeat(x[:, None], n_samples, axis=1), rng)

    def step_mean(self, x, n_samples: int, rng) -> np.ndarray:
        """Monte-Carlo estimate of ``E[f(x, .)]``."""
        return self.step_samples(x, n_samples, rng).mean(axis=1)

    def obs_mean(self, x, n_samples: int, rng) -> np.ndarray:
        return self.obs_samples(x, n_samples, rng).mean(axis=1)


def _noise_factor(cov: np.ndarray) -> np.ndarray:
    """Square-root factor ``L`` with ``L L^T = cov`` that tolerates singular ``cov``."""
    cov = np.asarray(cov, float)
    if cov.size == 0:
        return cov.reshape(0, 0)
    if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
        raise ConfigError("noise covariance must be symmetric")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(cov)
        if w.min() < -1e-10 * max(1.0, w.max()):
            raise ConfigError("noise covariance must be positive semi-definite") from None
        return V * np.sqrt(np.clip(w, 0.0, None))


def _as_cov(value, dim: int, name: str) -> np.ndarray:
    a = np.asarray(value, float)
    if a.ndim == 0:
        return float(a) * np.eye(dim)
    if a.ndim == 1:
        if a.shape[0] != dim:
            raise ConfigError(f"expected {dim} variances, got {a.shape[0]}", name)
        return np.diag(a)
    if a.shape != (dim, dim):
        raise ConfigError(f"expected a {dim}x{dim} covariance, got {a.shape}", name)
    return a


class AdditiveGaussianSystem(ObservedSystem):
    """``f(x, w) = drift(x) + w``, ``g(x, v) = observe(x) + v`` with Gaussian noises."""

    param_names: tuple[str, ...] = ()

    def __init__(self, n: int, p: int, process_cov, obs_cov):
        self.n = int(n)
        self.p = int(p)
        self.process_cov = _as_cov(process_cov, self.n, "process_cov")
        self.obs_cov = _as_cov(obs_cov, self.p, "obs_cov")
        self._Lq = _noise_factor(self.process_cov)
        self._Lr = _noise_factor(self.obs_cov)

    def drift(self, X, params: Mapping[str, np.ndarray] | None = None) -> np.ndarray:
        raise NotImplementedError

    def observe(self, X) -> np.ndarray:
        raise NotImplementedError

    def _post_step(self, X: np.ndarray) -> np.ndarray:
        return X

    def noiseless_step(self, X) -> np.ndarray:
        """The step with the noise set to zero (clamping still applies)."""
        return self._post_step(self.drift(np.asarray(X, float)))

    def step_batch(self, X, rng) -> np.ndarray:
        X = np.asarray(X, float)
        W = self._Lq @ rng.standard_normal((X.shape[1], self.n)).T
        return self._post_step(self.drift(X) + W)

    def obs_batch(self, X, rng) -> np.ndarray:
        X = np.asarray(X, float)
        V = self._Lr @ rng.standard_normal((X.shape[1], self.p)).T
        return self.observe(X) + V

    def params(self) -> dict[str, float]:
        return {}

    def with_params(self, **params) -> "AdditiveGaussianSystem":
        raise NotImplementedError(f"{type(self).__name__} has no parameters")

    def with_noise(self, process_cov=None, obs_cov=None) -> "AdditiveGaussianSystem":
        raise NotImplementedError


class LinearGaussianSystem(AdditiveGaussianSystem):
    """``x+ = A x + w``, ``y = C x + v`` with ``w ~ N(0, Q)``, ``v ~ N(0, R)``."""

    def __init__(self, A, C, Q, R):
        self.A = np.atleast_2d(np.asarray(A, float))
        self.C = np.atleast_2d(np.asarray(C, float))
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.C.shape[1] != n:
            raise ConfigError(f"inconsistent shapes A{self.A.shape}, C{self.C.shape}")
        super().__init__(n, self.C.shape[0], Q, R)

    @property
    def Q(self) -> np.ndarray:
        return self.process_cov

    @property
    def R(self) -> np.ndarray:
        return self.obs_cov

    def drift(self, X, params=None):
        return self.A @ X

    def observe(self, X):
        return self.C @ X

    def with_noise(self, process_cov=None, obs_cov=None):
        return LinearGaussianSystem(self.A, self.C,
                                    self.Q if process_cov is None else process_cov,
                                    self.R if obs_cov is None else obs_cov)


class ScalarGainSystem(AdditiveGaussianSystem):
    """Scalar ``x+ = theta x + w``, ``y = x + v``; the smallest parametric model."""

    param_names = ("theta",)

    def __init__(self, theta: float = 0.5, q: float = 1e-4, r: float = 1e-4):
        self.theta = float(theta)
        super().__init__(1, 1, q, r)

    def drift(self, X, params=None):
        theta = self.theta if params is None else params.get("theta", self.theta)
        return theta * np.asarray(X, float)

    def observe(self, X):
        return np.asarray(X, float)

    def params(self):
        return {"theta": self.theta}

    def with_params(self, **params):
        return ScalarGainSystem(params.get("theta", self.theta), self.process_cov[0, 0],
                                self.obs_cov[0, 0])

    def with_noise(self, process_cov=None, obs_cov=None):
        return ScalarGainSystem(self.theta,
                                self.process_cov if process_cov is None else process_cov,
                                self.obs_cov if obs_cov is None else obs_cov)


EPIDEMIC_MODELS = {
    "sir": (("S", "I", "R"), ("beta", "gamma", "p")),
    "sirs": (("S", "I", "R"), ("alpha", "beta", "gamma")),
    "seirs": (("S", "E", "I", "R"), ("alpha", "beta", "gamma", "delta")),
}

DEFAULT_EPIDEMIC_PARAMS = {"alpha": 0.2, "beta": 1.3, "gamma": 0.4, "delta": 0.5, "p": 1.0}


class EpidemicSystem(AdditiveGaussianSystem):
    """Discrete-time SIR_p, SIRS and SEIRS compartment models with additive noise.

    ``observed`` lists the state indices (0-based) that are measured. With
    ``clamp=True`` states are clipped to ``[0, 1]`` after every noisy step.
    """

    def __init__(self, model: str = "sir", params: Mapping[str, float] | None = None,
                 process_cov=0.01, obs_cov=0.01, observed: Sequence[int] = (1,),
                 clamp: bool = False):
        model = model.lower()
        if model not in EPIDEMIC_MODELS:
            raise ConfigError(f"unknown epidemic model {model!r}", "system.model")
        self.model = model
        self.compartments, self.param_names = EPIDEMIC_MODELS[model]
        self._params = {k: float(DEFAULT_EPIDEMIC_PARAMS[k]) for k in self.param_names}
        for k, v in (params or {}).items():
            if k not in self._params:
                raise ConfigError(f"model {model} has no parameter {k!r}", f"system.params.{k}")
            self._params[k] = float(v)
        n = len(self.compartments)
        self.observed = tuple(int(i) for i in observed)
        if not self.observed or any(i < 0 or i >= n for i in self.observed):
            raise ConfigError(f"observed indices {self.observed} out of range for n={n}",
                              "system.observed")
        self.clamp = bool(clamp)
        super().__init__(n, len(self.observed), process_cov, obs_cov)

    def params(self):
        return dict(self._params)

    def with_params(self, **params):
        merged = {**self._params, **params}
        return EpidemicSystem(self.model, merged, self.process_cov, self.obs_cov,
                              self.observed, self.clamp)

    def with_noise(self, process_cov=None, obs_cov=None):
        return EpidemicSystem(self.model, self._params,
                              self.process_cov if process_cov is None else process_cov,
                              self.obs_cov if obs_cov is None else obs_cov,
                              self.observed, self.clamp)

    def drift(self, X, params=None):
        X = np.asarray(X, float)
        prm = self._params if not params else {**self._params, **params}
        if self.model == "sir":
            S, I, R = X
            p = prm["p"]
            Ip = I ** int(p) if float(p).is_integer() else np.power(I, p)
            infection = prm["beta"] * S * Ip
            recovery = prm["gamma"] * I
            return np.stack([S - infection, I + infection - recovery, R + recovery])
        if self.model == "sirs":
            S, I, R = X
            infection = prm["beta"] * S * I
            recovery = prm["gamma"] * I
            waning = prm["alpha"] * R
            return np.stack([S - infection + waning, I + infection - recovery,
                             R + recovery - waning])
        S, E, I, R = X
        infection = prm["beta"] * S * I
        onset = prm["delta"] * E
        recovery = prm["gamma"] * I
        waning = prm["alpha"] * R
        return np.stack([S - infection + waning, E + infection - onset,
                         I + onset - recovery, R + recovery - waning])

    def observe(self, X):
        return np.asarray(X, float)[list(self.observed)]

    def _post_step(self, X):
        return np.clip(X, 0.0, 1.0) if self.clamp else X


class AugmentedSystem(AdditiveGaussianSystem):
    """A parametric system whose chosen parameters are appended to the state.

    Appended coordinates follow a Gaussian random walk and are read back by the
    base dynamics; the observation map ignores them.
    """

    def __init__(self, base: AdditiveGaussianSystem, names: Sequence[str], param_noise_cov):
        self.base = base
        self.names = tuple(names)
        n_p = len(self.names)
        self.param_noise_cov = _as_cov(param_noise_cov, n_p, "param_noise_cov")
        Q = np.zeros((base.n + n_p, base.n + n_p))
        Q[: base.n, : base.n] = base.process_cov
        Q[base.n:, base.n:] = self.param_noise_cov
        super().__init__(base.n + n_p, base.p, Q, base.obs_cov)

    @property
    def n_base(self) -> int:
        return self.base.n

    def drift(self, X, params=None):
        X = np.asarray(X, float)
        nb = self.base.n
        theta = {name: X[nb + i] for i, name in enumerate(self.names)}
        return np.concatenate([self.base.drift(X[:nb], theta), X[nb:]], axis=0)

    def observe(self, X):
        return self.base.observe(np.asarray(X, float)[: self.base.n])

    def _post_step(self, X):
        out = X.copy()
        out[: self.base.n] = self.base._post_step(X[: self.base.n])
        return out


def augment_with_parameters(system: AdditiveGaussianSystem, param_indices,
                            param_noise_cov=1e-4) -> AugmentedSystem:
    """Append parameters (given by name or by index into ``system.param_names``)."""
    names = []
    for idx in param_indices:
        if isinstance(idx, str):
            if idx not in system.param_names:
                raise IndexError(f"{type(system).__name__} has no parameter {idx!r}")
            names.append(idx)
        else:
            i = int(idx)
            if not 0 <= i < len(system.param_names):
                raise IndexError(f"parameter index {i} out of range "
                                 f"(system has {len(system.param_names)} parameters)")
            names.append(system.param_names[i])
    # the noise factorization rejects non-PSD covariances
    return AugmentedSystem(system, names, param_noise_cov)


class PointwiseSimulator(ObservedSystem):
    """Expose a system only through its per-point samplers.

    Batched calls become Python loops over :meth:`step_sampler`, as for a
    black-box simulator. Draws are identical to the wrapped system's batch path;
    results agree with it up to matrix-product rounding.
    """

    def __init__(self, system: ObservedSystem):
        self.system = system
        self.n = system.n
        self.p = system.p

    def step_sampler(self, x, rng):
        return self.system.step_sampler(x, rng)

    def obs_sampler(self, x, rng):
        return self.system.obs_sampler(x, rng)

    def step_batch(self, X, rng):
        return ObservedSystem.step_batch(self, X, rng)

    def obs_batch(self, X, rng):
        return ObservedSystem.obs_batch(self, X, rng)

    def __getattr__(self, name):
        # drift/observe/noise covariances for the EKF, UKF and PF likelihood
        return getattr(self.system, name)


def make_random_linear(rng, n: int = 3, p: int = 2, entry_scale: float = 0.5,
                       scale_is: str = "variance", noise: float = 0.01) -> LinearGaussianSystem:
    """Random ``A`` with i.i.d. normal entries; ``C`` selects the first ``p`` states.

    ``scale_is`` chooses whether ``entry_scale`` is the entry variance or its
    standard deviation.
    """
    if scale_is not in ("variance", "std"):
        raise ConfigError("scale_is must be 'variance' or 'std'", "system.entry_scale_is")
    std = np.sqrt(entry_scale) if scale_is == "variance" else entry_scale
    A = rng.normal(0.0, std, size=(n, n))
    C = np.eye(p, n)
    return LinearGaussianSystem(A, C, noise * np.eye(n), noise * np.eye(p))


def simulate(system: ObservedSystem, x0, T: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Return ``states`` ``(n, T+1)`` and ``observations`` ``(p, T)``.

    ``observations[:, k]`` is drawn at ``states[:, k+1]``.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    x = np.asarray(x0, float).copy()
    if x.shape != (system.n,):
        raise ValueError(f"x0 must have shape ({system.n},), got {x.shape}")
    states = np.empty((system.n, T + 1))
    obs = np.empty((system.p, T))
    states[:, 0] = x
    for k in range(T):
        x = system.step_sampler(x, rng)
        if not np.all(np.isfinite(x)):
            raise SimulationError("non-finite state", step=k + 1)
        states[:, k + 1] = x
        obs[:, k] = system.obs_sampler(x, rng)
    return states, obs


def uniform_box_sampler(low, high) -> Callable:
    """Sampler ``(rng, size) -> (n, size)`` for the box ``[low, high]``."""
    low = np.asarray(low, float)
    high = np.asarray(high, float)

    def sample(rng, size):
        return rng.uniform(low[:, None], high[:, None], size=(low.shape[0], size))

    return sample


def trajectory_sampler(system: ObservedSystem, initial_sampler, T: int) -> Callable:
    """Sampler that draws states from simulated trajectories of ``system``.

    Each draw starts from ``initial_sampler`` (an object with ``.sample`` or a
    callable ``(rng, size) -> (n, size)``), is simulated for a uniformly chosen
    number of steps in ``0..T`` and returned at that step. Nodes drawn this way
    sit where a filter started from the same prior actually operates.
    """
    if T < 0:
        raise ValueError("T must be non-negative")

    def sample(rng, size):
        if hasattr(initial_sampler, "sample"):
            X = initial_sampler.sample(rng, size)
        else:
            X = np.asarray(initial_sampler(rng, size), float)
        stop = rng.integers(0, T + 1, size)
        out = X.copy()
        for k in range(1, T + 1):
            X = system.step_batch(X, rng)
            out[:, stop == k] = X[:, stop == k]
        if not np.all(np.isfinite(out)):
            raise SimulationError("non-finite state while sampling nodes")
        return out

    return sample
