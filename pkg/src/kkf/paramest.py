"""Iterated-filtering parameter estimation on a parameter-augmented state.

Each iteration filters the whole observation record with the Koopman Kalman
filter, then restarts from the final parameter estimate and its covariance.
Several independent chains are pooled after a warm-up period.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.linalg import block_diag

from kkf.errors import KKFError, NumericalError
from kkf.filters.base import GaussianPrior, l2_error, symmetrize
from kkf.filters.koopman import kkf
from kkf.systems import AugmentedSystem


@dataclass
class ChainResult:
    """One chain: the parameter estimate after every iteration.

    Row 0 of ``param_trace`` is the prior mean; row ``k`` is the estimate after
    iteration ``k``. ``param_covs[k]`` is the parameter covariance fed into
    iteration ``k + 1``. A failed chain keeps its completed rows and ``error``.
    """

    param_trace: np.ndarray
    param_covs: np.ndarray
    warmup: int
    chain_seed: int | None = None
    wall_time: float = 0.0
    error: str | None = None

    @property
    def iters(self) -> int:
        return self.param_trace.shape[0] - 1

    @property
    def ok(self) -> bool:
        return self.error is None

    def post_warmup(self, warmup: int | None = None) -> np.ndarray:
        w = self.warmup if warmup is None else warmup
        return self.param_trace[w + 1:]


@dataclass
class EstimationSummary:
    names: tuple
    mean: np.ndarray
    std: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    warmup: int
    samples: np.ndarray
    density_grid: np.ndarray
    density: np.ndarray
    traces: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "names": list(self.names),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "level": self.level,
            "warmup": self.warmup,
            "pooled_samples": int(self.samples.shape[0]),
        }


def param_estim(system: AugmentedSystem, model, x0_prior: GaussianPrior, p0_prior: GaussianPrior,
                observations, iters: int, n_samples: int = 100, rng=None, warmup: int | None = None,
                chain_seed: int | None = None, **kkf_options) -> ChainResult:
    """Run ``iters`` filter passes, feeding back the final parameter block.

    The initial covariance is ``blockdiag(x0_prior.cov, P_theta)``. After each
    pass the last ``n_p`` entries of the final estimate become the next
    parameter mean and the matching block of the final state covariance the
    next ``P_theta``; the state prior stays fixed.
    """
    if iters < 0:
        raise ValueError(f"iters must be non-negative, got {iters}")
    rng = np.random.default_rng(rng)
    n_b, n_p = x0_prior.mean.shape[0], p0_prior.mean.shape[0]
    if n_b + n_p != system.n:
        raise ValueError(f"state ({n_b}) + parameters ({n_p}) must match system dimension {system.n}")
    warmup = iters // 2 if warmup is None else int(warmup)
    kkf_options.setdefault("keep_feature_cov", False)

    theta, P_theta = p0_prior.mean.copy(), p0_prior.cov.copy()
    trace_rows = [theta.copy()]
    covs = [P_theta.copy()]
    t0 = time.perf_counter()
    error = None
    for it in range(1, iters + 1):
        prior = GaussianPrior(np.concatenate([x0_prior.mean, theta]),
                              block_diag(x0_prior.cov, P_theta))
        try:
            trace = kkf(system, model, prior, observations, n_samples, rng, **kkf_options)
        except KKFError as exc:
            error = f"iteration {it}: {exc}"
            break
        theta = trace.estimates[n_b:, -1].copy()
        P_theta = symmetrize(trace.covariances[-1][n_b:, n_b:])
        trace_rows.append(theta.copy())
        covs.append(P_theta.copy())
    return ChainResult(np.array(trace_rows), np.array(covs), warmup, chain_seed,
                       time.perf_counter() - t0, error)


def chain_seeds(base_seed: int, chain_count: int) -> list[int]:
    """Independent per-chain seeds derived from one base seed."""
    children = np.random.SeedSequence(base_seed).spawn(chain_count)
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


def _run_one(args) -> ChainResult:
    system, model, x0_prior, p0_prior, observations, iters, n_samples, warmup, seed, opts = args
    try:
        return param_estim(system, model, x0_prior, p0_prior, observations, iters, n_samples,
                           np.random.default_rng(seed), warmup, seed, **opts)
    except (KKFError, ValueError, ArithmeticError) as exc:
        return ChainResult(p0_prior.mean[None, :].copy(), p0_prior.cov[None].copy(),
                           warmup if warmup is not None else iters // 2, seed, error=str(exc))


def run_chains(chain_count: int, system: AugmentedSystem, model, x0_prior: GaussianPrior,
               p0_prior: GaussianPrior, observations, iters: int, n_samples: int = 100,
               base_seed: int = 42, warmup: int | None = None, workers: int = 1,
               **kkf_options) -> list[ChainResult]:
    """Run independent chains; results come back in chain order whatever ``workers`` is.

    A failing chain is returned with ``error`` set (prefixed by its chain id)
    and does not stop the others.
    """
    if chain_count < 1:
        raise ValueError(f"chain_count must be at least 1, got {chain_count}")
    jobs = [(system, model, x0_prior, p0_prior, observations, iters, n_samples, warmup, seed,
             kkf_options) for seed in chain_seeds(base_seed, chain_count)]
    if workers > 1 and chain_count > 1:
        with ProcessPoolExecutor(max_workers=min(workers, chain_count)) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    for i, r in enumerate(results):
        if r.error is not None:
            r.error = f"chain {i}: {r.error}"
    return results


def _density(samples: np.ndarray, grid_size: int) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian KDE (Silverman bandwidth) normalized to unit trapezoid mass."""
    lo, hi = samples.min(), samples.max()
    spread = hi - lo
    if spread <= 1e-12 * max(1.0, abs(lo)) or samples.size < 2:
        # degenerate sample: a unit-mass spike on a tiny grid around the value
        h = 1e-6 * max(1.0, abs(lo))
        grid = np.linspace(lo - h, lo + h, grid_size)
        vals = np.maximum(0.0, 1.0 - np.abs(grid - lo) / h)
    else:
        kde = stats.gaussian_kde(samples, bw_method="silverman")
        pad = 3.0 * float(np.sqrt(kde.covariance[0, 0]))
        grid = np.linspace(lo - pad, hi + pad, grid_size)
        vals = kde(grid)
    return grid, vals / np.trapezoid(vals, grid)


def summarize(chains: list[ChainResult], warmup: int | None = None, level: float = 0.95,
              names=None, grid_size: int = 512) -> EstimationSummary:
    """Pool post-warm-up rows of all successful chains into a normal summary.

    The interval is ``mean +- z * std`` with the normal quantile ``z``; densities
    are per-parameter Gaussian kernel estimates on uniform grids.
    """
    good = [c for c in chains if c.ok]
    if not good:
        raise NumericalError("no chain finished successfully")
    iters = min(c.iters for c in good)
    w = good[0].warmup if warmup is None else int(warmup)
    if w >= iters:
        raise ValueError(f"warmup ({w}) must be smaller than the iteration count ({iters})")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    pooled = np.concatenate([c.post_warmup(w) for c in good], axis=0)
    n_p = pooled.shape[1]
    names = tuple(names) if names is not None else tuple(f"theta{i}" for i in range(n_p))
    mean = pooled.mean(axis=0)
    std = pooled.std(axis=0, ddof=1) if pooled.shape[0] > 1 else np.zeros(n_p)
    z = float(stats.norm.ppf(0.5 * (1.0 + level)))
    grids, dens = zip(*(_density(pooled[:, j], grid_size) for j in range(n_p)))
    return EstimationSummary(names, mean, std, mean - z * std, mean + z * std, level, w, pooled,
                             np.array(grids), np.array(dens), [c.param_trace for c in chains])


def pushforward_trajectories(system, source, x0, T: int, draws: int, rng=None, truth=None,
                             warmup: int | None = None, noisy: bool = False) -> dict:
    """Simulate ``system`` under parameters drawn from an estimated distribution.

    ``source`` is an :class:`EstimationSummary` or a list of chains; draws are
    taken uniformly from the pooled post-warm-up samples and substituted for
    the parameters named in ``source``'s summary. Trajectories follow the
    deterministic dynamics unless ``noisy``. When ``truth`` (``(n, T+1)``) is
    given, each trajectory's L2 error against it is returned as well.
    """
    if draws < 1:
        raise ValueError(f"draws must be at least 1, got {draws}")
    summary = source if isinstance(source, EstimationSummary) else summarize(source, warmup)
    rng = np.random.default_rng(rng)
    names = summary.names
    base = system.params()
    unknown = [nm for nm in names if nm not in base]
    if unknown:
        raise ValueError(f"{type(system).__name__} has no parameters {unknown}")
    pick = rng.integers(0, summary.samples.shape[0], size=draws)
    trajs = np.empty((draws, system.n, T + 1))
    for d, idx in enumerate(pick):
        params = dict(base)
        params.update({nm: float(v) for nm, v in zip(names, summary.samples[idx])})
        sys_d = system.with_params(**params)
        x = np.asarray(x0, float).copy()
        trajs[d, :, 0] = x
        for k in range(T):
            x = sys_d.step_sampler(x, rng) if noisy else sys_d.noiseless_step(x[:, None])[:, 0]
            trajs[d, :, k + 1] = x
    out = {"trajectories": trajs, "params": summary.samples[pick]}
    if truth is not None:
        out["errors"] = np.array([l2_error(t, truth) for t in trajs])
    return out
