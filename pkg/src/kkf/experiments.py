"""Scripted studies: error decay against the exact Kalman filter, the SIR
filtering benchmark and the epidemic parameter-estimation benchmark.

Every study is a pure function of its seed. Random streams are derived per
(study, replication, algorithm) so that running a subset of algorithms does
not change the results of the others.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from kkf import __version__
from kkf.errors import ConfigError, KKFError
from kkf.filters import GaussianPrior, ekf, kalman_filter, kkf, l2_error, particle_filter, ukf
from kkf.kedmd import fit
from kkf.kernels import Kernel
from kkf.paramest import pushforward_trajectories, run_chains, summarize
from kkf.systems import (
    DEFAULT_EPIDEMIC_PARAMS,
    EpidemicSystem,
    PointwiseSimulator,
    augment_with_parameters,
    make_random_linear,
    simulate,
    trajectory_sampler,
    uniform_box_sampler,
)

DEFAULT_N_GRID = (50, 100, 150, 200, 300, 400, 500)
ENVELOPE_C = 8000.0

SIR_SETTINGS = {1: {"p": 1.0, "beta_high": 1.5},
                2: {"p": 2.0, "beta_high": 5.0},
                3: {"p": 3.0, "beta_high": 10.0}}

ESTIMATED_PARAMS = {"sir": ("beta", "gamma"),
                    "sirs": ("alpha", "beta", "gamma"),
                    "seirs": ("alpha", "beta", "gamma", "delta")}

# Published reference numbers, emitted next to measured rows and marked as such.
PUBLISHED_FILTERING = {  # algorithm -> ((error S1, S2, S3), (time S1, S2, S3))
    "ekf": ((0.256, 0.289, 0.303), (None, None, None)),
    "ukf": ((0.296, 0.599, 0.454), (None, None, None)),
    "pf100": ((0.338, 0.471, 0.486), (0.338, 0.351, 0.376)),
    "pf5000": ((0.264, 0.438, 0.447), (16.0, None, None)),
    "pf10000": ((0.264, 0.436, 0.432), (31.8, None, None)),
    "kkf100": ((0.157, 0.120, 0.094), (0.064, 0.056, 0.077)),
    "kkf300": ((0.156, 0.136, 0.082), (None, None, None)),
    "kkf500": ((0.155, 0.133, 0.081), (None, None, None)),
}
PUBLISHED_ESTIMATES = {  # (method, model) -> {param: (estimate, lower, upper)}
    ("DEMZ", "sir"): {"beta": (1.58, 0.95, 2.22), "gamma": (0.69, 0.23, 1.16)},
    ("DEMZ", "sirs"): {"alpha": (0.39, -0.29, 1.08), "beta": (1.49, 0.89, 2.08),
                       "gamma": (0.63, 0.20, 1.05)},
    ("DEMZ", "seirs"): {"alpha": (0.40, -0.15, 0.95), "beta": (1.67, 0.99, 2.36),
                        "gamma": (0.48, 0.33, 0.63), "delta": (0.44, 0.15, 0.73)},
    ("NUTS", "sir"): {"beta": (1.34, 1.31, 1.36), "gamma": (0.45, 0.44, 0.46)},
    ("NUTS", "sirs"): {"alpha": (0.17, 0.16, 0.18), "beta": (1.34, 1.31, 1.36),
                       "gamma": (0.51, 0.50, 0.52)},
    ("NUTS", "seirs"): {"alpha": (0.15, 0.13, 0.17), "beta": (1.27, 1.19, 1.35),
                        "gamma": (0.47, 0.43, 0.51), "delta": (0.39, 0.37, 0.40)},
    ("KKF", "sir"): {"beta": (1.38, 1.30, 1.46), "gamma": (0.47, 0.45, 0.49)},
    ("KKF", "sirs"): {"alpha": (0.2, 0.14, 0.26), "beta": (1.29, 1.15, 1.43),
                      "gamma": (0.44, 0.36, 0.52)},
    ("KKF", "seirs"): {"alpha": (0.09, 0.07, 0.11), "beta": (0.99, 0.93, 1.05),
                       "gamma": (0.37, 0.35, 0.39), "delta": (0.63, 0.57, 0.69)},
}
PUBLISHED_PUSHFORWARD = {  # (method, model) -> (mean trajectory L2 error, seconds)
    ("DEMetropolisZ", "sir"): (0.73, 96.61), ("DEMetropolisZ", "sirs"): (1.15, 74.05),
    ("DEMetropolisZ", "seirs"): (1.12, 62.59),
    ("NUTS", "sir"): (0.17, 341.98), ("NUTS", "sirs"): (0.16, 599.17),
    ("NUTS", "seirs"): (0.19, 1654.34),
    ("KKF", "sir"): (0.19, 62.43), ("KKF", "sirs"): (0.37, 61.35), ("KKF", "seirs"): (0.24, 94.87),
}


def _rng(*key) -> np.random.Generator:
    return np.random.default_rng([int(k) for k in key])


# ---------------------------------------------------------------- error decay

@dataclass
class ErrorDecayResult:
    N_grid: tuple
    errors: np.ndarray          # (systems, len(N_grid)); nan where a run failed
    C_fit: float
    alpha_fit: float
    excluded: int
    seed: int
    wall_time: float = 0.0
    failures: list = field(default_factory=list)
    redrawn: int = 0

    def envelope_violations(self, C: float = ENVELOPE_C) -> list[tuple[int, int, float]]:
        """``(system, N, error)`` triples above ``C * N^-1/2`` (failed runs count too)."""
        out = []
        for s in range(self.errors.shape[0]):
            for j, N in enumerate(self.N_grid):
                e = self.errors[s, j]
                if not np.isfinite(e) or e > C / np.sqrt(N):
                    out.append((s, N, float(e)))
        return out


def fit_power_law(points) -> tuple[float, float]:
    """Least-squares line through ``(log N, log error)``; returns ``(C, alpha)``.

    Points with a non-positive or non-finite error are dropped; fewer than two
    remaining points (or a single distinct ``N``) is an error.
    """
    pts = np.asarray(list(points), float).reshape(-1, 2)
    if np.any(pts[:, 0] <= 0):
        raise ValueError("node counts must be positive")
    keep = np.isfinite(pts[:, 1]) & (pts[:, 1] > 0)
    pts = pts[keep]
    if pts.shape[0] < 2 or np.unique(pts[:, 0]).size < 2:
        raise ValueError("a power-law fit needs at least two points with distinct N "
                         "and positive error")
    slope, intercept = np.polyfit(np.log(pts[:, 0]), np.log(pts[:, 1]), 1)
    return float(np.exp(intercept)), float(slope)


def error_decay_study(systems_count: int = 15, N_grid=DEFAULT_N_GRID, T: int = 20, seed: int = 42,
                      n_samples: int = 100, kernel: Kernel | None = None, node_box: float = 1000.0,
                      entry_scale: float = 0.5, entry_scale_is: str = "std",
                      noise: float = 0.01, x0=(1.0, 1.5, 2.0), prior_mean=(0.1, 0.2, 0.3),
                      prior_var: float = 0.1, reg: float | None = None,
                      redraw_outside_box: bool = True, max_redraws: int = 100,
                      progress=None) -> ErrorDecayResult:
    """Trajectory distance between KKF and the exact KF on random linear systems.

    Each system is simulated once; the KF and a KKF per ``N`` filter the same
    observations. Errors are ``sqrt(sum_k ||x_kkf_k - x_kf_k||^2)``.

    The kernel model only covers the node box, so with ``redraw_outside_box`` a
    system whose true trajectory leaves the box is replaced by a fresh draw;
    the number of replacements is reported in ``result.redrawn``.
    """
    N_grid = tuple(int(N) for N in N_grid)
    if any(N < 2 or N > 10_000 for N in N_grid):
        raise ConfigError("node counts must lie in [2, 10000]", "N_grid")
    if list(N_grid) != sorted(set(N_grid)):
        raise ConfigError("N_grid must be strictly increasing", "N_grid")
    kernel = kernel or Kernel("matern12", 1000.0)
    n = len(x0)
    prior = GaussianPrior(np.asarray(prior_mean, float), prior_var * np.eye(n))
    sampler = uniform_box_sampler([-node_box] * n, [node_box] * n)
    errors = np.full((systems_count, len(N_grid)), np.nan)
    failures = []
    t0 = time.perf_counter()
    redrawn = 0
    for s in range(systems_count):
        for attempt in range(max_redraws + 1):
            rng = _rng(seed, s, attempt) if attempt else _rng(seed, s)
            system = make_random_linear(rng, n=n, p=2, entry_scale=entry_scale,
                                        scale_is=entry_scale_is, noise=noise)
            states, obs = simulate(system, np.asarray(x0, float), T, rng)
            if not redraw_outside_box or np.abs(states).max() <= node_box:
                break
            redrawn += 1
        else:
            raise KKFError(f"no system out of {max_redraws + 1} draws stayed inside the node box")
        reference = kalman_filter(system, prior, obs)
        for j, N in enumerate(N_grid):
            rng_j = _rng(seed, s, N)
            try:
                model = fit(system, sampler, kernel, N, reg=reg, rng=rng_j)
                trace = kkf(system, model, prior, obs, n_samples, rng_j, keep_feature_cov=False)
                errors[s, j] = l2_error(trace.estimates, reference.estimates)
            except KKFError as exc:
                failures.append({"system": s, "N": N, "error": str(exc)})
            if progress:
                progress(f"system {s} N={N} error={errors[s, j]:.4g}")
    pts = [(N, errors[s, j]) for s in range(systems_count) for j, N in enumerate(N_grid)]
    excluded = sum(1 for _, e in pts if not (np.isfinite(e) and e > 0))
    C_fit, alpha = fit_power_law(pts)
    return ErrorDecayResult(N_grid, errors, C_fit, alpha, excluded, seed,
                            time.perf_counter() - t0, failures, redrawn)


# ------------------------------------------------------------- SIR benchmark

@dataclass
class SirBenchmarkConfig:
    """Setup of the SIR filtering benchmark; see the decisions notes for the defaults."""

    T: int = 15
    gamma: float = 0.3
    process_var: float = 1e-4
    obs_var: float = 1e-4
    x0: tuple = (0.99, 0.01, 0.0)
    clamp: bool = True
    kernel_family: str = "squared_exponential"
    length_scale: float = 2.0
    reg: float = 1e-4
    node_sampler: str = "trajectory"
    n_samples: int = 100
    pf_sizes: tuple = (100, 5000, 10000)
    kkf_sizes: tuple = (100, 300, 500)
    include_ekf: bool = True
    include_ukf: bool = True
    include_fit_time: bool = False
    pointwise: bool = False


@dataclass
class BenchmarkRow:
    algorithm: str
    setting: int
    mean_error: float
    mean_time: float
    replications: int
    failures: int = 0
    mean_fit_time: float = 0.0
    source: str = "measured"


def algorithm_ids(cfg: SirBenchmarkConfig) -> list[str]:
    ids = (["ekf"] if cfg.include_ekf else []) + (["ukf"] if cfg.include_ukf else [])
    ids += [f"pf{n}" for n in cfg.pf_sizes] + [f"kkf{n}" for n in cfg.kkf_sizes]
    return ids


def _node_sampler(cfg, system, prior, T):
    if cfg.node_sampler == "trajectory":
        return trajectory_sampler(system, prior, T)
    if cfg.node_sampler == "box":
        return uniform_box_sampler([0.0] * system.n, [1.2] * system.n)
    raise ConfigError(f"unknown node sampler {cfg.node_sampler!r}", "bench.node_sampler")


def sir_replication(setting: int, rep: int, seed: int, cfg: SirBenchmarkConfig):
    """System, initial prior, true states and observations of one replication."""
    if setting not in SIR_SETTINGS:
        raise ConfigError(f"setting must be one of {sorted(SIR_SETTINGS)}", "bench.setting")
    rng = _rng(seed, setting, rep)
    setting_cfg = SIR_SETTINGS[setting]
    beta = rng.uniform(0.3, setting_cfg["beta_high"])
    system = EpidemicSystem("sir", {"beta": beta, "gamma": cfg.gamma, "p": setting_cfg["p"]},
                            cfg.process_var, cfg.obs_var, observed=(1,), clamp=cfg.clamp)
    x0 = np.asarray(cfg.x0, float)
    states, obs = simulate(system, x0, cfg.T, rng)
    prior = GaussianPrior(x0 + rng.normal(0.0, np.sqrt(cfg.process_var), x0.shape),
                          cfg.process_var * np.eye(x0.shape[0]))
    return system, prior, states, obs


def _run_algorithm(alg: str, system, prior, obs, rng, cfg):
    """Return ``(trace, fit_seconds)``."""
    runner = PointwiseSimulator(system) if cfg.pointwise else system
    if alg == "ekf":
        return ekf(system, prior, obs), 0.0
    if alg == "ukf":
        return ukf(system, prior, obs), 0.0
    if alg.startswith("pf"):
        return particle_filter(runner, prior, obs, int(alg[2:]), rng), 0.0
    if alg.startswith("kkf"):
        t0 = time.perf_counter()
        model = fit(system, _node_sampler(cfg, system, prior, cfg.T),
                    Kernel(cfg.kernel_family, cfg.length_scale), int(alg[3:]), reg=cfg.reg, rng=rng)
        fit_time = time.perf_counter() - t0
        return kkf(runner, model, prior, obs, cfg.n_samples, rng, keep_feature_cov=False), fit_time
    raise ConfigError(f"unknown algorithm {alg!r}", "bench.algorithms")


def sir_benchmark(setting: int, replications: int = 10, seed: int = 42,
                  config: SirBenchmarkConfig | None = None, algorithms=None,
                  progress=None) -> tuple[list[BenchmarkRow], list[dict]]:
    """Run every algorithm on the same data per replication.

    Returns the aggregate rows and one raw record per (replication, algorithm).
    A failing run is recorded with its message and left out of the means.
    """
    cfg = config or SirBenchmarkConfig()
    algs = list(algorithms) if algorithms is not None else algorithm_ids(cfg)
    raw = []
    for rep in range(replications):
        system, prior, states, obs = sir_replication(setting, rep, seed, cfg)
        for a_idx, alg in enumerate(algorithm_ids(cfg)):
            if alg not in algs:
                continue
            rec = {"setting": setting, "replication": rep, "algorithm": alg,
                   "beta": system.params()["beta"], "error": float("nan"), "time": float("nan"),
                   "fit_time": 0.0, "failure": ""}
            try:
                trace, fit_time = _run_algorithm(alg, system, prior, obs,
                                                 _rng(seed, setting, rep, 1000 + a_idx), cfg)
                rec["error"] = l2_error(trace.estimates, states)
                rec["fit_time"] = fit_time
                rec["time"] = trace.wall_time + (fit_time if cfg.include_fit_time else 0.0)
            except (KKFError, ValueError, ArithmeticError) as exc:
                rec["failure"] = str(exc)
            raw.append(rec)
            if progress:
                progress(f"setting {setting} rep {rep} {alg}: error={rec['error']:.4g}")
    rows = []
    for alg in algs:
        recs = [r for r in raw if r["algorithm"] == alg]
        ok = [r for r in recs if not r["failure"]]
        rows.append(BenchmarkRow(
            alg, setting,
            float(np.mean([r["error"] for r in ok])) if ok else float("nan"),
            float(np.mean([r["time"] for r in ok])) if ok else float("nan"),
            len(recs), len(recs) - len(ok),
            float(np.mean([r["fit_time"] for r in ok])) if ok else float("nan")))
    return rows, raw


def published_rows(settings=(1, 2, 3)) -> list[BenchmarkRow]:
    rows = []
    for alg, (errs, times) in PUBLISHED_FILTERING.items():
        for s in settings:
            t = times[s - 1]
            rows.append(BenchmarkRow(alg, s, errs[s - 1], float("nan") if t is None else t, 10,
                                     source="published"))
    return rows


# ------------------------------------------------------ estimation benchmark

@dataclass
class EstimationConfig:
    """Setup of the epidemic parameter-estimation benchmark."""

    T: int = 30
    process_var: float = 1e-4
    obs_var: float = 1e-4
    observed: tuple = (0, 1)
    clamp: bool = True
    x0: tuple | None = None
    state_prior_var: float = 1e-4
    prior_mean: float = 0.1
    prior_var: float = 0.01
    param_box: tuple = (0.0, 2.0)
    param_noise: float = 1e-4
    N: int = 200
    kernel_family: str = "squared_exponential"
    length_scale: float = 2.0
    reg: float = 1e-4
    n_samples: int = 100
    chains: int = 8
    iters: int = 300
    warmup: int | None = None
    level: float = 0.95
    draws: int = 30


@dataclass
class EstimationReport:
    model: str
    names: tuple
    truth: dict
    summary: object
    chains: list
    states: np.ndarray
    observations: np.ndarray
    noiseless_truth: np.ndarray
    pushforward_errors: np.ndarray
    pushforward_params: np.ndarray
    fit_time: float
    wall_time: float

    @property
    def mean_pushforward_error(self) -> float:
        return float(np.mean(self.pushforward_errors))


def default_x0(model: str) -> np.ndarray:
    return np.array([0.99, 0.0, 0.01, 0.0]) if model == "seirs" else np.array([0.99, 0.01, 0.0])


def estimation_problem(model: str, seed: int, cfg: EstimationConfig):
    """True system, its simulated data, the augmented system and the fitted model."""
    model = model.lower()
    if model not in ESTIMATED_PARAMS:
        raise ConfigError(f"model must be one of {sorted(ESTIMATED_PARAMS)}", "estimate.model")
    names = ESTIMATED_PARAMS[model]
    truth = {k: DEFAULT_EPIDEMIC_PARAMS[k] for k in names}
    base = EpidemicSystem(model, truth, cfg.process_var, cfg.obs_var, observed=cfg.observed,
                          clamp=cfg.clamp)
    x0 = default_x0(model) if cfg.x0 is None else np.asarray(cfg.x0, float)
    states, obs = simulate(base, x0, cfg.T, _rng(seed, 0))
    aug = augment_with_parameters(base, names, cfg.param_noise)
    x0_prior = GaussianPrior(x0, cfg.state_prior_var * np.eye(base.n))
    lo, hi = cfg.param_box

    def initial(rng, size):
        return np.vstack([x0_prior.sample(rng, size), rng.uniform(lo, hi, (len(names), size))])

    t0 = time.perf_counter()
    kmodel = fit(aug, trajectory_sampler(aug, initial, cfg.T),
                 Kernel(cfg.kernel_family, cfg.length_scale), cfg.N, reg=cfg.reg, rng=_rng(seed, 1))
    fit_time = time.perf_counter() - t0
    return base, aug, kmodel, x0_prior, states, obs, truth, fit_time


def estimation_benchmark(model: str, seed: int = 42, config: EstimationConfig | None = None,
                         workers: int = 1) -> EstimationReport:
    """Estimate the model's parameters with pooled chains and score the pushforward.

    Pushforward trajectories are simulated without noise from the same initial
    state and compared with the noiseless trajectory under the true parameters.
    """
    cfg = config or EstimationConfig()
    base, aug, kmodel, x0_prior, states, obs, truth, fit_time = estimation_problem(model, seed, cfg)
    names = ESTIMATED_PARAMS[model.lower()]
    n_p = len(names)
    p0 = GaussianPrior(np.full(n_p, cfg.prior_mean), cfg.prior_var * np.eye(n_p))
    t0 = time.perf_counter()
    chains = run_chains(cfg.chains, aug, kmodel, x0_prior, p0, obs, cfg.iters, cfg.n_samples,
                        base_seed=seed, warmup=cfg.warmup, workers=workers)
    wall = time.perf_counter() - t0
    summary = summarize(chains, cfg.warmup, cfg.level, names=names)
    x0 = x0_prior.mean
    clean = pushforward_trajectories(base, _point_summary(summary, truth), x0, cfg.T, 1,
                                     _rng(seed, 2))["trajectories"][0]
    push = pushforward_trajectories(base, summary, x0, cfg.T, cfg.draws, _rng(seed, 3), truth=clean)
    return EstimationReport(model.lower(), names, truth, summary, chains, states, obs, clean,
                            push["errors"], push["params"], fit_time, wall)


def _point_summary(summary, values: dict):
    """A summary whose pooled distribution is a point mass at ``values``."""
    point = np.array([[values[n] for n in summary.names]])
    return replace(summary, samples=point)


# -------------------------------------------------------------------- output

def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def artifact_hash(config: dict) -> str:
    """Digest of the resolved configuration and package version."""
    blob = json.dumps({"config": _jsonable(config), "version": __version__}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def write_metadata(out_dir, command: str, config: dict, seed: int, started: float,
                   extra: dict | None = None) -> Path:
    """Metadata JSON; the only output that carries timestamps."""
    meta = {"command": command, "seed": seed, "version": __version__,
            "artifact_hash": artifact_hash(config), "config": config,
            "started_unix": started, "finished_unix": time.time()}
    meta.update(extra or {})
    return write_json(Path(out_dir) / "metadata.json", meta)


def svg_line_plot(path, series: dict, title: str = "", xlabel: str = "", ylabel: str = "",
                  logx: bool = False, logy: bool = False, width: int = 480,
                  height: int = 320) -> Path:
    """Minimal SVG line chart; ``series`` maps a label to ``(x, y)`` arrays."""
    tx = np.log10 if logx else (lambda a: a)
    ty = np.log10 if logy else (lambda a: a)
    pts = {k: (tx(np.asarray(x, float)), ty(np.asarray(y, float))) for k, (x, y) in series.items()}
    finite = [(x[np.isfinite(x) & np.isfinite(y)], y[np.isfinite(x) & np.isfinite(y)])
              for x, y in pts.values()]
    xs = np.concatenate([f[0] for f in finite]) if finite else np.array([0.0, 1.0])
    ys = np.concatenate([f[1] for f in finite]) if finite else np.array([0.0, 1.0])
    x0, x1 = (xs.min(), xs.max()) if xs.size else (0.0, 1.0)
    y0, y1 = (ys.min(), ys.max()) if ys.size else (0.0, 1.0)
    x1, y1 = (x1 if x1 > x0 else x0 + 1.0), (y1 if y1 > y0 else y0 + 1.0)
    m = 50
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]

    def sx(v):
        return m + (v - x0) / (x1 - x0) * (width - 2 * m)

    def sy(v):
        return height - m - (v - y0) / (y1 - y0) * (height - 2 * m)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<line x1="{m}" y1="{height - m}" x2="{width - m}" y2="{height - m}" stroke="black"/>',
             f'<line x1="{m}" y1="{m}" x2="{m}" y2="{height - m}" stroke="black"/>',
             f'<text x="{width / 2}" y="20" text-anchor="middle">{title}</text>',
             f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle">{xlabel}</text>',
             f'<text x="12" y="{height / 2}" transform="rotate(-90 12 {height / 2})" '
             f'text-anchor="middle">{ylabel}</text>']
    for i, (label, (x, y)) in enumerate(pts.items()):
        ok = np.isfinite(x) & np.isfinite(y)
        if not ok.any():
            continue
        c = colors[i % len(colors)]
        d = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x[ok], y[ok]))
        parts.append(f'<polyline fill="none" stroke="{c}" points="{d}"/>')
        parts.append(f'<text x="{width - m}" y="{m + 15 * i}" fill="{c}" '
                     f'text-anchor="end">{label}</text>')
    parts.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return path


def config_dict(cfg) -> dict:
    return _jsonable(asdict(cfg))
