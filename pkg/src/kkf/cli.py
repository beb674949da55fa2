"""Command-line interface: ``kkf {fit,filter,estimate,bench,error-decay}``.

Each command reads a JSON config (``--config``), applies ``--set key=value``
overrides (dotted key paths, JSON-parsed values), validates it against the
command's schema and writes its outputs, the resolved config and a metadata
record into ``--out``.

Environment variables ``KKF_CONFIG``, ``KKF_SEED``, ``KKF_OUT`` and
``KKF_WORKERS`` supply defaults for the matching flags; ``KKF_SET`` holds
extra overrides separated by ``;`` (applied before the ``--set`` flags).

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from kkf.errors import ConfigError, KKFError
from kkf.experiments import (
    ENVELOPE_C,
    ESTIMATED_PARAMS,
    EstimationConfig,
    SirBenchmarkConfig,
    algorithm_ids,
    error_decay_study,
    estimation_benchmark,
    published_rows,
    sir_benchmark,
    svg_line_plot,
    write_csv,
    write_json,
    write_metadata,
)
from kkf.filters import ALGORITHMS, GaussianPrior, run_filter, write_trace_csv
from kkf.kedmd import KoopmanModel, fit
from kkf.kernels import Kernel
from kkf.systems import (
    EpidemicSystem,
    LinearGaussianSystem,
    ScalarGainSystem,
    make_random_linear,
    simulate,
    trajectory_sampler,
    uniform_box_sampler,
)

ENV_PREFIX = "KKF_"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

REQUIRED = object()   # schema marker: the key has no default
FREE = object()       # schema marker: any JSON value (or mapping) is accepted

SYSTEM_SCHEMA = {
    "kind": "random_linear",
    # linear
    "A": FREE, "C": FREE, "Q": FREE, "R": FREE,
    # random_linear
    "n": 3, "p": 2, "entry_scale": 0.5, "entry_scale_is": "std", "noise": 0.01,
    # epidemic
    "model": "sir", "params": FREE, "process_var": 1e-4, "obs_var": 1e-4, "observed": [1],
    "clamp": True,
    # scalar
    "theta": 0.5, "q": 1e-4, "r": 1e-4,
}
KERNEL_SCHEMA = {"family": REQUIRED, "length_scale": REQUIRED, "variance": 1.0}
KEDMD_SCHEMA = {"N": 100, "reg": None, "sampler": "box", "low": FREE, "high": FREE,
                "horizon": 15}
PRIOR_SCHEMA = {"mean": REQUIRED, "cov": REQUIRED}

SCHEMAS = {
    "fit": {"system": SYSTEM_SCHEMA, "kernel": KERNEL_SCHEMA, "kedmd": KEDMD_SCHEMA,
            "prior": {"mean": None, "cov": None}},
    "filter": {"system": SYSTEM_SCHEMA, "algorithm": REQUIRED, "prior": PRIOR_SCHEMA,
               "x0": None, "T": 20, "observations": None, "model": None,
               "kernel": {"family": None, "length_scale": None, "variance": 1.0},
               "kedmd": KEDMD_SCHEMA, "options": FREE,
               "intervals": {"level": 0.95, "method": "diag"}},
    "estimate": {"model": "sir", **{f.name: f.default for f in fields(EstimationConfig)}},
    "bench": {"settings": [1, 2, 3], "replications": 10,
              **{f.name: f.default for f in fields(SirBenchmarkConfig)}},
    "error-decay": {"systems": 15, "N_grid": [50, 100, 150, 200, 300, 400, 500], "T": 20,
                    "n_samples": 100, "kernel": {"family": "matern12", "length_scale": 1000.0,
                                                 "variance": 1.0},
                    "node_box": 1000.0, "entry_scale": 0.5, "entry_scale_is": "std",
                    "noise": 0.01, "x0": [1.0, 1.5, 2.0], "prior_mean": [0.1, 0.2, 0.3],
                    "prior_var": 0.1, "reg": None, "redraw_outside_box": True},
}

FILTER_OPTIONS = {"kf": {}, "ekf": {"jacobian_step": float},
                  "ukf": {"alpha": float, "beta": float, "kappa": float},
                  "pf": {"N_p": int}, "kkf": {"n_samples": int, "freeze_R": bool}}


# ------------------------------------------------------------------- config

def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def _check_type(default, value, key):
    if default is None or default is FREE or value is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", key)
    elif isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", key)
    elif isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", key)
        value = float(value)
    elif isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", key)
    elif isinstance(default, (list, tuple)):
        if not isinstance(value, list):
            raise ConfigError(f"expected a list, got {value!r}", key)
    return value


def resolve(schema: dict, user: dict, prefix: str = "") -> dict:
    """Merge ``user`` into ``schema`` defaults; reject unknown and missing keys."""
    if not isinstance(user, dict):
        raise ConfigError("expected a JSON object", prefix.rstrip(".") or "<root>")
    unknown = sorted(set(user) - set(schema))
    if unknown:
        raise ConfigError("unknown key", prefix + unknown[0])
    out = {}
    for key, default in schema.items():
        path = prefix + key
        if isinstance(default, dict):
            out[key] = resolve(default, user.get(key, {}) or {}, path + ".")
        elif key in user:
            out[key] = _check_type(default, user[key], path)
        elif default is REQUIRED:
            raise ConfigError("missing required key", path)
        elif default is FREE:
            out[key] = None
        else:
            out[key] = copy.deepcopy(_plain(default))
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(config: dict, assignment: str) -> None:
    """Apply ``a.b.c=value`` in place; ``value`` is parsed as JSON when possible."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} must look like key=value", "--set")
    key, text = assignment.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError("empty key in override", "--set")
    node = config
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError("cannot set a key below a non-object value", key)
    node[parts[-1]] = _parse_value(text)


def load_config(command: str, path: str | None, overrides) -> dict:
    user = {}
    if path:
        try:
            user = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}", "--config") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}", "--config") from None
    for item in overrides:
        apply_override(user, item)
    return resolve(SCHEMAS[command], user)


# --------------------------------------------------------------- builders

def build_system(cfg: dict, seed: int):
    kind = cfg["kind"]
    if kind == "linear":
        for k in ("A", "C", "Q", "R"):
            if cfg[k] is None:
                raise ConfigError("required for a linear system", f"system.{k}")
        return LinearGaussianSystem(cfg["A"], cfg["C"], cfg["Q"], cfg["R"])
    if kind == "random_linear":
        return make_random_linear(np.random.default_rng(seed), cfg["n"], cfg["p"],
                                  cfg["entry_scale"], cfg["entry_scale_is"], cfg["noise"])
    if kind == "epidemic":
        params = cfg["params"] or {}
        if not isinstance(params, dict):
            raise ConfigError("expected an object of parameter values", "system.params")
        return EpidemicSystem(cfg["model"], params, cfg["process_var"], cfg["obs_var"],
                              cfg["observed"], cfg["clamp"])
    if kind == "scalar":
        return ScalarGainSystem(cfg["theta"], cfg["q"], cfg["r"])
    raise ConfigError(f"unknown system kind {kind!r}", "system.kind")


def build_kernel(cfg: dict) -> Kernel:
    for k in ("family", "length_scale"):
        if cfg[k] is None:
            raise ConfigError("missing required key", f"kernel.{k}")
    try:
        return Kernel(cfg["family"], float(cfg["length_scale"]), float(cfg["variance"]))
    except ValueError as exc:
        raise ConfigError(str(exc), "kernel") from None


def build_prior(cfg: dict, n: int) -> GaussianPrior:
    try:
        return GaussianPrior(np.asarray(cfg["mean"], float), np.asarray(cfg["cov"], float))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "prior") from None


def build_sampler(cfg: dict, system, prior: GaussianPrior | None):
    if cfg["sampler"] == "box":
        # compartment fractions live in [0, 1]; other systems use the linear-study box
        lo, hi = (0.0, 1.2) if isinstance(system, EpidemicSystem) else (-1000.0, 1000.0)
        low = cfg["low"] if cfg["low"] is not None else [lo] * system.n
        high = cfg["high"] if cfg["high"] is not None else [hi] * system.n
        if len(low) != system.n or len(high) != system.n:
            raise ConfigError(f"box bounds need {system.n} entries", "kedmd.low")
        return uniform_box_sampler(low, high)
    if cfg["sampler"] == "trajectory":
        if prior is None:
            raise ConfigError("the trajectory sampler needs a prior", "prior")
        return trajectory_sampler(system, prior, int(cfg["horizon"]))
    raise ConfigError(f"unknown sampler {cfg['sampler']!r}", "kedmd.sampler")


def _fit_model(cfg: dict, system, prior, seed: int) -> KoopmanModel:
    if cfg["kedmd"]["N"] < 2:
        raise ConfigError("must be at least 2", "kedmd.N")
    reg = cfg["kedmd"]["reg"]
    if reg is not None and reg < 0:
        raise ConfigError("must be non-negative", "kedmd.reg")
    return fit(system, build_sampler(cfg["kedmd"], system, prior), build_kernel(cfg["kernel"]),
               cfg["kedmd"]["N"], reg=reg, rng=np.random.default_rng([seed, 1]))


def _filter_options(algorithm: str, options) -> dict:
    options = options or {}
    if not isinstance(options, dict):
        raise ConfigError("expected an object", "options")
    allowed = FILTER_OPTIONS[algorithm]
    out = {}
    for k, v in options.items():
        if k not in allowed:
            raise ConfigError(f"not an option of {algorithm}", f"options.{k}")
        out[k] = _check_type(allowed[k](), v, f"options.{k}")
    if algorithm == "pf" and out.get("N_p", 1000) < 2:
        raise ConfigError("N_p must be at least 2", "options.N_p")
    if algorithm == "kkf" and out.get("n_samples", 100) < 2:
        raise ConfigError("n_samples must be at least 2", "options.n_samples")
    return out


# --------------------------------------------------------------- commands

def cmd_fit(cfg: dict, seed: int, out: Path, workers: int) -> dict:
    system = build_system(cfg["system"], seed)
    prior = None
    if cfg["prior"]["mean"] is not None:
        prior = build_prior(cfg["prior"], system.n)
    model = _fit_model(cfg, system, prior, seed)
    model.save(out / "model.npz")
    res = model.interpolation_residuals()
    report = {"N": model.N, "reg": model.reg, "condition_number": model.condition_number(),
              "interpolation_residuals": res}
    write_json(out / "fit_report.json", report)
    return {}


def _load_observations(path: str, p: int) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except OSError:
        raise ConfigError(f"cannot read observations file {path}", "observations") from None
    # rows are steps; a leading step column is dropped when present
    if data.shape[1] == p + 1:
        data = data[:, 1:]
    if data.shape[1] != p:
        raise ConfigError(f"expected {p} observation columns, got {data.shape[1]}", "observations")
    return data.T


def cmd_filter(cfg: dict, seed: int, out: Path, workers: int) -> dict:
    algorithm = str(cfg["algorithm"]).lower()
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"must be one of {list(ALGORITHMS)}", "algorithm")
    options = _filter_options(algorithm, cfg["options"])
    system = build_system(cfg["system"], seed)
    if algorithm == "kf" and not isinstance(system, LinearGaussianSystem):
        raise ConfigError("kf needs a linear system", "system.kind")
    prior = build_prior(cfg["prior"], system.n)
    if prior.mean.shape[0] != system.n:
        raise ConfigError(f"prior mean needs {system.n} entries", "prior.mean")
    states = None
    if cfg["observations"] is not None:
        obs = _load_observations(cfg["observations"], system.p)
    else:
        if cfg["T"] < 1:
            raise ConfigError("must be at least 1", "T")
        x0 = prior.mean if cfg["x0"] is None else np.asarray(cfg["x0"], float)
        states, obs = simulate(system, x0, cfg["T"], np.random.default_rng([seed, 0]))
    model = None
    if algorithm == "kkf":
        model = (KoopmanModel.load(cfg["model"]) if cfg["model"] is not None
                 else _fit_model(cfg, system, prior, seed))
        if model.n != system.n:
            raise ConfigError(f"model state dimension {model.n} != system {system.n}", "model")
    trace = run_filter(algorithm, system, prior, obs, options, seed=[seed, 2], model=model)

    n, T1 = trace.estimates.shape
    head = ["step"] + [f"x{i}" for i in range(n)] + [f"innovation{j}" for j in range(system.p)]
    rows = []
    for k in range(T1):
        inn = trace.innovations[:, k - 1] if k > 0 else [""] * system.p
        rows.append([k, *trace.estimates[:, k], *inn])
    write_csv(out / "trace.csv", head, rows)
    ci = cfg["intervals"]
    if ci["method"] not in ("diag", "svd"):
        raise ConfigError("must be 'diag' or 'svd'", "intervals.method")
    write_trace_csv(trace, out / "intervals.csv", ci["level"], ci["method"])
    write_csv(out / "observations.csv", ["step"] + [f"y{j}" for j in range(system.p)],
              [[k + 1, *obs[:, k]] for k in range(obs.shape[1])])
    extra = {"wall_time": trace.wall_time}
    if states is not None:
        write_csv(out / "states.csv", ["step"] + [f"x{i}" for i in range(n)],
                  [[k, *states[:, k]] for k in range(states.shape[1])])
        extra["l2_error"] = trace.l2_error(states)
    return extra


def _dataclass_from(cls, cfg: dict):
    kwargs = {}
    for f in fields(cls):
        v = cfg[f.name]
        kwargs[f.name] = tuple(v) if isinstance(v, list) else v
    return cls(**kwargs)


def cmd_estimate(cfg: dict, seed: int, out: Path, workers: int) -> dict:
    model = str(cfg["model"]).lower()
    if model not in ESTIMATED_PARAMS:
        raise ConfigError(f"must be one of {sorted(ESTIMATED_PARAMS)}", "model")
    ecfg = _dataclass_from(EstimationConfig, cfg)
    if ecfg.chains < 1:
        raise ConfigError("must be at least 1", "chains")
    if ecfg.iters < 1:
        raise ConfigError("must be at least 1", "iters")
    if ecfg.warmup is not None and not 0 <= ecfg.warmup < ecfg.iters:
        raise ConfigError("must lie in [0, iters)", "warmup")
    if ecfg.draws < 1:
        raise ConfigError("must be at least 1", "draws")
    report = estimation_benchmark(model, seed, ecfg, workers=workers)
    names = report.names
    for i, ch in enumerate(report.chains):
        write_csv(out / f"chain_{i}.csv", ["iteration", *names],
                  [[k, *row] for k, row in enumerate(ch.param_trace)])
    s = report.summary
    summary = s.as_dict()
    summary.update({"model": model, "truth": report.truth,
                    "mean_pushforward_l2": report.mean_pushforward_error,
                    "chain_errors": [c.error for c in report.chains]})
    write_json(out / "summary.json", summary)
    for j, name in enumerate(names):
        write_csv(out / f"density_{name}.csv", ["value", "density"],
                  zip(s.density_grid[j], s.density[j]))
        svg_line_plot(out / f"density_{name}.svg", {name: (s.density_grid[j], s.density[j])},
                      title=f"pooled density of {name}", xlabel=name, ylabel="density")
    write_csv(out / "pushforward.csv", ["draw", *names, "l2_error"],
              [[d, *p, e] for d, (p, e) in enumerate(zip(report.pushforward_params,
                                                          report.pushforward_errors))])
    return {"fit_time": report.fit_time, "wall_time": report.wall_time}


def cmd_bench(cfg: dict, seed: int, out: Path, workers: int) -> dict:
    settings = cfg["settings"]
    if not settings or any(s not in (1, 2, 3) for s in settings):
        raise ConfigError("settings must be a non-empty subset of [1, 2, 3]", "settings")
    if cfg["replications"] < 1:
        raise ConfigError("must be at least 1", "replications")
    bcfg = _dataclass_from(SirBenchmarkConfig, cfg)
    if any(n < 2 for n in bcfg.pf_sizes):
        raise ConfigError("particle counts must be at least 2", "pf_sizes")
    if any(n < 2 for n in bcfg.kkf_sizes):
        raise ConfigError("node counts must be at least 2", "kkf_sizes")
    rows, raw = [], []
    for s in settings:
        r, w = sir_benchmark(s, cfg["replications"], seed, bcfg)
        rows += r
        raw += w
    write_csv(out / "raw.csv", ["setting", "replication", "algorithm", "beta", "l2_error",
                                "failure"],
              [[r["setting"], r["replication"], r["algorithm"], r["beta"], r["error"],
                r["failure"]] for r in raw])
    table = [[r.algorithm, r.setting, r.mean_error, r.replications, r.failures, r.source]
             for r in rows + published_rows(settings)]
    write_csv(out / "table.csv", ["algorithm", "setting", "mean_l2_error", "replications",
                                  "failures", "source"], table)
    # wall-clock numbers vary between runs, so they live apart from the deterministic tables
    timing = [[r.algorithm, r.setting, r.mean_time, r.mean_fit_time, r.source]
              for r in rows + published_rows(settings)]
    write_csv(out / "timings.csv", ["algorithm", "setting", "mean_seconds", "mean_fit_seconds",
                                    "source"], timing)
    return {"algorithms": algorithm_ids(bcfg)}


def cmd_error_decay(cfg: dict, seed: int, out: Path, workers: int) -> dict:
    try:
        result = error_decay_study(cfg["systems"], cfg["N_grid"], cfg["T"], seed, cfg["n_samples"],
                                   build_kernel(cfg["kernel"]), cfg["node_box"], cfg["entry_scale"],
                                   cfg["entry_scale_is"], cfg["noise"], cfg["x0"],
                                   cfg["prior_mean"], cfg["prior_var"], cfg["reg"],
                                   cfg["redraw_outside_box"])
    except ValueError as exc:
        if isinstance(exc, (ConfigError, KKFError)):
            raise
        raise ConfigError(str(exc), "error-decay") from None
    write_csv(out / "errors.csv", ["system", "N", "l2_error"],
              [[s, N, result.errors[s, j]] for s in range(result.errors.shape[0])
               for j, N in enumerate(result.N_grid)])
    viol = result.envelope_violations()
    write_json(out / "fit.json", {"C_fit": result.C_fit, "alpha_fit": result.alpha_fit,
                                  "excluded_points": result.excluded, "redrawn_systems": result.redrawn,
                                  "envelope_C": ENVELOPE_C,
                                  "envelope_violations": viol, "failures": result.failures})
    Ns = np.asarray(result.N_grid, float)
    series = {f"system {s}": (Ns, result.errors[s]) for s in range(result.errors.shape[0])}
    series["fit"] = (Ns, result.C_fit * Ns ** result.alpha_fit)
    series["8000 N^-1/2"] = (Ns, ENVELOPE_C / np.sqrt(Ns))
    svg_line_plot(out / "error_decay.svg", series, title="KKF vs KF trajectory error",
                  xlabel="N", ylabel="error", logx=True, logy=True)
    return {"wall_time": result.wall_time}


COMMANDS = {"fit": cmd_fit, "filter": cmd_filter, "estimate": cmd_estimate,
            "bench": cmd_bench, "error-decay": cmd_error_decay}


# -------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kkf", description="Koopman Kalman filtering experiments.",
        epilog=f"Flags default to the environment variables {ENV_PREFIX}CONFIG, "
               f"{ENV_PREFIX}SEED, {ENV_PREFIX}OUT, {ENV_PREFIX}WORKERS and {ENV_PREFIX}SET.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", default=os.environ.get(ENV_PREFIX + "CONFIG"),
                        help="JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="global seed (default 42)")
    parser.add_argument("--out", default=os.environ.get(ENV_PREFIX + "OUT", "kkf-out"),
                        help="output directory")
    parser.add_argument("--workers", type=int, default=None,
                        help="parallel workers for chains (default: available cores)")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config value (repeatable)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"expected an integer, got {raw!r}", ENV_PREFIX + name) from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        seed = args.seed if args.seed is not None else _env_int("SEED", 42)
        workers = args.workers if args.workers is not None else _env_int("WORKERS",
                                                                          os.cpu_count() or 1)
        if workers < 1:
            raise ConfigError("must be at least 1", "--workers")
        env_sets = [s for s in os.environ.get(ENV_PREFIX + "SET", "").split(";") if s.strip()]
        cfg = load_config(args.command, args.config, env_sets + args.overrides)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        started = time.time()
        write_json(out / "resolved_config.json", {"command": args.command, "seed": seed,
                                                  "config": cfg})
        extra = COMMANDS[args.command](cfg, seed, out, workers)
        write_metadata(out, args.command, cfg, seed, started, extra)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KKFError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if args.verbose:
        print(f"wrote outputs to {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
