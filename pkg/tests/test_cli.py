import csv
import json

import numpy as np
import pytest

from kkf.cli import main
from kkf.filters import GaussianPrior, run_filter
from kkf.kedmd import KoopmanModel
from kkf.systems import make_random_linear, simulate

PRIOR = ["--set", "prior.mean=[0.1, 0.2, 0.3]", "--set", "prior.cov=[[0.1,0,0],[0,0.1,0],[0,0,0.1]]"]


def run(tmp_path, name, *argv):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_filter_kf_writes_trace(tmp_path):
    code, out = run(tmp_path, "kf", "filter", "--set", "algorithm=kf", *PRIOR)
    assert code == 0
    rows = _rows(out / "trace.csv")
    assert rows[0] == ["step", "x0", "x1", "x2", "innovation0", "innovation1"]
    assert len(rows) == 1 + 21
    assert rows[1][4] == "" and rows[2][4] != ""
    for name in ("intervals.csv", "observations.csv", "states.csv", "resolved_config.json",
                 "metadata.json"):
        assert (out / name).exists()
    resolved = json.loads((out / "resolved_config.json").read_text())
    assert resolved["seed"] == 42 and resolved["config"]["T"] == 20


@pytest.mark.parametrize("argv", [
    ["fit", "--set", "kernel.family=matern12"],
    ["fit", "--set", "kernel.family=matern12", "--set", "kernel.length_scale=1000",
     "--set", "kernel.bandwidth=2"],
    ["filter", "--set", "algorithm=pf", "--set", "options.N_p=0", *PRIOR],
    ["filter", "--set", "algorithm=kkf", "--set", "options.n_samples=1", *PRIOR],
    ["filter", "--set", "algorithm=kalman", *PRIOR],
    ["filter", "--set", "algorithm=kf", "--set", "T=abc", *PRIOR],
    ["filter", "--set", "algorithm=kf"],
    ["bench", "--set", "settings=[4]"],
    ["estimate", "--set", "model=seir"],
    ["estimate", "--set", "iters=10", "--set", "warmup=10"],
    ["error-decay", "--set", "N_grid=[1, 10]"],
    ["filter", "--config", "/nonexistent/config.json"],
])
def test_configuration_errors_exit_2(tmp_path, argv, capsys):
    code, _ = run(tmp_path, "bad", *argv)
    assert code == 2
    assert "config error" in capsys.readouterr().err


def test_missing_length_scale_names_the_key(tmp_path, capsys):
    code, _ = run(tmp_path, "bad", "fit", "--set", "kernel.family=matern12")
    assert code == 2
    assert "kernel.length_scale" in capsys.readouterr().err


@pytest.mark.filterwarnings("ignore:overflow")
def test_numerical_failure_exits_3(tmp_path):
    # an exploding linear system overflows within a few steps
    code, _ = run(tmp_path, "num", "filter", "--set", "algorithm=kf", "--set", "system.kind=linear",
                  "--set", "system.A=[[1e200]]", "--set", "system.C=[[1.0]]",
                  "--set", "system.Q=[[0.0]]", "--set", "system.R=[[1.0]]",
                  "--set", "prior.mean=[1e200]", "--set", "prior.cov=[[1.0]]")
    assert code == 3


def test_fit_then_filter_matches_library(tmp_path):
    code, fit_out = run(tmp_path, "fit", "fit", "--set", "kernel.family=matern12",
                        "--set", "kernel.length_scale=1000", "--set", "kedmd.N=60")
    assert code == 0
    report = json.loads((fit_out / "fit_report.json").read_text())
    assert report["N"] == 60
    assert max(report["interpolation_residuals"][k] for k in ("U_relative", "C_relative",
                                                             "B_relative")) < 1e-6
    model_path = fit_out / "model.npz"
    code, out = run(tmp_path, "kkf", "filter", "--set", "algorithm=kkf",
                    "--set", f"model={json.dumps(str(model_path))}",
                    "--set", "options.n_samples=50", *PRIOR)
    assert code == 0
    # rebuild the same run through the library
    system = make_random_linear(np.random.default_rng(42), 3, 2, 0.5, "std", 0.01)
    prior = GaussianPrior([0.1, 0.2, 0.3], 0.1 * np.eye(3))
    _, obs = simulate(system, prior.mean, 20, np.random.default_rng([42, 0]))
    trace = run_filter("kkf", system, prior, obs, {"n_samples": 50}, seed=[42, 2],
                       model=KoopmanModel.load(model_path))
    rows = _rows(out / "trace.csv")[1:]
    got = np.array([[float(v) for v in r[1:4]] for r in rows]).T
    assert np.array_equal(got, trace.estimates)


def test_epidemic_box_sampler_defaults_to_unit_range(tmp_path):
    code, out = run(tmp_path, "fit", "fit", "--set", "system.kind=epidemic", "--set", "kedmd.N=50",
                    "--set", "kernel.family=squared_exponential", "--set", "kernel.length_scale=0.6")
    assert code == 0
    X = KoopmanModel.load(out / "model.npz").X
    assert X.min() >= 0.0 and X.max() <= 1.2


def test_bench_setting_one(tmp_path):
    code, out = run(tmp_path, "bench", "bench", "--set", "settings=[1]",
                    "--set", "replications=1", "--set", "T=5",
                    "--set", "pf_sizes=[100, 200, 300]", "--set", "kkf_sizes=[20, 30, 40]")
    assert code == 0
    table = _rows(out / "table.csv")
    measured = [r for r in table[1:] if r[-1] == "measured"]
    assert len(measured) == 8
    assert {r[0] for r in measured} == {"ekf", "ukf", "pf100", "pf200", "pf300", "kkf20", "kkf30",
                                        "kkf40"}
    assert any(r[-1] == "published" for r in table[1:])
    assert len(_rows(out / "raw.csv")) == 1 + 8
    assert _rows(out / "timings.csv")[0][2] == "mean_seconds"


def test_bench_is_reproducible(tmp_path):
    argv = ["bench", "--set", "settings=[2]", "--set", "replications=2", "--set", "T=5",
            "--set", "pf_sizes=[50]", "--set", "kkf_sizes=[20]"]
    assert run(tmp_path, "a", *argv)[0] == 0
    assert run(tmp_path, "b", *argv)[0] == 0
    for name in ("table.csv", "raw.csv", "resolved_config.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_estimate_outputs(tmp_path):
    code, out = run(tmp_path, "est", "estimate", "--workers", "1", "--set", "chains=3",
                    "--set", "iters=4", "--set", "T=8", "--set", "N=40",
                    "--set", "n_samples=20", "--set", "draws=2")
    assert code == 0
    assert sorted(p.name for p in out.glob("chain_*.csv")) == [f"chain_{i}.csv" for i in range(3)]
    assert len(_rows(out / "chain_0.csv")) == 1 + 5
    summary = json.loads((out / "summary.json").read_text())
    assert summary["names"] == ["beta", "gamma"] and summary["warmup"] == 2
    assert len(list(out.glob("summary*.json"))) == 1
    for name in ("density_beta.csv", "density_gamma.svg", "pushforward.csv"):
        assert (out / name).exists()
    assert len(_rows(out / "pushforward.csv")) == 1 + 2


def test_error_decay_outputs(tmp_path):
    code, out = run(tmp_path, "ed", "error-decay", "--set", "systems=2", "--set", "N_grid=[20, 40]",
                    "--set", "T=5", "--set", "n_samples=20")
    assert code == 0
    fit = json.loads((out / "fit.json").read_text())
    assert {"C_fit", "alpha_fit", "redrawn_systems", "envelope_violations"} <= set(fit)
    assert len(_rows(out / "errors.csv")) == 1 + 4
    assert (out / "error_decay.svg").exists()


def test_environment_overrides(tmp_path, monkeypatch):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"algorithm": "kf", "prior": {"mean": [0, 0, 0],
                                                               "cov": [[1, 0, 0], [0, 1, 0],
                                                                       [0, 0, 1]]}}))
    monkeypatch.setenv("KKF_CONFIG", str(config))
    monkeypatch.setenv("KKF_SEED", "7")
    monkeypatch.setenv("KKF_SET", "T=5;intervals.level=0.9")
    code, out = run(tmp_path, "env", "filter")
    assert code == 0
    resolved = json.loads((out / "resolved_config.json").read_text())
    assert resolved["seed"] == 7 and resolved["config"]["T"] == 5
    assert resolved["config"]["intervals"]["level"] == 0.9
    # flags win over the environment
    code, out = run(tmp_path, "flag", "filter", "--seed", "3", "--set", "T=4")
    resolved = json.loads((out / "resolved_config.json").read_text())
    assert code == 0 and resolved["seed"] == 3 and resolved["config"]["T"] == 4
    monkeypatch.setenv("KKF_SEED", "seven")
    assert run(tmp_path, "bad", "filter")[0] == 2
