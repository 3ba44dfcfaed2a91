import json

import pytest

from qtraj.cli import EXIT_CONFIG, EXIT_OK, EXIT_STATISTICAL, main, run
from qtraj.config import ConfigError, ExperimentConfig, config_from_dict, load_config
from qtraj.models import ModelSpec


def test_load_full_config(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(
        """
task = "clt"
seed = 7
steps = 200
trajectories = 300
pattern = "11"

[model]
name = "toy"
d = 2

[environment]
kind = "deterministic"

[options]
alpha_level = 0.01
"""
    )
    cfg = load_config(str(path))
    assert cfg.task == "clt"
    assert cfg.model.name == "toy"
    assert cfg.model.params == {"d": 2}
    assert cfg.patterns == ("11",)
    assert cfg.n_steps == 200 and cfg.n_trajectories == 300 and cfg.seed == 7


def test_config_requires_model():
    with pytest.raises(ConfigError):
        config_from_dict({"task": "validate"})


def test_config_rejects_unknown_task():
    with pytest.raises(ConfigError):
        config_from_dict({"task": "frobnicate", "model": {"name": "toy"}}).validated()


def test_markov_env_config(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(
        """
task = "validate"
seed = 1

[model]
name = "amplitude-damping"

[environment]
kind = "finite-markov"
transition = [[0.9, 0.1], [0.2, 0.8]]

[[environment.symbols]]
gamma = 0.5

[[environment.symbols]]
gamma = 0.9
"""
    )
    cfg = load_config(str(path))
    code, out = run(cfg)
    assert code == EXIT_OK
    assert out["validate"]["passed"]


def test_cli_validate_exit_zero(capsys):
    code = main(["validate", "--model", "toy", "--seed", "1"])
    assert code == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["constants"]["name"] == "toy"
    assert payload["validate"]["passed"]


def test_cli_model_param_passthrough(capsys):
    code = main(["esp", "--model", "cyclic-keep-switch", "--seed", "1", "--a", "0.5"])
    assert code == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["esp"]["found_at"] == 2


def test_cli_unknown_model_is_config_error(capsys):
    assert main(["validate", "--model", "zebra"]) == EXIT_CONFIG


def test_cli_missing_model_is_config_error():
    assert main(["validate"]) == EXIT_CONFIG


def test_cli_bad_hypothesis_is_config_error():
    assert main(["validate", "--model", "keep-switch", "--p", "0.5"]) == EXIT_CONFIG


def test_esp_mismatch_statistical_exit():
    cfg = ExperimentConfig(
        task="esp", model=ModelSpec("cyclic-keep-switch"), options={"n_max": 1}, seed=0
    )
    code, out = run(cfg)
    assert code == EXIT_STATISTICAL
    assert out["esp"]["found_at"] is None


def test_stationary_task(tmp_path):
    cfg = ExperimentConfig(
        task="stationary", model=ModelSpec("cyclic-keep-switch"), out=str(tmp_path / "o"), seed=0
    )
    code, out = run(cfg)
    assert code == EXIT_OK
    assert out["stationary"]["max_residual"] <= 1e-8
    assert (tmp_path / "o" / "stationary.json").exists()


def test_forgetting_task_writes_csv(tmp_path):
    cfg = ExperimentConfig(
        task="forgetting",
        model=ModelSpec("noisy-label", {"alpha": 0.3}),
        out=str(tmp_path / "f"),
        seed=2,
        options={"n_values": [1, 2, 3, 4], "env_samples": 50, "theta": "basis:0"},
    )
    code, out = run(cfg)
    assert code == EXIT_OK
    csv_text = (tmp_path / "f" / "forgetting.csv").read_text()
    assert csv_text.splitlines()[0] == "n,beta_hat,stderr,bound"
    assert len(csv_text.splitlines()) == 5


def test_clt_task_small_scale(tmp_path):
    cfg = ExperimentConfig(
        task="clt",
        model=ModelSpec("toy"),
        patterns=("11",),
        n_steps=500,
        n_trajectories=1500,
        seed=3,
        threads=2,
        out=str(tmp_path / "c"),
    )
    code, out = run(cfg)
    assert code == EXIT_OK
    entry = out["clt"]["11"]
    assert entry["passed"] and entry["ks_pvalue"] > 0.01
    assert entry["mu_centering"] == "exact"
    assert (tmp_path / "c" / "normalized_11.csv").exists()


def test_couple_task_bounds(tmp_path):
    cfg = ExperimentConfig(
        task="couple",
        model=ModelSpec("noisy-label", {"alpha": 0.3}),
        seed=4,
        out=str(tmp_path / "k"),
        options={"runs": 1500, "n_blocks": 60},
    )
    code, out = run(cfg)
    assert code == EXIT_OK
    assert out["couple"]["mean_t_out"] <= 1 / 0.3 + 1 + 3 * out["couple"]["stderr_t_out"]
    lines = (tmp_path / "k" / "coalescence.csv").read_text().splitlines()
    assert lines[0] == "run_id,R_star,T_out"
    assert len(lines) == 1501


def test_results_byte_identical_modulo_meta(tmp_path):
    def one(path):
        cfg = ExperimentConfig(
            task="couple",
            model=ModelSpec("toy"),
            seed=9,
            out=str(path),
            options={"runs": 300, "n_blocks": 20},
        )
        run(cfg)
        payload = json.loads((path / "couple.json").read_text())
        payload.pop("meta")
        return payload, (path / "coalescence.csv").read_text()

    a = one(tmp_path / "r1")
    b = one(tmp_path / "r2")
    assert a == b


def test_report_task_smoke(tmp_path):
    cfg = ExperimentConfig(
        task="report",
        model=ModelSpec("toy"),
        patterns=("11",),
        n_steps=400,
        n_trajectories=800,
        seed=5,
        out=str(tmp_path / "rep"),
        options={"env_samples": 20, "runs": 300, "n_values": [1, 2, 3]},
    )
    code, out = run(cfg)
    assert code == EXIT_OK
    for key in ("validate", "esp", "stationary", "forgetting", "clt", "couple"):
        assert key in out
    assert out["summability_delta1"]["converged"]
