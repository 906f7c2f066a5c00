import json
from pathlib import Path

import numpy as np
import pytest

from ampsde.cli import main
from ampsde.config import ConfigError, RunConfig, default_config, run_experiment


def test_round_trip_is_identity():
    for name in ("coupled", "weak", "qv", "stabilization", "averaging"):
        config = default_config(name)
        again = RunConfig.loads(config.dumps())
        assert again.as_dict() == config.as_dict()
        assert RunConfig.loads(again.dumps()).as_dict() == config.as_dict()


def test_unknown_keys_are_fatal_and_named():
    data = default_config("coupled").as_dict()
    data["model"]["bogus_knob"] = 1
    with pytest.raises(ConfigError, match="bogus_knob"):
        RunConfig.from_dict(data)
    data = default_config("coupled").as_dict()
    data["run"]["typo"] = True
    with pytest.raises(ConfigError, match="typo"):
        RunConfig.from_dict(data)
    data = default_config("coupled").as_dict()
    data["extra_section"] = {}
    with pytest.raises(ConfigError, match="extra_section"):
        RunConfig.from_dict(data)


def test_field_validation_names_field():
    data = default_config("coupled").as_dict()
    data["model"]["alpha"] = 2.5
    with pytest.raises(ConfigError, match="model.alpha"):
        RunConfig.from_dict(data)
    data = default_config("coupled").as_dict()
    data["run"]["eps"] = [0.4, 0.4]
    with pytest.raises(ConfigError, match="run.eps"):
        RunConfig.from_dict(data)
    data = default_config("coupled").as_dict()
    data["noise"]["sigma"] = -1.0
    with pytest.raises(ConfigError, match="noise.sigma"):
        RunConfig.from_dict(data)


def test_h_rule_resolution_and_bound():
    config = default_config("coupled")
    assert config.resolve_h() == pytest.approx(0.1**2 / 8.0)
    data = config.as_dict()
    data["run"]["h"] = 0.05
    with pytest.raises(ConfigError, match="run.h"):
        RunConfig.from_dict(data).resolve_h()


def test_spec_builder_noise_conventions():
    config = default_config("coupled")  # single-mode, unnormalized
    spec = config.build_spec()
    assert spec.noise_amplitudes[1] == 1.0
    assert np.all(spec.noise_amplitudes[2:] == 0.0)

    data = default_config("weak").as_dict()  # white, unnormalized
    spec = RunConfig.from_dict(data).build_spec()
    assert spec.noise_amplitudes[1] == pytest.approx(np.sqrt(2.0 / np.pi))
    data["model"]["normalized"] = True
    spec = RunConfig.from_dict(data).build_spec()
    assert np.all(spec.noise_amplitudes[1:] == 1.0)


def test_custom_model_from_tensor_file(tmp_path):
    tensor_path = tmp_path / "tensor.txt"
    tensor_path.write_text("1 2 3 0.5\n2 3 1 -0.25\n", encoding="utf-8")
    config = RunConfig.from_dict(
        {
            "model": {
                "kind": "custom", "n": 3, "nu": 0.0,
                "eigenvalues": [0.0, 1.0, 4.0], "tensor_path": str(tensor_path),
            },
            "noise": {"kind": "custom", "q": [0.0, 1.0, 0.5]},
            "run": {"eps": [0.2], "t_final": 1.0, "batch": 1, "seed": 1},
        }
    )
    tensor = config.build_tensor()
    assert tensor.entry(2, 1, 3) == 0.5
    spec = config.build_spec()
    assert spec.noise_amplitudes[1] == 1.0
    assert spec.eigenvalues[2] == 4.0


def test_cli_usage_errors_exit_1(capsys):
    assert main([]) == 1
    assert main(["experiment", "not_an_experiment"]) == 1
    assert main(["coeffs", "--config", "/nonexistent/path.yaml"]) == 1
    capsys.readouterr()


def test_cli_help_exits_0(capsys):
    assert main(["--help"]) == 0
    capsys.readouterr()


def test_cli_coeffs_writes_flat_document(tmp_path, capsys):
    assert main(["coeffs", "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    payload = json.loads((tmp_path / "coefficients.json").read_text())
    assert payload["eta_tilde"] == pytest.approx(1.0 / 12.0, abs=1e-12)
    assert payload["sigma_a"] == pytest.approx(1.0 / 36.0, abs=1e-12)
    assert payload["sigma_b"] == 0.0
    assert payload["nu_strat"] == pytest.approx(payload["nu_tilde"] - payload["sigma_a"] / 2)
    assert "config" in payload and "version" in payload
    assert (tmp_path / "coefficients.csv").exists()
    assert (tmp_path / "coefficients.png").exists()


def test_cli_simulate_targets(tmp_path, capsys):
    config = default_config("simulate").as_dict()
    config["run"]["t_final"] = 0.2
    config["run"]["snapshots"] = True
    path = tmp_path / "sim.yaml"
    Path(path).write_text(RunConfig.from_dict(config).dumps(), encoding="utf-8")
    out = tmp_path / "spde"
    assert main(["simulate", "--config", str(path), "--out", str(out)]) == 0
    body = (out / "spde_path.csv").read_text()
    assert "t,X,norm_fast,norm_residual_vs_ou" in body
    assert body.startswith("# version:")
    assert (out / "spde_snapshots.csv").exists()

    config["run"]["target"] = "ou"
    Path(path).write_text(RunConfig.from_dict(config).dumps(), encoding="utf-8")
    out = tmp_path / "ou"
    assert main(["simulate", "--config", str(path), "--out", str(out)]) == 0
    assert "t,mode,value" in (out / "ou_path.csv").read_text()

    config["run"]["target"] = "amplitude"
    Path(path).write_text(RunConfig.from_dict(config).dumps(), encoding="utf-8")
    out = tmp_path / "amp"
    assert main(["simulate", "--config", str(path), "--out", str(out)]) == 0
    assert "t,a" in (out / "amplitude_path.csv").read_text()
    capsys.readouterr()


def small_averaging_config(out_dir, batch=150):
    data = default_config("averaging", out_dir=str(out_dir)).as_dict()
    data["run"]["batch"] = batch
    return data


def test_cli_experiment_writes_report_and_passes(tmp_path, capsys):
    path = tmp_path / "avg.yaml"
    path.write_text(
        RunConfig.from_dict(small_averaging_config(tmp_path / "out")).dumps(),
        encoding="utf-8",
    )
    assert main(["experiment", "averaging", "--config", str(path)]) == 0
    capsys.readouterr()
    report = json.loads((tmp_path / "out" / "averaging_report.json").read_text())
    assert report["pass"] is True
    assert report["experiment"] == "averaging"
    assert len(report["cells"]) == 3
    assert "config" in report and report["version"]
    assert (tmp_path / "out" / "averaging_cells.csv").exists()
    assert (tmp_path / "out" / "averaging_report.png").exists()


def test_cli_threshold_failure_exits_2(tmp_path, capsys):
    # single-mode forcing makes the (2,3,4) pair statistic identically zero,
    # so the averaging thresholds cannot hold
    data = small_averaging_config(tmp_path / "out")
    data["noise"] = {"kind": "single_mode", "sigma": 1.0, "mode": 2}
    path = tmp_path / "bad.yaml"
    path.write_text(RunConfig.from_dict(data).dumps(), encoding="utf-8")
    assert main(["experiment", "averaging", "--config", str(path)]) == 2
    capsys.readouterr()
    report = json.loads((tmp_path / "out" / "averaging_report.json").read_text())
    assert report["pass"] is False


def test_cli_seed_override_changes_output(tmp_path, capsys):
    path = tmp_path / "avg.yaml"
    path.write_text(
        RunConfig.from_dict(small_averaging_config(tmp_path / "o1")).dumps(),
        encoding="utf-8",
    )
    assert main(["experiment", "averaging", "--config", str(path)]) == 0
    base = json.loads((tmp_path / "o1" / "averaging_report.json").read_text())
    assert main(["experiment", "averaging", "--config", str(path), "--seed", "77"]) == 0
    other = json.loads((tmp_path / "o1" / "averaging_report.json").read_text())
    capsys.readouterr()
    assert other["config"]["run"]["seed"] == 77
    assert base["cells"] != other["cells"]


def test_run_experiment_requires_experiment_key():
    config = default_config("simulate")
    with pytest.raises(ConfigError, match="run.experiment"):
        run_experiment(config)


def test_spec_round_trips_through_config_sections(tmp_path):
    from ampsde.config import spec_sections
    from ampsde import ModelSpec
    from ampsde.tensor import burgers_tensor, tensor_to_text

    spec = ModelSpec(
        eigenvalues=[0.0, 3.0, 8.0, 15.0], noise_amplitudes=[0.0, 1.0, 0.0, 0.5],
        nu=0.7, alpha=1.0,
    )
    tensor_path = tmp_path / "tensor.txt"
    tensor_path.write_text(tensor_to_text(burgers_tensor(4)), encoding="utf-8")
    sections = spec_sections(spec, tensor_path=str(tensor_path))
    config = RunConfig.from_dict(
        {**sections, "run": {"eps": [0.2], "t_final": 1.0, "batch": 1, "seed": 0}}
    )
    back = config.build_spec()
    assert np.array_equal(back.eigenvalues, spec.eigenvalues)
    assert np.array_equal(back.noise_amplitudes, spec.noise_amplitudes)
    assert back.nu == spec.nu and back.alpha == spec.alpha
    assert dict(config.build_tensor().items()) == dict(burgers_tensor(4).items())


def test_cli_outputs_byte_identical_across_worker_counts(tmp_path, capsys):
    path = tmp_path / "avg.yaml"
    path.write_text(
        RunConfig.from_dict(small_averaging_config(tmp_path / "out")).dumps(),
        encoding="utf-8",
    )
    names = ["averaging_report.json", "averaging_cells.csv", "averaging_report.png"]

    def run(workers):
        assert main(["experiment", "averaging", "--config", str(path),
                     "--workers", str(workers)]) == 0
        return {n: (tmp_path / "out" / n).read_bytes() for n in names}

    first = run(1)
    assert first == run(2)
    capsys.readouterr()


def test_cli_selftest_exit_codes(tmp_path, capsys, monkeypatch):
    from ampsde import selftest as st

    assert main(["selftest"]) == 0

    def rigged_failure():
        raise AssertionError("rigged")

    monkeypatch.setattr(st, "CHECKS", list(st.CHECKS) + [("rigged", rigged_failure)])
    assert main(["selftest"]) == 1
    out = capsys.readouterr().out
    assert "FAIL rigged" in out
