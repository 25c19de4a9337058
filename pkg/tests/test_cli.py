import io

import pytest
import yaml
from rich.console import Console

from ddrom import cli
from ddrom.errors import FomDivergenceError
from ddrom.nets.io import load_weights
from ddrom.rom.archive import load_trajectory


@pytest.fixture
def output(mocker):
    buffer = io.StringIO()
    mocker.patch.object(cli, "console", Console(file=buffer, width=200))
    return buffer


def test_report_runs_the_study(mocker, output, tmp_path):
    run = mocker.patch("ddrom.cli.run_study")
    run.return_value.dims = (3, 6, 5)
    assert cli.main(["--out", str(tmp_path), "--quiet", "report"]) == 0
    run.assert_called_once()
    config, out = run.call_args.args[:2]
    assert out == tmp_path
    assert config.solver.tol == 1e-9
    assert "(3, 6, 5)" in output.getvalue()


def test_seed_flag_reaches_fom_and_training(mocker, output, tmp_path):
    generate = mocker.patch("ddrom.cli.generate")
    assert cli.main(["--seed", "7", "--out", str(tmp_path), "generate"]) == 0
    config = generate.call_args.args[0]
    assert config.case.seed == 7
    assert config.train.seed == 7


def test_global_flags_follow_the_subcommand(mocker, output, tmp_path):
    path = tmp_path / "study.yaml"
    path.write_text(yaml.safe_dump({"case": {"seed": 3}}))
    generate = mocker.patch("ddrom.cli.generate")
    argv = ["generate", "--config", str(path), "--out", str(tmp_path / "run"), "--quiet"]
    assert cli.main(argv) == 0
    config, out, _, quiet = generate.call_args.args
    assert config.case.seed == 3
    assert out == tmp_path / "run"
    assert quiet is True


def test_flags_before_the_subcommand_are_kept(mocker, output, tmp_path):
    generate = mocker.patch("ddrom.cli.generate")
    assert cli.main(["--out", str(tmp_path), "--seed", "5", "generate"]) == 0
    config, out, _, quiet = generate.call_args.args
    assert out == tmp_path
    assert config.case.seed == 5
    assert quiet is False


def test_yaml_config_is_loaded(mocker, output, tmp_path):
    path = tmp_path / "study.yaml"
    path.write_text(yaml.safe_dump({"pod": {"dims": [3, 6, 5]}, "boundary": {"tau": 10.0}}))
    run = mocker.patch("ddrom.cli.run_study")
    assert cli.main(["--config", str(path), "--out", str(tmp_path), "report"]) == 0
    config = run.call_args.args[0]
    assert config.pod.dims == (3, 6, 5)
    assert config.boundary.tau == 10.0


def test_rom_error_exits_with_status_one(mocker, output, tmp_path):
    mocker.patch("ddrom.cli.generate", side_effect=FomDivergenceError("velocity blew up", 12, 3e6))
    assert cli.main(["--out", str(tmp_path), "generate"]) == 1
    assert "velocity blew up" in output.getvalue()


def test_missing_config_exits_with_status_one(output, tmp_path):
    assert cli.main(["--config", str(tmp_path / "absent.yaml"), "report"]) == 1
    assert "Config file not found" in output.getvalue()


def test_star_training_needs_initial_network(output, tiny_study, tmp_path):
    study_dir, _ = tiny_study
    argv = ["--out", str(tmp_path), "train", "--dataset", str(study_dir / "dataset"), "--target", "star"]
    assert cli.main(argv) == 1
    assert "--init" in output.getvalue()


def test_stages_chain_through_archives(output, tmp_path, tiny_config):
    config_path = tmp_path / "tiny.yaml"
    config_path.write_text(yaml.safe_dump(tiny_config.model_dump(mode="json")))
    out = tmp_path / "run"
    base = ["--config", str(config_path), "--out", str(out), "--quiet"]

    assert cli.main(["generate", *base]) == 0
    assert cli.main([*base, "pod", "--snapshots", str(out / "snapshots")]) == 0
    assert cli.main(
        [*base, "assemble", "--bases", str(out / "bases"), "--snapshots", str(out / "snapshots")]
    ) == 0
    assert cli.main(
        [
            *base, "extract",
            "--snapshots", str(out / "snapshots"),
            "--bases", str(out / "bases"),
            "--ops-small", str(out / "ops" / "small"),
            "--ops-big", str(out / "ops" / "big"),
        ]
    ) == 0
    dataset = str(out / "dataset")
    assert cli.main([*base, "train", "--dataset", dataset, "--target", "G"]) == 0
    assert cli.main([*base, "train", "--dataset", dataset, "--target", "M"]) == 0
    assert cli.main(
        [*base, "train", "--dataset", dataset, "--target", "star", "--init", str(out / "nets" / "G")]
    ) == 0
    assert load_weights(out / "nets" / "G").trained_epochs == 30
    assert load_weights(out / "nets" / "G_star").trained_epochs == 50
    assert load_weights(out / "nets" / "M_star").trained_epochs == 20

    assert cli.main(
        [
            *base, "solve",
            "--ops", str(out / "ops" / "small"),
            "--nets", str(out / "nets"),
            "--mode", "dd-star",
            "--mu", "0.03",
            "--snapshots", str(out / "snapshots"),
            "--bases", str(out / "bases"),
        ]
    ) == 0
    trajectory = load_trajectory(out / "trajectories" / "dd-star")
    assert trajectory.a.shape == (11, 2)
    assert trajectory.mu.tolist() == [0.03]
    assert "mean relative error" in output.getvalue()


def test_solve_rejects_unknown_parameter(output, tiny_study, tmp_path):
    study_dir, _ = tiny_study
    argv = [
        "--out", str(tmp_path), "solve",
        "--ops", str(study_dir / "ops" / "small"),
        "--mu", "0.5",
        "--snapshots", str(study_dir / "snapshots"),
        "--bases", str(study_dir / "bases"),
    ]
    assert cli.main(argv) == 1
    assert "no snapshots for parameter" in output.getvalue()


def test_pod_with_rank_prints_energy(output, tiny_study, tmp_path):
    study_dir, _ = tiny_study
    argv = ["--out", str(tmp_path), "pod", "--snapshots", str(study_dir / "snapshots"), "--field", "p", "--rank", "3"]
    assert cli.main(argv) == 0
    assert "p: 3 modes" in output.getvalue()
    assert (tmp_path / "bases").is_dir()


def test_steady_solve_on_parameter_geometry(output, steady_study, steady_config, tmp_path):
    study_dir, _ = steady_study
    config_path = tmp_path / "steady.yaml"
    config_path.write_text(yaml.safe_dump(steady_config.model_dump(mode="json")))
    argv = [
        "solve",
        "--config", str(config_path),
        "--out", str(tmp_path),
        "--ops", str(study_dir / "ops" / "small"),
        "--mu", "0.2",
        "--snapshots", str(study_dir / "snapshots"),
        "--bases", str(study_dir / "bases"),
    ]
    assert cli.main(argv) == 0
    assert "Newton converged" in output.getvalue()
    trajectory = load_trajectory(tmp_path / "trajectories" / "none")
    assert trajectory.a.shape == (1, 2)
    assert trajectory.mu.tolist() == [0.2]
