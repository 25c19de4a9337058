import io

import numpy as np
import pytest
from rich.console import Console

from ddrom.closure.archive import load_dataset
from ddrom.closure.extract import exact_correction
from ddrom.config import BoundaryConfig, PipelineConfig, PodConfig
from ddrom.fom.archive import load_snapshots
from ddrom.io import read_manifest
from ddrom.metrics.measures import relative_error
from ddrom.metrics.reports import read_gains_csv
from ddrom.operators.assembly import assemble
from ddrom.pipeline import (
    boundary_from_config,
    fit_ansatz,
    load_network_closure,
    parameter_operators,
    run_study,
    select_dims,
    steady_initial_state,
    train_networks,
    training_window,
)
from ddrom.pod.archive import load_bases
from ddrom.pod.basis import inner_product_for, select_modes_by_energy
from ddrom.rom.archive import load_trajectory


def test_select_dims_from_energy(channel_bases):
    config = PipelineConfig(pod=PodConfig(energy_u=0.9, energy_p=0.99, energy_nut=0.95))
    small, big = select_dims(channel_bases, config)
    expected = (
        select_modes_by_energy(channel_bases["u"].spectrum(), 0.9),
        select_modes_by_energy(channel_bases["p"].spectrum(), 0.99),
        select_modes_by_energy(channel_bases["nut"].spectrum(), 0.95),
    )
    assert small == expected
    assert big == tuple(min(2 * n, 6) for n in expected)


def test_select_dims_explicit_caps_enlarged_dims_at_rank(channel_bases):
    config = PipelineConfig(pod=PodConfig(dims=(2, 4, 1), k=2))
    assert select_dims(channel_bases, config) == ((2, 4, 1), (4, 6, 2))


def test_boundary_uses_configured_penalty():
    config = PipelineConfig(boundary=BoundaryConfig(tau=10.0))
    boundary = boundary_from_config(config)
    assert boundary.tau == 10.0
    assert boundary.values == [config.case.flow.lid_velocity]
    assert boundary.lid_amplitude == config.case.flow.lid_amplitude


def test_training_window_keeps_early_frames(channel_snapshots):
    window = training_window(channel_snapshots, 0.1)
    assert window.frames
    assert all(f.t <= 0.1 + 1e-9 for f in window.frames)
    assert len(window.groups()) == 3
    assert training_window(channel_snapshots, 10.0) is channel_snapshots


def test_study_writes_every_stage(tiny_study):
    out, result = tiny_study
    assert result.dims == (2, 2, 2)
    assert result.big_dims == (4, 4, 4)
    for stage in ("snapshots", "bases", "ops", "dataset", "nets", "trajectories", "report"):
        assert (out / stage).is_dir()
    assert {r.method for r in result.reports} == {"none", "dd", "dd-star"}
    assert len(result.table.rows) == 3 * 2 * 2
    assert {row.method for row in result.table.rows} == {"dd", "dd-star"}
    assert read_gains_csv(out / "report" / "gains.csv") == result.table
    assert set(result.train_reports) == {"G", "M", "star"}


def test_study_reports_cover_every_parameter(tiny_study):
    out, result = tiny_study
    for report in result.reports:
        assert report.params == [[0.02], [0.03], [0.025]]
        assert report.splits == ["train", "train", "test"]
        for errors in report.trajectories:
            assert len(errors.times) == 11
            assert set(errors.errors) == {"u", "p", "nut"}
    trajectory = load_trajectory(out / "trajectories" / "dd-star" / "002")
    np.testing.assert_allclose(trajectory.times, 0.02 * np.arange(11), atol=1e-12)
    assert trajectory.mu.tolist() == [0.025]


def test_study_is_deterministic(tiny_study, tmp_path, tiny_config):
    _, first = tiny_study
    second = run_study(tiny_config, tmp_path, Console(file=io.StringIO()), quiet=True)
    assert second.checksums == first.checksums
    assert second.table == first.table


def test_saved_networks_reproduce_trained_closures(tiny_study, tmp_path, tiny_config):
    out, _ = tiny_study
    dataset = load_dataset(out / "dataset")
    closures, _ = train_networks(dataset, tiny_config, tmp_path, Console(file=io.StringIO()), quiet=True)
    a = dataset.a[3]
    mu = dataset.mu[3]
    for star in (False, True):
        loaded = load_network_closure(tmp_path / "nets", star=star)
        trained = closures["dd-star" if star else "dd"]
        g = trained.turbulence(a, mu)
        np.testing.assert_array_equal(loaded.turbulence(a, mu), g)
        np.testing.assert_array_equal(loaded.correction(a, g, mu), trained.correction(a, g, mu))


def test_ansatz_skipped_for_several_parameters(tiny_study, tmp_path):
    out, _ = tiny_study
    buffer = io.StringIO()
    assert fit_ansatz(load_dataset(out / "dataset"), tmp_path, Console(file=buffer)) is None
    assert "skipped" in buffer.getvalue()
    assert not (tmp_path / "ansatz").exists()


def test_quadratic_mode_runs_for_single_parameter(tmp_path, tiny_config):
    tiny_config.case.params = [[0.02]]
    tiny_config.study.test_params = []
    tiny_config.study.modes = ["none", "quadratic"]
    result = run_study(tiny_config, tmp_path, Console(file=io.StringIO()), quiet=True)
    assert (tmp_path / "ansatz").is_dir()
    assert {r.method for r in result.reports} == {"none", "quadratic"}
    assert {row.split for row in result.table.rows} == {"train"}
    gain_u = result.table.value("2-2-2", "u", "train", "quadratic")
    assert gain_u <= 1.0 or np.isnan(gain_u)


def test_steady_study_solves_every_parameter(steady_study):
    out, result = steady_study
    assert result.dims == (2, 2, 2)
    assert result.big_dims == (4, 4, 4)
    assert {r.method for r in result.reports} == {"none", "dd", "dd-star"}
    for report in result.reports:
        assert report.kind == "steady"
        assert report.splits == ["train", "train", "test"]
        assert all(len(errors.times) == 1 for errors in report.trajectories)
    assert {row.split for row in result.table.rows} == {"train", "test"}
    manifest = read_manifest(out / "ops" / "big")
    assert manifest["n_boundary"] == 1
    assert manifest["enlargement_k"] == 2


def test_steady_closure_targets_use_the_parameter_geometry(steady_study, steady_config):
    out, _ = steady_study
    snapshots = load_snapshots(out / "snapshots")
    bases = load_bases(out / "bases")
    dataset = load_dataset(out / "dataset")
    row = [i for i, group in enumerate(dataset.groups) if group == 1][-1]
    frame = snapshots.frames[row]
    assert frame.mu.tolist() == [0.2]

    small, big = parameter_operators(bases, [0.2], (2, 2, 2), (4, 4, 4), steady_config)
    own = exact_correction(frame, bases, small, big)
    np.testing.assert_allclose(dataset.tau[row], own.tau_exact, rtol=0.0, atol=1e-12)

    boundary = boundary_from_config(steady_config)
    mid = assemble(bases["u"], bases["p"], bases["nut"], snapshots.grid, boundary, (4, 4, 4))
    shared = exact_correction(frame, bases, mid.truncate(2, 2, 2), mid)
    assert not np.allclose(shared.tau_exact, own.tau_exact, rtol=1e-3, atol=0.0)


def test_steady_errors_use_the_parameter_mass_weights(steady_study):
    out, result = steady_study
    snapshots = load_snapshots(out / "snapshots")
    bases = load_bases(out / "bases")
    report = next(r for r in result.reports if r.method == "none")
    trajectory = load_trajectory(out / "trajectories" / "none" / "001")
    frame = snapshots.groups()[1][-1]
    rom_p = bases["p"].reconstruct(trajectory.b[0])

    expected = relative_error(rom_p, frame.p, inner_product_for(snapshots.grid_for((0.2,)), "p"))
    assert report.trajectories[1].errors["p"][0] == pytest.approx(expected, rel=1e-12)
    on_mid_grid = relative_error(rom_p, frame.p, bases["p"].inner_product)
    assert on_mid_grid != pytest.approx(expected, rel=1e-9)


def test_steady_initial_state_choices(steady_study, steady_config):
    out, _ = steady_study
    snapshots = load_snapshots(out / "snapshots")
    bases = load_bases(out / "bases")
    group = snapshots.groups()[1]
    assert steady_config.solver.steady_initial == "mean"

    mean = steady_initial_state(snapshots, 1, bases, (2, 2, 2), steady_config)
    training = [f for f in snapshots.frames if f.mu.tolist() != [0.0]]
    np.testing.assert_allclose(
        mean.a, bases["u"].project(np.mean([f.u for f in training], axis=0), 2), atol=1e-14
    )

    steady_config.solver.steady_initial = "converged"
    converged = steady_initial_state(snapshots, 1, bases, (2, 2, 2), steady_config)
    np.testing.assert_array_equal(converged.a, bases["u"].project(group[-1].u, 2))
    assert not np.allclose(mean.a, converged.a)

    steady_config.solver.steady_initial = "first-frame"
    first = steady_initial_state(snapshots, 1, bases, (2, 2, 2), steady_config)
    np.testing.assert_array_equal(first.b, bases["p"].project(group[0].p, 2))


@pytest.mark.slow
def test_steady_coupled_closure_keeps_training_pressure_error_at_or_below_baseline(tmp_path, steady_config):
    steady_config.train.epochs = 3000
    steady_config.train.coupled_epochs = 3000
    steady_config.train.step = 1000
    steady_config.train.hidden = [20, 20]
    steady_config.train.latent = 10
    result = run_study(steady_config, tmp_path, Console(file=io.StringIO()), quiet=True)
    baseline = next(r for r in result.reports if r.method == "none")
    coupled = next(r for r in result.reports if r.method == "dd-star")
    for index, split in enumerate(coupled.splits):
        if split == "train":
            assert coupled.trajectories[index].errors["p"][0] <= baseline.trajectories[index].errors["p"][0]
