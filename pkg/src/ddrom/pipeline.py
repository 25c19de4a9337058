from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict
from rich.console import Console

from ddrom.closure.ansatz import QuadraticAnsatz, fit_quadratic_ansatz
from ddrom.closure.archive import save_ansatz, save_dataset
from ddrom.closure.extract import ClosureDataset, Normalization, SplitSpec, build_dataset
from ddrom.config import PipelineConfig
from ddrom.errors import NewtonError
from ddrom.fom.archive import save_snapshots
from ddrom.fom.fields import FieldFrame, FieldKind, SnapshotSet
from ddrom.fom.harness import run_case
from ddrom.io import directory_checksum, read_manifest
from ddrom.metrics.measures import FIELDS, errors_for_trajectory
from ddrom.metrics.reports import ErrorReport, GainTable, emit_reports, gain_table, regime_label
from ddrom.nets.closure import NetworkClosure
from ddrom.nets.io import load_weights, save_weights
from ddrom.nets.operators import DeepONetG, MIONetM
from ddrom.nets.training import TrainReport, train
from ddrom.operators.archive import save_operators
from ddrom.operators.assembly import (
    BoundarySpec,
    Dims,
    ReducedOperatorSet,
    assemble,
    assemble_for_parameter,
)
from ddrom.pod.archive import save_bases
from ddrom.pod.basis import (
    InnerProduct,
    PodBasis,
    compute_bases,
    inner_product_for,
    select_modes_by_energy,
)
from ddrom.rom.archive import save_trajectory
from ddrom.rom.residual import RomState
from ddrom.rom.solver import RomTrajectory, build_context, solve_steady, solve_unsteady


class StudyResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    dims: Dims
    big_dims: Dims
    table: GainTable
    reports: list[ErrorReport]
    train_reports: dict[str, TrainReport]
    checksums: dict[str, str]


def boundary_from_config(config: PipelineConfig) -> BoundarySpec:
    flow = config.case.flow
    return BoundarySpec(
        values=[flow.lid_velocity], tau=config.boundary.tau, lid_amplitude=flow.lid_amplitude
    )


def select_dims(bases: dict[str, PodBasis], config: PipelineConfig) -> tuple[Dims, Dims]:
    """Working dims from explicit sizes or energy thresholds, and the enlarged closure dims."""
    pod = config.pod
    if pod.dims is not None:
        small = tuple(pod.dims)
    else:
        thresholds = {"u": pod.energy_u, "p": pod.energy_p, "nut": pod.energy_nut}
        small = tuple(
            min(select_modes_by_energy(bases[f].spectrum(), thresholds[f]), bases[f].rank)
            for f in ("u", "p", "nut")
        )
    big = tuple(min(pod.k * n, bases[f].rank) for n, f in zip(small, ("u", "p", "nut")))
    return small, big


def generate(config: PipelineConfig, out: Path, console: Console, quiet: bool = False) -> SnapshotSet:
    snapshots = run_case(config.case, console, quiet)
    save_snapshots(snapshots, out / "snapshots")
    return snapshots


def training_window(snapshots: SnapshotSet, horizon: float) -> SnapshotSet:
    """Frames up to the training horizon; later frames only serve to measure extrapolation."""
    if snapshots.kind != "unsteady":
        return snapshots
    kept = tuple(f for f in snapshots.frames if f.t <= horizon + 1e-9)
    if len(kept) == len(snapshots.frames):
        return snapshots
    return snapshots.replace(frames=kept)


def build_bases(snapshots: SnapshotSet, out: Path) -> dict[str, PodBasis]:
    bases = compute_bases(snapshots)
    save_bases(bases, out / "bases")
    return bases


def build_operators(
    snapshots: SnapshotSet, bases: dict[str, PodBasis], config: PipelineConfig, out: Path
) -> tuple[ReducedOperatorSet, ReducedOperatorSet]:
    """Closure-resolution operators and their leading blocks at the working dims."""
    small_dims, big_dims = select_dims(bases, config)
    boundary = boundary_from_config(config)
    big = assemble(bases["u"], bases["p"], bases["nut"], snapshots.grid, boundary, big_dims)
    small = big.truncate(*small_dims)
    save_operators(small, boundary, out / "ops" / "small", {"enlargement_k": config.pod.k})
    save_operators(big, boundary, out / "ops" / "big", {"enlargement_k": config.pod.k})
    return small, big


def parameter_operators(
    bases: dict[str, PodBasis],
    param: Sequence[float],
    small_dims: Dims,
    big_dims: Dims,
    config: PipelineConfig,
) -> tuple[ReducedOperatorSet, ReducedOperatorSet]:
    """Operators on the geometry of ``param``, the small set cut from the big one."""
    big = assemble_for_parameter(
        bases, param, boundary_from_config(config), config.case.grid, big_dims
    )
    return big.truncate(*small_dims), big


def group_operators(
    snapshots: SnapshotSet,
    bases: dict[str, PodBasis],
    small_dims: Dims,
    big_dims: Dims,
    config: PipelineConfig,
) -> dict[int, tuple[ReducedOperatorSet, ReducedOperatorSet]]:
    """Per-group operator pairs of the deformed family; empty for the unsteady channel."""
    if snapshots.kind == "unsteady":
        return {}
    return {
        index: parameter_operators(bases, param, small_dims, big_dims, config)
        for index, param in enumerate(snapshots.params)
    }


def extract(
    snapshots: SnapshotSet,
    bases: dict[str, PodBasis],
    small: ReducedOperatorSet,
    big: ReducedOperatorSet,
    config: PipelineConfig,
    out: Path,
    console: Console,
    quiet: bool = False,
) -> ClosureDataset:
    """Closure dataset; deformed-family samples use the operators of their own geometry."""
    split = SplitSpec(test_params=config.study.test_params)
    per_group = group_operators(snapshots, bases, small.dims, big.dims, config)
    dataset = build_dataset(
        snapshots, bases, small, big, split, console=console, quiet=quiet, group_operators=per_group
    )
    save_dataset(dataset, out / "dataset")
    return dataset


def normalization_extra(dataset: ClosureDataset, seed: int) -> dict:
    return {"seed": seed, "normalization": {k: v.tolist() for k, v in dataset.normalization}}


def train_networks(
    dataset: ClosureDataset, config: PipelineConfig, out: Path, console: Console, quiet: bool = False
) -> tuple[dict[str, NetworkClosure], dict[str, TrainReport]]:
    """G and M trained separately (``dd``) and the coupled pair started from that G (``dd-star``)."""
    tc = config.train
    rng = np.random.default_rng(tc.seed)
    n_u, n_p, n_nut = dataset.dims
    n_mu = dataset.mu.shape[1]
    gnet = DeepONetG.create(n_u, n_mu, n_nut, tc.hidden, tc.latent, rng)
    mnet = MIONetM.create(n_u, n_nut, n_mu, n_p, tc.hidden, tc.latent, rng)
    mnet_star = MIONetM.create(n_u, n_nut, n_mu, n_p, tc.hidden, tc.latent, rng)

    reports = {
        "G": train(dataset, tc, "standard-G", gnet=gnet, console=console, quiet=quiet),
        "M": train(dataset, tc, "standard-M", mnet=mnet, console=console, quiet=quiet),
    }
    gnet_star = gnet.copy()
    reports["star"] = train(
        dataset, tc, "coupled-star", gnet=gnet_star, mnet=mnet_star, console=console, quiet=quiet
    )

    extra = normalization_extra(dataset, tc.seed)
    for name, net in (("G", gnet), ("M", mnet), ("G_star", gnet_star), ("M_star", mnet_star)):
        save_weights(net, out / "nets" / name, extra)
    norm = dataset.normalization
    closures = {
        "dd": NetworkClosure(gnet, norm, mnet),
        "dd-star": NetworkClosure(gnet_star, norm, mnet_star),
    }
    return closures, reports


def load_network_closure(directory: str | Path, star: bool = False) -> NetworkClosure:
    """Networks saved by :func:`train_networks` (or ``rom train``) with their normalization."""
    directory = Path(directory)
    suffix = "_star" if star else ""
    gdir, mdir = directory / f"G{suffix}", directory / f"M{suffix}"
    gnet = load_weights(gdir)
    norm = Normalization(**read_manifest(gdir)["normalization"])
    mnet = load_weights(mdir) if (mdir / "manifest.json").exists() else None
    return NetworkClosure(gnet, norm, mnet)


def fit_ansatz(
    dataset: ClosureDataset, out: Path, console: Console
) -> QuadraticAnsatz | None:
    """Quadratic closure for single-parameter datasets; ``None`` when several parameters train."""
    physical = dataset.split("train").physical_params()
    if np.unique(physical, axis=0).shape[0] > 1:
        console.print("[yellow]Quadratic ansatz skipped: training spans several parameters[/yellow]")
        return None
    ansatz = fit_quadratic_ansatz(dataset, console)
    save_ansatz(ansatz, out / "ansatz")
    return ansatz


def _projected_state(frame: FieldFrame, bases: dict[str, PodBasis], dims: Dims) -> RomState:
    return RomState(a=bases["u"].project(frame.u, dims[0]), b=bases["p"].project(frame.p, dims[1]))


def steady_initial_state(
    snapshots: SnapshotSet, index: int, bases: dict[str, PodBasis], dims: Dims, config: PipelineConfig
) -> RomState:
    """Projected initializing snapshot selected by ``config.solver.steady_initial``."""
    choice = config.solver.steady_initial
    frames = snapshots.groups()[index]
    if choice == "first-frame":
        return _projected_state(frames[0], bases, dims)
    if choice == "converged":
        return _projected_state(frames[-1], bases, dims)
    split = SplitSpec(test_params=config.study.test_params)
    training = [f for f in snapshots.frames if not split.is_test(f.mu)] or list(snapshots.frames)
    u = np.mean([f.u for f in training], axis=0)
    p = np.mean([f.p for f in training], axis=0)
    return RomState(a=bases["u"].project(u, dims[0]), b=bases["p"].project(p, dims[1]))


def parameter_weights(
    snapshots: SnapshotSet, param: Sequence[float]
) -> dict[FieldKind, InnerProduct] | None:
    """Mass weights of the grid a deformed-family parameter was solved on."""
    if snapshots.kind == "unsteady":
        return None
    grid = snapshots.grid_for(tuple(float(v) for v in param))
    return {field: inner_product_for(grid, field) for field in FIELDS}


def solve_and_measure(
    snapshots: SnapshotSet,
    bases: dict[str, PodBasis],
    small: ReducedOperatorSet,
    closures: dict[str, NetworkClosure],
    ansatz: QuadraticAnsatz | None,
    config: PipelineConfig,
    out: Path,
    console: Console,
    quiet: bool = False,
    big_dims: Dims | None = None,
) -> list[ErrorReport]:
    """Solve every configured closure mode for every parameter and measure it against the FOM.

    Deformed-family parameters are solved with the operators of their own geometry, cut
    from an assembly at ``big_dims`` like the extraction operators, and measured in the
    mass weights of that geometry.
    """
    boundary = boundary_from_config(config)
    split = SplitSpec(test_params=config.study.test_params)
    unsteady = snapshots.kind == "unsteady"
    regime = regime_label(small.dims)
    params = [list(p) for p in snapshots.params]
    groups = snapshots.groups()
    splits = ["test" if split.is_test(p) else "train" for p in params]
    steady_ops = group_operators(snapshots, bases, small.dims, big_dims or small.dims, config)

    reports = []
    for mode in config.study.modes:
        if mode == "quadratic" and ansatz is None:
            continue
        networks = closures["dd-star" if mode == "dd-star" else "dd"]
        solver_config = config.solver.model_copy(update={"closure": mode})
        trajectories = []
        for index, param in enumerate(snapshots.params):
            nu = snapshots.viscosity_for(param)
            frames = groups[index]
            if unsteady:
                initial = _projected_state(frames[0], bases, small.dims)
                context = build_context(small, boundary, nu, solver_config, networks, ansatz)
                trajectory = solve_unsteady(param, context, initial, frames[0].t, console, quiet)
            else:
                ops, _ = steady_ops[index]
                context = build_context(ops, boundary, nu, solver_config, networks, ansatz)
                initial = steady_initial_state(snapshots, index, bases, small.dims, config)
                try:
                    state = solve_steady(param, context, initial)
                except NewtonError as error:
                    console.print(
                        f"[yellow]Steady solve at mu = {list(param)} ({mode}) did not converge: {error}[/yellow]"
                    )
                    state = RomState.from_vector(error.iterate, small.n_u)
                trajectory = RomTrajectory(
                    times=[frames[-1].t],
                    a=[state.a],
                    b=[state.b],
                    iterations=(),
                    residuals=[],
                    converged=(),
                    mu=param,
                )
            save_trajectory(trajectory, out / "trajectories" / mode / f"{index:03d}", {"mode": mode})
            trajectories.append(
                errors_for_trajectory(
                    trajectory,
                    frames,
                    bases,
                    networks.turbulence,
                    unsteady,
                    parameter_weights(snapshots, param),
                )
            )
        reports.append(
            ErrorReport(
                regime=regime,
                method=mode,
                kind="unsteady" if unsteady else "steady",
                params=params,
                splits=splits,
                trajectories=trajectories,
                window=config.study.time_window,
            )
        )
    return reports


def run_study(
    config: PipelineConfig, out: str | Path, console: Console | None = None, quiet: bool = False
) -> StudyResult:
    """Every stage from snapshot generation to the gain tables, archived under ``out``.

    Args:
        config: full pipeline configuration.
        out: output directory; one sub-directory per stage.
        console: rich console for progress output.
        quiet: disable progress displays.

    Returns:
        StudyResult with the gain table, the error reports, the training reports and a
        checksum per stage directory.
    """
    console = console or Console()
    out = Path(out)
    snapshots = generate(config, out, console, quiet)
    training = training_window(snapshots, config.solver.horizon)
    bases = build_bases(training, out)
    small, big = build_operators(training, bases, config, out)
    if not quiet:
        console.print(f"[cyan]Working dims {small.dims}, closure dims {big.dims}[/cyan]")
    dataset = extract(training, bases, small, big, config, out, console, quiet)
    closures, train_reports = train_networks(dataset, config, out, console, quiet)
    ansatz = fit_ansatz(dataset, out, console) if "quadratic" in config.study.modes else None
    reports = solve_and_measure(
        snapshots, bases, small, closures, ansatz, config, out, console, quiet, big.dims
    )
    table = gain_table(reports, console=console)
    emit_reports(reports, table, out / "report")

    stages = ["snapshots", "bases", "ops", "dataset", "nets", "trajectories", "report"]
    checksums = {stage: directory_checksum(out / stage) for stage in stages}
    if not quiet:
        for row in table.rows:
            colour = "green" if row.value > 0 else "yellow"
            console.print(
                f"[{colour}]{row.regime} {row.method:8s} {row.field:3s} {row.split:5s} gain {row.value:+.4f}[/{colour}]"
            )
    return StudyResult(
        dims=small.dims,
        big_dims=big.dims,
        table=table,
        reports=reports,
        train_reports=train_reports,
        checksums=checksums,
    )
