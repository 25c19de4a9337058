from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np
from rich.console import Console

from ddrom.closure.archive import load_ansatz, load_dataset
from ddrom.config import PipelineConfig, load_config
from ddrom.errors import RomError
from ddrom.fom.archive import load_snapshots
from ddrom.fom.fields import SnapshotSet
from ddrom.metrics.measures import errors_for_trajectory
from ddrom.nets.io import load_weights, save_weights
from ddrom.nets.operators import DeepONetG, MIONetM
from ddrom.nets.training import train
from ddrom.operators.archive import load_operators, save_operators
from ddrom.operators.assembly import assemble, assemble_for_parameter
from ddrom.pipeline import (
    boundary_from_config,
    build_bases,
    extract,
    generate,
    load_network_closure,
    normalization_extra,
    parameter_operators,
    parameter_weights,
    run_study,
    select_dims,
    steady_initial_state,
)
from ddrom.pod.archive import load_bases, save_bases
from ddrom.pod.basis import compute_bases
from ddrom.rom.archive import save_trajectory
from ddrom.rom.residual import RomState
from ddrom.rom.solver import RomTrajectory, build_context, solve_steady, solve_unsteady

console = Console()


def _global_options(suppress: bool) -> argparse.ArgumentParser:
    """Flags accepted before or after the subcommand.

    The subcommand copies default to ``SUPPRESS`` so they never overwrite a value given
    before the subcommand.
    """
    def default(value):
        return argparse.SUPPRESS if suppress else value

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=default(None), help="YAML pipeline configuration")
    common.add_argument(
        "--seed", type=int, default=default(None), help="Seed for the FOM perturbation and the networks"
    )
    common.add_argument("--out", type=str, default=default("runs/latest"), help="Output directory")
    common.add_argument(
        "--quiet", action="store_true", default=default(False), help="Disable progress displays"
    )
    return common


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="rom",
        description="Data-driven closures for eddy-viscosity reduced-order models",
        parents=[_global_options(suppress=False)],
    )
    common = _global_options(suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("generate", parents=[common], help="Run the full-order model and archive snapshots")

    pod = sub.add_parser("pod", parents=[common], help="Compute the POD bases of archived snapshots")
    pod.add_argument("--snapshots", type=str, required=True)
    pod.add_argument("--field", choices=["u", "p", "nut", "all"], default="all")
    pod.add_argument("--rank", type=int, help="Modes to keep (default: numerical rank)")

    asm = sub.add_parser("assemble", parents=[common], help="Assemble the reduced operators")
    asm.add_argument("--bases", type=str, required=True)
    asm.add_argument("--snapshots", type=str, required=True)
    asm.add_argument("--mu", type=float, nargs="+", help="Geometric parameter to assemble at")
    asm.add_argument("--dims", type=int, nargs=3, help="Working dims N_u N_p N_nut")

    ext = sub.add_parser("extract", parents=[common], help="Build the closure dataset")
    ext.add_argument("--snapshots", type=str, required=True)
    ext.add_argument("--bases", type=str, required=True)
    ext.add_argument("--ops-small", type=str, required=True)
    ext.add_argument("--ops-big", type=str, required=True)

    trn = sub.add_parser("train", parents=[common], help="Train the closure networks")
    trn.add_argument("--dataset", type=str, required=True)
    trn.add_argument("--target", choices=["G", "M", "star"], required=True)
    trn.add_argument("--init", type=str, help="Pre-trained G weights for --target star")

    solve = sub.add_parser("solve", parents=[common], help="Solve the reduced system for one parameter")
    solve.add_argument("--ops", type=str, required=True)
    solve.add_argument("--nets", type=str, help="Directory with the trained networks")
    solve.add_argument("--ansatz", type=str, help="Fitted quadratic ansatz")
    solve.add_argument("--mode", choices=["none", "dd", "dd-star", "quadratic"], default="none")
    solve.add_argument("--mu", type=float, nargs="+", required=True)
    solve.add_argument("--snapshots", type=str, required=True)
    solve.add_argument("--bases", type=str, required=True)

    sub.add_parser("report", parents=[common], help="Run every stage and write the gain tables")
    return parser.parse_args(argv)


def _group_index(snapshots: SnapshotSet, mu: list[float]) -> int:
    for index, param in enumerate(snapshots.params):
        if np.allclose(param, mu, rtol=0.0, atol=1e-12):
            return index
    raise ValueError(f"no snapshots for parameter {mu}; available: {list(snapshots.params)}")


def cmd_pod(args: argparse.Namespace, out: Path) -> None:
    snapshots = load_snapshots(args.snapshots)
    fields = ["u", "p", "nut"] if args.field == "all" else [args.field]
    if args.rank is None:
        bases = build_bases(snapshots, out)
    else:
        bases = compute_bases(snapshots, {f: args.rank for f in fields})
        save_bases(bases, out / "bases")
    for field in fields:
        basis = bases[field]
        cumulative = basis.spectrum().cumulative
        console.print(
            f"[green]{field}: {basis.rank} modes, energy of the first {min(5, basis.rank)}: "
            f"{np.round(cumulative[:5], 6).tolist()}[/green]"
        )


def cmd_assemble(args: argparse.Namespace, config: PipelineConfig, out: Path) -> None:
    bases = load_bases(args.bases)
    snapshots = load_snapshots(args.snapshots)
    if args.dims is not None:
        config.pod.dims = tuple(args.dims)
    small_dims, big_dims = select_dims(bases, config)
    boundary = boundary_from_config(config)
    if args.mu is not None:
        big = assemble_for_parameter(bases, args.mu, boundary, config.case.grid, big_dims)
    else:
        big = assemble(bases["u"], bases["p"], bases["nut"], snapshots.grid, boundary, big_dims)
    small = big.truncate(*small_dims)
    save_operators(small, boundary, out / "ops" / "small", {"enlargement_k": config.pod.k})
    save_operators(big, boundary, out / "ops" / "big", {"enlargement_k": config.pod.k})
    console.print(f"[green]Operators at {small_dims} and {big_dims} saved to {out / 'ops'}[/green]")


def cmd_extract(args: argparse.Namespace, config: PipelineConfig, out: Path, quiet: bool) -> None:
    snapshots = load_snapshots(args.snapshots)
    bases = load_bases(args.bases)
    small, _ = load_operators(args.ops_small)
    big, _ = load_operators(args.ops_big)
    dataset = extract(snapshots, bases, small, big, config, out, console, quiet)
    console.print(
        f"[green]{len(dataset)} closure samples ({sum(dataset.is_train)} train) saved[/green]"
    )


def cmd_train(args: argparse.Namespace, config: PipelineConfig, out: Path, quiet: bool) -> None:
    dataset = load_dataset(args.dataset)
    tc = config.train
    rng = np.random.default_rng(tc.seed)
    n_u, n_p, n_nut = dataset.dims
    n_mu = dataset.mu.shape[1]
    extra = normalization_extra(dataset, tc.seed)

    if args.target == "G":
        gnet = DeepONetG.create(n_u, n_mu, n_nut, tc.hidden, tc.latent, rng)
        report = train(dataset, tc, "standard-G", gnet=gnet, console=console, quiet=quiet)
        save_weights(gnet, out / "nets" / "G", extra)
    elif args.target == "M":
        mnet = MIONetM.create(n_u, n_nut, n_mu, n_p, tc.hidden, tc.latent, rng)
        report = train(dataset, tc, "standard-M", mnet=mnet, console=console, quiet=quiet)
        save_weights(mnet, out / "nets" / "M", extra)
    else:
        if args.init is None:
            raise ValueError("--target star needs --init with the pre-trained G directory")
        gnet = load_weights(args.init)
        if not isinstance(gnet, DeepONetG):
            raise ValueError(f"{args.init} does not hold an eddy-viscosity network")
        mnet = MIONetM.create(n_u, n_nut, n_mu, n_p, tc.hidden, tc.latent, rng)
        report = train(dataset, tc, "coupled-star", gnet=gnet, mnet=mnet, console=console, quiet=quiet)
        save_weights(gnet, out / "nets" / "G_star", extra)
        save_weights(mnet, out / "nets" / "M_star", extra)
    console.print(
        f"[green]Trained {args.target}: final train loss {report.final_train_loss:.4e}[/green]"
    )


def cmd_solve(args: argparse.Namespace, config: PipelineConfig, out: Path, quiet: bool) -> None:
    opset, boundary = load_operators(args.ops)
    snapshots = load_snapshots(args.snapshots)
    bases = load_bases(args.bases)
    index = _group_index(snapshots, args.mu)
    frames = snapshots.groups()[index]
    networks = load_network_closure(args.nets, star=args.mode == "dd-star") if args.nets else None
    ansatz = load_ansatz(args.ansatz) if args.ansatz else None
    solver_config = config.solver.model_copy(update={"closure": args.mode})
    nu = snapshots.viscosity_for(tuple(args.mu))
    unsteady = snapshots.kind == "unsteady"

    if unsteady:
        frame = frames[0]
        initial = RomState(
            a=bases["u"].project(frame.u, opset.n_u), b=bases["p"].project(frame.p, opset.n_p)
        )
        context = build_context(opset, boundary, nu, solver_config, networks, ansatz)
        trajectory = solve_unsteady(args.mu, context, initial, frame.t, console, quiet)
    else:
        ops, _ = parameter_operators(bases, args.mu, opset.dims, opset.dims, config)
        context = build_context(ops, boundary, nu, solver_config, networks, ansatz)
        initial = steady_initial_state(snapshots, index, bases, opset.dims, config)
        state = solve_steady(args.mu, context, initial)
        console.print(
            f"[green]Newton converged in {state.iterations} iterations, "
            f"residual {state.residual_norm:.3e}[/green]"
        )
        trajectory = RomTrajectory(
            times=[frames[-1].t], a=[state.a], b=[state.b],
            iterations=(), residuals=[], converged=(), mu=args.mu,
        )
    save_trajectory(trajectory, out / "trajectories" / args.mode, {"mode": args.mode})
    turbulence = networks.turbulence if networks is not None else None
    weights = parameter_weights(snapshots, args.mu)
    errors = errors_for_trajectory(trajectory, frames, bases, turbulence, unsteady, weights)
    for field in errors.errors:
        console.print(
            f"[cyan]{field}: mean relative error {errors.time_average(field):.4e}, "
            f"projection {np.mean(errors.projection[field]):.4e}[/cyan]"
        )


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    out = Path(args.out)
    try:
        config = load_config(args.config, args.seed)
        if args.command == "generate":
            generate(config, out, console, args.quiet)
        elif args.command == "pod":
            cmd_pod(args, out)
        elif args.command == "assemble":
            cmd_assemble(args, config, out)
        elif args.command == "extract":
            cmd_extract(args, config, out, args.quiet)
        elif args.command == "train":
            cmd_train(args, config, out, args.quiet)
        elif args.command == "solve":
            cmd_solve(args, config, out, args.quiet)
        else:
            result = run_study(config, out, console, args.quiet)
            console.print(f"[green]Report written to {out / 'report'} for regime {result.dims}[/green]")
    except (RomError, ValueError, FileNotFoundError) as e:
        console.print(f"[red]Error:[/red] {e}")
        return 1
    return 0
