import argparse
import time
from pathlib import Path

from pydantic import BaseModel
from rich.console import Console
from rich.table import Table

from ddrom.config import (
    CaseConfig,
    GridConfig,
    PipelineConfig,
    PodConfig,
    SolverConfig,
    StudyConfig,
    TrainConfig,
)
from ddrom.io import dump_json
from ddrom.pipeline import StudyResult, run_study

console = Console()

TRAIN_VISCOSITIES = [[0.01], [0.015], [0.02]]
HELD_OUT_VISCOSITIES = [[0.0125], [0.0175]]


class GainOutcome(BaseModel):
    experiment: str
    regime: str
    pressure_gains: dict[str, dict[str, float]]
    passed: bool
    seconds: float


class DeterminismOutcome(BaseModel):
    experiment: str = "determinism"
    checksums: dict[str, str]
    mismatched: list[str]
    passed: bool


def channel_config(seed: int = 0) -> PipelineConfig:
    """Marginally resolved channel: modes chosen at 99.5% energy, reduced training budget."""
    return PipelineConfig(
        case=CaseConfig(
            family="unsteady-channel",
            params=TRAIN_VISCOSITIES + HELD_OUT_VISCOSITIES,
            dt=0.01,
            stride=5,
            horizon=2.5,
            seed=seed,
            grid=GridConfig(nx=16, ny=16),
        ),
        pod=PodConfig(energy_u=0.995, energy_p=0.995, energy_nut=0.995, k=2),
        train=TrainConfig(epochs=2000, coupled_epochs=2000, step=300, gamma=0.2, seed=seed),
        solver=SolverConfig(dt=0.05, horizon=2.5),
        study=StudyConfig(test_params=HELD_OUT_VISCOSITIES, modes=["none", "dd", "dd-star"]),
    )


def ill_conditioned_config(seed: int = 0, energy: float = 0.9) -> PipelineConfig:
    """Under-resolved regime extrapolated to twice the training window."""
    config = channel_config(seed)
    config.pod = PodConfig(energy_u=energy, energy_p=energy, energy_nut=energy, k=2)
    config.case.horizon = 2 * config.solver.horizon
    config.solver.extrapolation = 2.0
    return config


def pressure_gains(result: StudyResult) -> tuple[str, dict[str, dict[str, float]]]:
    nested = result.table.nested()
    regime = next(iter(nested))
    return regime, nested[regime].get("p", {})


def print_gains(title: str, regime: str, gains: dict[str, dict[str, float]]) -> None:
    table = Table(title=f"{title} ({regime})")
    table.add_column("split")
    table.add_column("dd")
    table.add_column("dd-star")
    for split, methods in sorted(gains.items()):
        table.add_row(
            split,
            f"{methods.get('dd', float('nan')):+.4f}",
            f"{methods.get('dd-star', float('nan')):+.4f}",
        )
    console.print(table)


def evaluate_directional_gain(output_dir: Path, seed: int, quiet: bool = False) -> GainOutcome:
    start = time.perf_counter()
    result = run_study(channel_config(seed), output_dir / "gain", console, quiet)
    regime, gains = pressure_gains(result)
    print_gains("Pressure gain", regime, gains)
    passed = all(gains.get(split, {}).get("dd-star", 0.0) > 0 for split in ("train", "test"))
    return GainOutcome(
        experiment="directional-gain",
        regime=regime,
        pressure_gains=gains,
        passed=passed,
        seconds=time.perf_counter() - start,
    )


def evaluate_coupled_advantage(output_dir: Path, seed: int, quiet: bool = False) -> GainOutcome:
    start = time.perf_counter()
    result = run_study(ill_conditioned_config(seed), output_dir / "coupled", console, quiet)
    regime, gains = pressure_gains(result)
    print_gains("Coupled vs separate training", regime, gains)
    passed = all(m.get("dd-star", float("-inf")) >= m.get("dd", float("inf")) for m in gains.values())
    return GainOutcome(
        experiment="coupled-advantage",
        regime=regime,
        pressure_gains=gains,
        passed=passed and bool(gains),
        seconds=time.perf_counter() - start,
    )


def evaluate_determinism(
    output_dir: Path, seed: int, config: PipelineConfig | None = None
) -> DeterminismOutcome:
    config = config or channel_config(seed)
    first = run_study(config, output_dir / "run_a", console, quiet=True)
    second = run_study(config, output_dir / "run_b", console, quiet=True)
    mismatched = [s for s in first.checksums if first.checksums[s] != second.checksums.get(s)]
    for stage in mismatched:
        console.print(f"[red]Stage {stage} differs between runs[/red]")
    return DeterminismOutcome(
        checksums=first.checksums, mismatched=mismatched, passed=not mismatched
    )


def parse_args():
    parser = argparse.ArgumentParser(description="Desk-scale channel closure study")
    parser.add_argument(
        "--experiment",
        choices=["gain", "coupled", "determinism", "all"],
        default="all",
        help="Which experiment to run (default: all)",
    )
    parser.add_argument("--seed", type=int, default=0, help="Seed for FOM and networks")
    parser.add_argument(
        "--run-id", type=str, help="Run ID for organizing results (default: timestamp)"
    )
    parser.add_argument(
        "--output-dir",
        type=str,
        default="data/channel",
        help="Directory to save results (default: data/channel)",
    )
    parser.add_argument("--quiet", action="store_true", help="Disable progress displays")
    return parser.parse_args()


if __name__ == "__main__":
    args = parse_args()
    run_id = args.run_id or time.strftime("%Y%m%d_%H%M%S")
    output_dir = Path(args.output_dir) / run_id
    output_dir.mkdir(parents=True, exist_ok=True)

    outcomes = []
    if args.experiment in ("gain", "all"):
        outcomes.append(evaluate_directional_gain(output_dir, args.seed, args.quiet))
    if args.experiment in ("coupled", "all"):
        outcomes.append(evaluate_coupled_advantage(output_dir, args.seed, args.quiet))
    if args.experiment in ("determinism", "all"):
        outcomes.append(evaluate_determinism(output_dir, args.seed))

    (output_dir / "summary.json").write_text(dump_json([o.model_dump() for o in outcomes]))
    for outcome in outcomes:
        colour = "green" if outcome.passed else "red"
        console.print(f"[{colour}]{outcome.experiment}: {'passed' if outcome.passed else 'failed'}[/{colour}]")
