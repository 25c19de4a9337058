from __future__ import annotations

from collections.abc import Callable, Sequence
from typing import Literal

import numpy as np
from pydantic import BaseModel
from rich.console import Console

from ddrom.errors import DimensionMismatchError, ZeroReferenceError
from ddrom.fom.fields import FieldFrame, FieldKind
from ddrom.pod.basis import InnerProduct, PodBasis
from ddrom.rom.solver import RomTrajectory

GainKind = Literal["unsteady", "steady"]

FIELDS: tuple[FieldKind, ...] = ("u", "p", "nut")


def relative_error(rom_field: np.ndarray, fom_field: np.ndarray, ip: InnerProduct) -> float:
    """``||rom - fom|| / ||fom||`` in the mass-weighted norm."""
    if rom_field.shape != fom_field.shape or fom_field.shape != (ip.size,):
        raise DimensionMismatchError(
            f"fields {rom_field.shape} / {fom_field.shape} against {ip.size} weights"
        )
    reference = ip.norm(fom_field)
    if reference == 0.0:
        raise ZeroReferenceError("reference field has zero norm")
    return ip.norm(rom_field - fom_field) / reference


def sample_gains(
    errors_baseline: Sequence[np.ndarray | float],
    errors_dd: Sequence[np.ndarray | float],
    kind: GainKind,
) -> tuple[list[float], list[int]]:
    """Per-sample ``(E_base - E_dd) / E_base`` and the indices skipped for a zero baseline.

    Unsteady samples are per-time error series and are time-averaged first.
    """
    if len(errors_baseline) != len(errors_dd):
        raise DimensionMismatchError(
            f"{len(errors_baseline)} baseline samples against {len(errors_dd)} closure samples"
        )
    gains, skipped = [], []
    for index, (base, dd) in enumerate(zip(errors_baseline, errors_dd)):
        if kind == "unsteady":
            base, dd = float(np.mean(base)), float(np.mean(dd))
        else:
            # steady samples may arrive as single-node series
            base, dd = np.asarray(base).item(), np.asarray(dd).item()
        if base == 0.0:
            skipped.append(index)
            continue
        gains.append((float(base) - float(dd)) / float(base))
    return gains, skipped


def gain(
    errors_baseline: Sequence[np.ndarray | float],
    errors_dd: Sequence[np.ndarray | float],
    kind: GainKind,
    console: Console | None = None,
) -> float:
    """Mean relative gain of a closure over the baseline; 1 only when the closure error vanishes."""
    gains, skipped = sample_gains(errors_baseline, errors_dd, kind)
    if skipped:
        (console or Console()).print(
            f"[yellow]Skipped {len(skipped)} sample(s) with zero baseline error: {skipped}[/yellow]"
        )
    if not gains:
        raise ZeroReferenceError("every baseline error is zero; gain is undefined")
    return float(np.mean(gains))


class ErrorStatistics(BaseModel):
    """Median with min/max labelled as the error bounds."""

    median: float
    min: float
    max: float
    count: int


def statistics_summary(errors: Sequence[float]) -> ErrorStatistics:
    values = np.asarray(errors, dtype=np.float64)
    if values.size == 0:
        raise ValueError("statistics need at least one error value")
    return ErrorStatistics(
        median=float(np.median(values)),
        min=float(values.min()),
        max=float(values.max()),
        count=int(values.size),
    )


class TrajectoryErrors(BaseModel):
    """Per-time relative errors of one parameter, with the projection baseline."""

    times: list[float]
    errors: dict[FieldKind, list[float]]
    projection: dict[FieldKind, list[float]]

    def time_average(self, field: FieldKind, window: tuple[float, float] | None = None) -> float:
        values = windowed(self.times, self.errors[field], window)
        return float(np.mean(values))


def windowed(
    times: Sequence[float], values: Sequence[float], window: tuple[float, float] | None
) -> list[float]:
    if window is None:
        return list(values)
    start, end = window
    picked = [v for t, v in zip(times, values) if start - 1e-12 <= t <= end + 1e-12]
    if not picked:
        raise ValueError(f"no time node inside the window {window}")
    return picked


def _projection_error(field: np.ndarray, basis: PodBasis, n: int, ip: InnerProduct) -> float:
    return relative_error(basis.reconstruct(basis.project(field, n)), field, ip)


def errors_for_trajectory(
    trajectory: RomTrajectory,
    frames: Sequence[FieldFrame],
    bases: dict[str, PodBasis],
    turbulence: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
    time_in_parameters: bool = True,
    weights: dict[FieldKind, InnerProduct] | None = None,
) -> TrajectoryErrors:
    """Relative errors of the reconstructed trajectory at every FOM frame time it covers.

    The eddy viscosity is reconstructed from ``turbulence(a, [t, *mu])`` (``mu`` alone for
    steady solutions); without it the ``nut`` field is left out. ``weights`` replaces the
    basis inner products when the frames live on a deformed grid.
    """
    ips = {f: (weights or {}).get(f, bases[f].inner_product) for f in FIELDS}
    n_u, n_p = trajectory.a.shape[1], trajectory.b.shape[1]
    times, errors, projection = [], {f: [] for f in FIELDS}, {f: [] for f in FIELDS}
    for frame in frames:
        hits = np.flatnonzero(np.isclose(trajectory.times, frame.t, rtol=0.0, atol=1e-9))
        if hits.size == 0:
            continue
        node = int(hits[0])
        a, b = trajectory.a[node], trajectory.b[node]
        times.append(float(frame.t))
        errors["u"].append(relative_error(bases["u"].reconstruct(a), frame.u, ips["u"]))
        errors["p"].append(relative_error(bases["p"].reconstruct(b), frame.p, ips["p"]))
        projection["u"].append(_projection_error(frame.u, bases["u"], n_u, ips["u"]))
        projection["p"].append(_projection_error(frame.p, bases["p"], n_p, ips["p"]))
        if turbulence is not None:
            mu = np.concatenate([[frame.t], trajectory.mu]) if time_in_parameters else trajectory.mu
            g = turbulence(a, mu)
            nut = bases["nut"].reconstruct(g)
            errors["nut"].append(relative_error(nut, frame.nut, ips["nut"]))
            projection["nut"].append(_projection_error(frame.nut, bases["nut"], g.size, ips["nut"]))
    if not times:
        raise ValueError("trajectory covers none of the FOM frame times")
    if turbulence is None:
        del errors["nut"], projection["nut"]
    return TrajectoryErrors(times=times, errors=errors, projection=projection)
