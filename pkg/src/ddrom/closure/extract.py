from __future__ import annotations

from collections.abc import Mapping, Sequence
from typing import Literal

import numpy as np
from pydantic import BaseModel, model_validator
from rich.console import Console

from ddrom.arrays import ArrayModel
from ddrom.errors import DimensionMismatchError, EmptyDatasetError, HierarchyError
from ddrom.fom.fields import FieldFrame, SnapshotKind, SnapshotSet
from ddrom.operators.assembly import ReducedOperatorSet
from ddrom.pod.basis import PodBasis, project

Channel = Literal["a", "g", "mu", "tau"]

_HIERARCHY_RTOL = 1e-10


class ClosureSample(ArrayModel):
    a_proj: np.ndarray
    g_proj: np.ndarray
    mu: np.ndarray
    tau_exact: np.ndarray

    @model_validator(mode="after")
    def _finite(self) -> "ClosureSample":
        if not np.all(np.isfinite(self.tau_exact)):
            raise ValueError("tau_exact must be finite")
        return self

    @property
    def tau_u(self) -> np.ndarray:
        return self.tau_exact[: self.a_proj.size]

    @property
    def tau_p(self) -> np.ndarray:
        return self.tau_exact[self.a_proj.size :]


class SplitSpec(BaseModel):
    """Physical parameters held out for testing; every other parameter trains."""

    test_params: list[list[float]] = []

    def is_test(self, param: Sequence[float]) -> bool:
        return any(np.allclose(param, p, rtol=0.0, atol=1e-12) for p in self.test_params)


class Normalization(ArrayModel):
    """Per-channel min-max statistics, ``x_norm = (x - lower) / scale``."""

    a_lower: np.ndarray
    a_scale: np.ndarray
    g_lower: np.ndarray
    g_scale: np.ndarray
    mu_lower: np.ndarray
    mu_scale: np.ndarray
    tau_lower: np.ndarray
    tau_scale: np.ndarray

    @classmethod
    def fit(cls, **channels: np.ndarray) -> "Normalization":
        values = {}
        for name, data in channels.items():
            lower = data.min(axis=0)
            scale = data.max(axis=0) - lower
            values[f"{name}_lower"] = lower
            values[f"{name}_scale"] = np.where(scale > 0, scale, 1.0)
        return cls(**values)

    def normalize(self, channel: Channel, x: np.ndarray) -> np.ndarray:
        return (x - getattr(self, f"{channel}_lower")) / getattr(self, f"{channel}_scale")

    def denormalize(self, channel: Channel, x: np.ndarray) -> np.ndarray:
        return x * getattr(self, f"{channel}_scale") + getattr(self, f"{channel}_lower")


class ClosureDataset(ArrayModel):
    """Closure samples stacked row-wise, one row per snapshot frame.

    ``jac[s]`` is ``d C(a_proj, g) / d g`` at sample ``s``; the exact correction with a
    different eddy viscosity ``g`` is ``tau - jac (g - g_proj)``.
    """

    a: np.ndarray
    g: np.ndarray
    mu: np.ndarray
    tau: np.ndarray
    jac: np.ndarray
    groups: tuple[int, ...]
    is_train: tuple[bool, ...]
    dims: tuple[int, int, int]
    big_dims: tuple[int, int, int]
    kind: SnapshotKind
    with_turbulence: bool
    normalization: Normalization

    @model_validator(mode="after")
    def _consistent(self) -> "ClosureDataset":
        n_u, n_p, n_nut = self.dims
        s = self.a.shape[0]
        if (
            self.a.shape != (s, n_u)
            or self.g.shape != (s, n_nut)
            or self.tau.shape != (s, n_u + n_p)
            or self.jac.shape != (s, n_u + n_p, n_nut)
            or self.mu.shape[0] != s
            or len(self.groups) != s
            or len(self.is_train) != s
        ):
            raise DimensionMismatchError(f"closure arrays do not match dims {self.dims}")
        return self

    def __len__(self) -> int:
        return self.a.shape[0]

    @property
    def n_u(self) -> int:
        return self.dims[0]

    @property
    def n_p(self) -> int:
        return self.dims[1]

    @property
    def n_nut(self) -> int:
        return self.dims[2]

    def sample(self, index: int) -> ClosureSample:
        return ClosureSample(
            a_proj=self.a[index], g_proj=self.g[index], mu=self.mu[index], tau_exact=self.tau[index]
        )

    def samples(self) -> list[ClosureSample]:
        return [self.sample(i) for i in range(len(self))]

    def subset(self, mask: Sequence[bool]) -> "ClosureDataset":
        """Rows selected by ``mask``; normalization is kept from the full dataset."""
        mask = np.asarray(mask, dtype=bool)
        index = np.flatnonzero(mask)
        return self.replace(
            a=self.a[index],
            g=self.g[index],
            mu=self.mu[index],
            tau=self.tau[index],
            jac=self.jac[index],
            groups=tuple(self.groups[i] for i in index),
            is_train=tuple(self.is_train[i] for i in index),
        )

    def split(self, which: Literal["train", "test", "all"]) -> "ClosureDataset":
        if which == "all":
            return self
        train = np.asarray(self.is_train, dtype=bool)
        return self.subset(train if which == "train" else ~train)

    def physical_params(self) -> np.ndarray:
        """Parameter rows without the leading time entry of unsteady samples."""
        return self.mu[:, 1:] if self.kind == "unsteady" else self.mu


def evaluate_operator(
    a: np.ndarray, g: np.ndarray, opset: ReducedOperatorSet, with_turbulence: bool = True
) -> np.ndarray:
    """Nonlinear convective (and optionally turbulent) terms of the momentum and pressure blocks."""
    if a.shape[-1] != opset.n_u or (with_turbulence and g.shape[-1] != opset.n_nut):
        raise DimensionMismatchError(
            f"coefficients {a.shape[-1]}/{g.shape[-1]} do not match dims {opset.dims}"
        )
    momentum = -np.einsum("ijk,j,k->i", opset.C, a, a)
    pressure = np.einsum("ijk,j,k->i", opset.G, a, a)
    if with_turbulence:
        momentum = momentum + np.einsum("ijk,j,k->i", opset.C_T1 + opset.C_T2, g, a)
        pressure = pressure - np.einsum("ijk,j,k->i", opset.C_T3 + opset.C_T4, g, a)
    return np.concatenate([momentum, pressure])


def eddy_viscosity_jacobian(a: np.ndarray, opset: ReducedOperatorSet) -> np.ndarray:
    """``d evaluate_operator / d g`` at ``a``; the operator is linear in ``g``."""
    return np.vstack(
        [
            np.einsum("ijk,k->ij", opset.C_T1 + opset.C_T2, a),
            -np.einsum("ijk,k->ij", opset.C_T3 + opset.C_T4, a),
        ]
    )


def check_hierarchy(small_ops: ReducedOperatorSet, big_ops: ReducedOperatorSet) -> None:
    """Reject operator pairs that do not come from the same hierarchical bases."""
    n_u, n_p, n_nut = small_ops.dims
    if n_u > big_ops.n_u or n_p > big_ops.n_p or n_nut > big_ops.n_nut:
        raise HierarchyError(f"big dims {big_ops.dims} must dominate small dims {small_ops.dims}")
    cut = big_ops.truncate(n_u, n_p, n_nut)
    for name in ("C", "G", "C_T1", "C_T2", "C_T3", "C_T4"):
        small, sub = getattr(small_ops, name), getattr(cut, name)
        scale = max(np.abs(small).max(initial=0.0), np.abs(sub).max(initial=0.0), 1e-300)
        if np.abs(small - sub).max(initial=0.0) > _HIERARCHY_RTOL * scale:
            raise HierarchyError(f"{name} of the small set is not a sub-block of the big set")


def _truncate_output(values: np.ndarray, big_ops: ReducedOperatorSet, n_u: int, n_p: int) -> np.ndarray:
    return np.concatenate([values[:n_u], values[big_ops.n_u : big_ops.n_u + n_p]])


def exact_correction(
    frame: FieldFrame,
    bases: dict[str, PodBasis],
    small_ops: ReducedOperatorSet,
    big_ops: ReducedOperatorSet,
    with_turbulence: bool = True,
) -> ClosureSample:
    """Filtered large-basis evaluation minus small-basis evaluation at the projected frame."""
    check_hierarchy(small_ops, big_ops)
    n_u, n_p, n_nut = small_ops.dims
    a_big = project(frame.u, bases["u"], big_ops.n_u)
    g_big = project(frame.nut, bases["nut"], big_ops.n_nut)
    # hierarchical bases: the small projection is the leading slice
    a, g = a_big[:n_u], g_big[:n_nut]
    filtered = _truncate_output(
        evaluate_operator(a_big, g_big, big_ops, with_turbulence), big_ops, n_u, n_p
    )
    tau = filtered - evaluate_operator(a, g, small_ops, with_turbulence)
    return ClosureSample(a_proj=a, g_proj=g, mu=frame.mu, tau_exact=tau)


def _sample_parameters(frame: FieldFrame, kind: SnapshotKind) -> np.ndarray:
    # unsteady networks see time as the first parameter
    return np.concatenate([[frame.t], frame.mu]) if kind == "unsteady" else np.asarray(frame.mu)


def build_dataset(
    snapshots: SnapshotSet,
    bases: dict[str, PodBasis],
    small_ops: ReducedOperatorSet,
    big_ops: ReducedOperatorSet,
    split_spec: SplitSpec | None = None,
    with_turbulence: bool = True,
    console: Console | None = None,
    quiet: bool = False,
    group_operators: Mapping[int, tuple[ReducedOperatorSet, ReducedOperatorSet]] | None = None,
) -> ClosureDataset:
    """One closure sample per snapshot frame, normalized over the training split.

    ``group_operators`` maps a parameter group to the (small, big) pair assembled on its
    own geometry; groups without an entry use ``small_ops`` and ``big_ops``.
    """
    console = console or Console()
    split_spec = split_spec or SplitSpec()
    if len(snapshots.frames) == 0:
        raise EmptyDatasetError("snapshot set has no frames")
    check_hierarchy(small_ops, big_ops)
    n_u, n_p, n_nut = small_ops.dims

    rows = []
    group_operators = group_operators or {}
    for frame in snapshots.frames:
        group = snapshots.group_index(frame)
        small, big = group_operators.get(group, (small_ops, big_ops))
        if small.dims != small_ops.dims or big.dims != big_ops.dims:
            raise DimensionMismatchError(
                f"operators of group {group} have dims {small.dims}/{big.dims}, "
                f"expected {small_ops.dims}/{big_ops.dims}"
            )
        sample = exact_correction(frame, bases, small, big, with_turbulence)
        jac = (
            eddy_viscosity_jacobian(sample.a_proj, small)
            if with_turbulence
            else np.zeros((n_u + n_p, n_nut))
        )
        rows.append((sample, jac, group, not split_spec.is_test(frame.mu)))

    is_train = np.array([r[3] for r in rows], dtype=bool)
    if not is_train.any():
        raise EmptyDatasetError("training split is empty; every parameter is held out")
    a = np.stack([r[0].a_proj for r in rows])
    g = np.stack([r[0].g_proj for r in rows])
    mu = np.stack([_sample_parameters(f, snapshots.kind) for f in snapshots.frames])
    tau = np.stack([r[0].tau_exact for r in rows])
    normalization = Normalization.fit(
        a=a[is_train], g=g[is_train], mu=mu[is_train], tau=tau[is_train]
    )
    if not quiet:
        console.print(
            f"Closure dataset: {len(rows)} samples ({int(is_train.sum())} train), "
            f"dims {small_ops.dims} from {big_ops.dims}"
        )
    return ClosureDataset(
        a=a,
        g=g,
        mu=mu,
        tau=tau,
        jac=np.stack([r[1] for r in rows]),
        groups=tuple(int(r[2]) for r in rows),
        is_train=tuple(bool(t) for t in is_train),
        dims=small_ops.dims,
        big_dims=big_ops.dims,
        kind=snapshots.kind,
        with_turbulence=with_turbulence,
        normalization=normalization,
    )


def tau_with_eddy_viscosity(dataset: ClosureDataset, g: np.ndarray) -> np.ndarray:
    """Exact corrections recomputed with ``g`` in place of the projected eddy viscosity."""
    return dataset.tau - np.einsum("sij,sj->si", dataset.jac, g - dataset.g)
