from __future__ import annotations

import numpy as np
import scipy.linalg
from pydantic import field_validator

from ddrom.arrays import ArrayModel
from ddrom.errors import DimensionMismatchError, PodRankError
from ddrom.fom.fields import FieldKind, SnapshotSet
from ddrom.fom.grid import GridSpec
from ddrom.io import array_checksum

EIGENVALUE_FLOOR = 1e-13


class InnerProduct(ArrayModel):
    """Diagonal mass-weighted inner product ``(a, b) = a^T diag(weights) b``."""

    weights: np.ndarray

    @field_validator("weights")
    @classmethod
    def _positive(cls, weights: np.ndarray) -> np.ndarray:
        if weights.ndim != 1 or np.any(weights <= 0):
            raise ValueError("inner-product weights must be a positive vector")
        return weights

    @property
    def size(self) -> int:
        return self.weights.size

    def dot(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return a.T @ (self.weights[:, None] * b if b.ndim > 1 else self.weights * b)

    def norm(self, a: np.ndarray) -> float:
        return float(np.sqrt(np.dot(a, self.weights * a)))

    def checksum(self) -> str:
        return array_checksum(self.weights)


class EnergySpectrum(ArrayModel):
    cumulative: np.ndarray

    @field_validator("cumulative")
    @classmethod
    def _check(cls, cumulative: np.ndarray) -> np.ndarray:
        if cumulative.size == 0 or cumulative[-1] != 1.0:
            raise ValueError("cumulative energy must end at 1")
        if np.any(np.diff(cumulative) < 0) or cumulative[0] < 0:
            raise ValueError("cumulative energy must be non-decreasing in [0, 1]")
        return cumulative

    @classmethod
    def from_eigenvalues(cls, eigenvalues: np.ndarray) -> "EnergySpectrum":
        eigenvalues = np.clip(np.asarray(eigenvalues, dtype=np.float64), 0.0, None)
        total = eigenvalues.sum()
        if total <= 0:
            raise ValueError("cannot build an energy spectrum from zero eigenvalues")
        cumulative = np.minimum(np.cumsum(eigenvalues) / total, 1.0)
        cumulative[-1] = 1.0
        return cls(cumulative=cumulative)


class PodBasis(ArrayModel):
    """Orthonormal modes (one per column) with the full non-increasing eigenvalue list."""

    modes: np.ndarray
    eigenvalues: np.ndarray
    field_kind: FieldKind
    inner_product: InnerProduct
    mean_subtracted: bool = False

    @property
    def rank(self) -> int:
        return self.modes.shape[1]

    def spectrum(self) -> EnergySpectrum:
        return EnergySpectrum.from_eigenvalues(self.eigenvalues)

    def truncate(self, n: int) -> "PodBasis":
        if n > self.rank:
            raise PodRankError(n, self.rank)
        return self.model_copy(update={"modes": self.modes[:, :n]})

    def project(self, field: np.ndarray, n: int | None = None) -> np.ndarray:
        return project(field, self, self.rank if n is None else n)

    def reconstruct(self, coeffs: np.ndarray) -> np.ndarray:
        return reconstruct(coeffs, self)


def inner_product_for(grid: GridSpec, field_kind: FieldKind) -> InnerProduct:
    areas = np.asarray(grid.cell_areas)
    return InnerProduct(weights=np.tile(areas, 2) if field_kind == "u" else areas)


def mid_configuration(params: list | tuple | np.ndarray) -> np.ndarray:
    """Arithmetic mean of the training parameter vectors."""
    params = np.asarray(params, dtype=np.float64)
    if params.ndim != 2 or params.shape[0] == 0:
        raise ValueError("mid-configuration needs a non-empty list of parameter vectors")
    return params.mean(axis=0)


def _snapshot_matrix(snapshots: SnapshotSet | np.ndarray, field_kind: FieldKind) -> np.ndarray:
    if isinstance(snapshots, SnapshotSet):
        return snapshots.matrix(field_kind)
    matrix = np.asarray(snapshots, dtype=np.float64)
    return matrix[:, None] if matrix.ndim == 1 else matrix


def correlation_matrix(
    snapshots: SnapshotSet | np.ndarray, ip: InnerProduct, field_kind: FieldKind = "u"
) -> np.ndarray:
    """``K_ij = s_i^T diag(w) s_j`` over the snapshot columns."""
    matrix = _snapshot_matrix(snapshots, field_kind)
    if matrix.shape[0] != ip.size:
        raise DimensionMismatchError(
            f"Snapshots have {matrix.shape[0]} dofs, inner product has {ip.size}"
        )
    weighted = ip.weights[:, None] * matrix
    K = matrix.T @ weighted
    return 0.5 * (K + K.T)


def _orthonormalize(modes: np.ndarray, weights: np.ndarray) -> np.ndarray:
    # two passes of modified Gram-Schmidt, column order preserved
    modes = modes.copy()
    for j in range(modes.shape[1]):
        for _ in range(2):
            for i in range(j):
                modes[:, j] -= np.dot(modes[:, i], weights * modes[:, j]) * modes[:, i]
        modes[:, j] /= np.sqrt(np.dot(modes[:, j], weights * modes[:, j]))
    return modes


def compute_basis(
    K: np.ndarray,
    snapshots: SnapshotSet | np.ndarray,
    ip: InnerProduct,
    rank: int | None = None,
    field_kind: FieldKind = "u",
) -> PodBasis:
    """Method of snapshots on the correlation matrix ``K``.

    Eigenvalues below ``1e-13 * lambda_max`` are dropped from the modes. Each mode is
    signed so that its largest-magnitude entry is positive.
    """
    matrix = _snapshot_matrix(snapshots, field_kind)
    if K.shape != (matrix.shape[1], matrix.shape[1]):
        raise DimensionMismatchError(
            f"Correlation matrix {K.shape} does not match {matrix.shape[1]} snapshots"
        )
    eigenvalues, vectors = scipy.linalg.eigh(K)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    vectors = vectors[:, order]

    lam_max = eigenvalues[0] if eigenvalues.size else 0.0
    achievable = int(np.sum(eigenvalues > EIGENVALUE_FLOOR * lam_max)) if lam_max > 0 else 0
    if rank is None:
        rank = achievable
    if rank > matrix.shape[1] or rank > achievable:
        raise PodRankError(rank, achievable)

    modes = matrix @ (vectors[:, :rank] / np.sqrt(eigenvalues[:rank]))
    modes = _orthonormalize(modes, ip.weights)
    pivots = np.argmax(np.abs(modes), axis=0)
    signs = np.sign(modes[pivots, np.arange(rank)])
    modes = modes * np.where(signs == 0, 1.0, signs)

    return PodBasis(
        modes=modes, eigenvalues=eigenvalues, field_kind=field_kind, inner_product=ip
    )


def project(field: np.ndarray, basis: PodBasis, n: int) -> np.ndarray:
    if n > basis.rank:
        raise PodRankError(n, basis.rank)
    if field.shape[0] != basis.modes.shape[0]:
        raise DimensionMismatchError(
            f"Field of size {field.shape[0]} against modes of size {basis.modes.shape[0]}"
        )
    return basis.inner_product.dot(basis.modes[:, :n], field)


def reconstruct(coeffs: np.ndarray, basis: PodBasis) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape[0] > basis.rank:
        raise PodRankError(coeffs.shape[0], basis.rank)
    return basis.modes[:, : coeffs.shape[0]] @ coeffs


def select_modes_by_energy(spectrum: EnergySpectrum | np.ndarray, threshold: float) -> int:
    """Smallest ``n`` whose cumulative energy reaches ``threshold``, capped at the spectrum length."""
    if not 0 < threshold <= 1:
        raise ValueError(f"energy threshold must lie in (0, 1], got {threshold}")
    cumulative = spectrum.cumulative if isinstance(spectrum, EnergySpectrum) else np.asarray(spectrum)
    n = int(np.searchsorted(cumulative, threshold, side="left")) + 1
    return min(n, cumulative.size)


def compute_bases(
    snapshots: SnapshotSet, ranks: dict[str, int | None] | None = None
) -> dict[str, PodBasis]:
    """POD of u, p and nut on the snapshot set's reference (mid-configuration) grid."""
    ranks = ranks or {}
    bases = {}
    for kind in ("u", "p", "nut"):
        ip = inner_product_for(snapshots.grid, kind)
        K = correlation_matrix(snapshots, ip, kind)
        bases[kind] = compute_basis(K, snapshots, ip, ranks.get(kind), kind)
    return bases
