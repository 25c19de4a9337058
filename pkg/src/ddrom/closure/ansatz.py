from __future__ import annotations

import numpy as np
import scipy.linalg
from pydantic import model_validator
from rich.console import Console

from ddrom.arrays import ArrayModel
from ddrom.closure.extract import ClosureDataset

RIDGE = 1e-10


class QuadraticAnsatz(ArrayModel):
    """``tau ~ A x + x^T B x`` on the zero-padded state ``x = (a, 0)``."""

    A_tilde: np.ndarray
    B_tilde: np.ndarray
    n_u: int
    n_p: int
    underdetermined: bool = False

    @model_validator(mode="after")
    def _check(self) -> "QuadraticAnsatz":
        n = self.n_u + self.n_p
        if self.A_tilde.shape != (n, n) or self.B_tilde.shape != (n, n, n):
            raise ValueError(f"ansatz operators must be sized by N_u + N_p = {n}")
        if not (np.all(np.isfinite(self.A_tilde)) and np.all(np.isfinite(self.B_tilde))):
            raise ValueError("ansatz operators must be finite")
        return self


def quadratic_features(a: np.ndarray) -> np.ndarray:
    """Rows ``[a_j, a_j a_k (j <= k)]`` for each sample row of ``a``."""
    a = np.atleast_2d(a)
    j, k = np.triu_indices(a.shape[1])
    return np.hstack([a, a[:, j] * a[:, k]])


def fit_quadratic_ansatz(
    dataset: ClosureDataset, console: Console | None = None
) -> QuadraticAnsatz:
    """Least-squares operators from the training split of a single-parameter dataset.

    The monomials ``a_j a_k`` with ``j <= k`` are the independent quadratic features; the
    fitted coefficient of ``a_j a_k`` is shared symmetrically between ``B[:, j, k]`` and
    ``B[:, k, j]``.
    """
    console = console or Console()
    train = dataset.split("train")
    physical = train.physical_params()
    if np.unique(physical, axis=0).shape[0] > 1:
        raise ValueError(
            "quadratic ansatz needs a time-only dataset; found several physical parameters"
        )
    n_u, n_p = dataset.n_u, dataset.n_p
    features = quadratic_features(train.a)
    n_samples, n_features = features.shape

    underdetermined = n_samples < n_features
    if underdetermined:
        console.print(
            f"[yellow]Quadratic ansatz is under-determined: {n_samples} samples for "
            f"{n_features} features; using the minimum-norm solution[/yellow]"
        )
        coeffs, *_ = np.linalg.lstsq(features, train.tau, rcond=None)
    else:
        normal = features.T @ features + RIDGE * np.eye(n_features)
        coeffs = scipy.linalg.solve(normal, features.T @ train.tau, assume_a="pos")

    n = n_u + n_p
    A = np.zeros((n, n))
    A[:, :n_u] = coeffs[:n_u].T
    B = np.zeros((n, n, n))
    for row, (j, k) in enumerate(zip(*np.triu_indices(n_u))):
        c = coeffs[n_u + row]
        if j == k:
            B[:, j, j] = c
        else:
            B[:, j, k] = 0.5 * c
            B[:, k, j] = 0.5 * c
    return QuadraticAnsatz(A_tilde=A, B_tilde=B, n_u=n_u, n_p=n_p, underdetermined=underdetermined)


def evaluate_quadratic_ansatz(qa: QuadraticAnsatz, a: np.ndarray) -> np.ndarray:
    x = np.zeros(qa.n_u + qa.n_p)
    x[: a.size] = a
    return qa.A_tilde @ x + np.einsum("ijk,j,k->i", qa.B_tilde, x, x)
