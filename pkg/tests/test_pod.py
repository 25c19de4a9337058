import numpy as np
import pytest

from ddrom.errors import ArchiveFormatError, PodRankError
from ddrom.pod.archive import load_basis, save_basis
from ddrom.pod.basis import (
    EnergySpectrum,
    InnerProduct,
    compute_basis,
    correlation_matrix,
    mid_configuration,
    project,
    reconstruct,
    select_modes_by_energy,
)


def random_setup(n_dof=40, n_snap=6, seed=0):
    rng = np.random.default_rng(seed)
    weights = 0.5 + rng.random(n_dof)
    snapshots = rng.standard_normal((n_dof, n_snap))
    return InnerProduct(weights=weights), snapshots


def basis_of(snapshots, ip, rank=None):
    return compute_basis(correlation_matrix(snapshots, ip), snapshots, ip, rank)


def test_correlation_of_single_snapshot():
    ip = InnerProduct(weights=np.ones(3))
    K = correlation_matrix(np.array([2.0, 0.0, 0.0]), ip)
    np.testing.assert_array_equal(K, [[4.0]])


def test_correlation_of_orthogonal_snapshots():
    ip = InnerProduct(weights=np.ones(4))
    snapshots = np.array([[1.0, 0.0], [0.0, 2.0], [0.0, 0.0], [0.0, 0.0]])
    K = correlation_matrix(snapshots, ip)
    assert abs(K[0, 1]) <= 1e-14
    assert abs(K[1, 0]) <= 1e-14


def test_correlation_matches_triple_product():
    ip, snapshots = random_setup(n_snap=5)
    K = correlation_matrix(snapshots, ip)
    oracle = snapshots.T @ np.diag(ip.weights) @ snapshots
    np.testing.assert_allclose(K, oracle, rtol=1e-13, atol=1e-13 * np.abs(oracle).max())


def test_single_snapshot_basis():
    ip = InnerProduct(weights=np.array([1.0, 2.0, 0.5]))
    s = np.array([3.0, -1.0, 2.0])
    basis = basis_of(s, ip)
    norm = np.sqrt(s @ (ip.weights * s))
    np.testing.assert_allclose(basis.modes[:, 0], s / norm, atol=1e-14)
    assert basis.eigenvalues[0] == pytest.approx(norm**2, rel=1e-14)


def test_equal_orthogonal_snapshots_split_energy():
    ip = InnerProduct(weights=np.ones(4))
    snapshots = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
    basis = basis_of(snapshots, ip)
    assert basis.eigenvalues[0] == pytest.approx(basis.eigenvalues[1], rel=1e-14)
    np.testing.assert_allclose(basis.spectrum().cumulative, [0.5, 1.0], atol=1e-14)


def test_optimality_identity_and_orthonormality():
    ip, snapshots = random_setup()
    full = basis_of(snapshots, ip)
    gram = full.modes.T @ (ip.weights[:, None] * full.modes)
    assert np.abs(gram - np.eye(full.rank)).max() <= 1e-10

    errors = []
    for n in range(1, full.rank + 1):
        coeffs = project(snapshots, full, n)
        residual = snapshots - full.modes[:, :n] @ coeffs
        error = np.sum(ip.weights[:, None] * residual**2)
        tail = full.eigenvalues[n:].sum()
        assert error == pytest.approx(tail, rel=1e-8, abs=1e-10 * full.eigenvalues[0])
        errors.append(error)
    assert all(b <= a + 1e-12 for a, b in zip(errors, errors[1:]))


def test_rank_four_reconstruction_error():
    ip, snapshots = random_setup(seed=2)
    basis = basis_of(snapshots, ip, rank=4)
    residual = snapshots - basis.modes @ project(snapshots, basis, 4)
    error = np.sum(ip.weights[:, None] * residual**2)
    assert error == pytest.approx(basis.eigenvalues[4:].sum(), rel=1e-8)


def test_eigenvalues_sorted_and_signs_fixed():
    ip, snapshots = random_setup(seed=3)
    basis = basis_of(snapshots, ip)
    assert np.all(np.diff(basis.eigenvalues) <= 0)
    for mode in basis.modes.T:
        assert mode[np.argmax(np.abs(mode))] > 0


def test_hierarchy_of_truncated_bases():
    ip, snapshots = random_setup(seed=4)
    small = basis_of(snapshots, ip, rank=2)
    big = basis_of(snapshots, ip, rank=5)
    np.testing.assert_array_equal(small.modes, big.modes[:, :2])
    np.testing.assert_array_equal(big.truncate(2).modes, small.modes)


def test_rank_beyond_numerical_rank_reports_achievable():
    ip, snapshots = random_setup(n_snap=2, seed=5)
    dependent = np.column_stack([snapshots, snapshots[:, 0] + snapshots[:, 1]])
    with pytest.raises(PodRankError) as error:
        basis_of(dependent, ip, rank=3)
    assert error.value.achievable == 2


def test_project_modes_and_combinations():
    ip, snapshots = random_setup(seed=6)
    basis = basis_of(snapshots, ip)
    phi1, phi2 = basis.modes[:, 0], basis.modes[:, 1]
    coeffs = project(phi1, basis, basis.rank)
    expected = np.zeros(basis.rank)
    expected[0] = 1.0
    np.testing.assert_allclose(coeffs, expected, atol=1e-12)
    np.testing.assert_allclose(project(2 * phi1 + 3 * phi2, basis, 2), [2.0, 3.0], atol=1e-12)


def test_projection_matches_weighted_least_squares():
    ip, snapshots = random_setup(seed=7)
    basis = basis_of(snapshots, ip)
    field = np.random.default_rng(8).standard_normal(snapshots.shape[0])
    ours = reconstruct(project(field, basis, basis.rank), basis)
    root = np.sqrt(ip.weights)
    c, *_ = np.linalg.lstsq(root[:, None] * basis.modes, root * field, rcond=None)
    np.testing.assert_allclose(ours, basis.modes @ c, atol=1e-10)


def test_reconstruct_round_trip():
    ip, snapshots = random_setup(seed=9)
    basis = basis_of(snapshots, ip)
    np.testing.assert_array_equal(reconstruct(np.eye(basis.rank)[0], basis), basis.modes[:, 0])
    assert not np.any(reconstruct(np.zeros(3), basis))
    rng = np.random.default_rng(10)
    for _ in range(5):
        coeffs = rng.standard_normal(basis.rank)
        np.testing.assert_allclose(project(reconstruct(coeffs, basis), basis, basis.rank), coeffs, atol=1e-12)


def test_select_modes_by_energy():
    assert select_modes_by_energy(np.array([0.96, 0.995, 0.999]), 0.99) == 2
    spectrum = EnergySpectrum.from_eigenvalues(np.array([5.0, 3.0, 1.0, 0.5]))
    assert select_modes_by_energy(spectrum, 1.0) == 4
    with pytest.raises(ValueError):
        select_modes_by_energy(spectrum, 0.0)


def test_select_modes_matches_linear_scan():
    rng = np.random.default_rng(12)
    eigenvalues = np.sort(rng.random(30) ** 4)[::-1]
    spectrum = EnergySpectrum.from_eigenvalues(eigenvalues)
    expected = next(k + 1 for k, c in enumerate(spectrum.cumulative) if c >= 0.999)
    assert select_modes_by_energy(spectrum, 0.999) == expected


def test_mid_configuration_is_mean():
    np.testing.assert_allclose(mid_configuration([[0.1, 0.2], [0.3, -0.2]]), [0.2, 0.0])


def test_basis_archive_round_trip(tmp_path):
    ip, snapshots = random_setup(seed=13)
    basis = basis_of(snapshots, ip)
    save_basis(basis, tmp_path)
    loaded = load_basis(tmp_path)
    np.testing.assert_array_equal(loaded.modes, basis.modes)
    np.testing.assert_array_equal(loaded.eigenvalues, basis.eigenvalues)
    assert loaded.mean_subtracted is False

    weights = tmp_path / "weights.bin"
    data = bytearray(weights.read_bytes())
    data[4] ^= 0x01
    weights.write_bytes(bytes(data))
    with pytest.raises(ArchiveFormatError):
        load_basis(tmp_path)
