import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qetqit.linalg import (
    DensityMatrix,
    distances,
    eig_hermitian,
    fidelity,
    haar_unitary,
    kron,
    matrix_from_json,
    matrix_func_psd,
    matrix_to_json,
    partial_trace,
    random_density_matrix,
    random_hermitian,
    trace_distance,
)
from qetqit.thermal import Hamiltonian, tfd_state

X = np.array([[0, 1], [1, 0]], dtype=complex)
seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_kron_small_cases():
    np.testing.assert_array_equal(kron(np.eye(2), np.eye(2)), np.eye(4))
    np.testing.assert_array_equal(kron(np.diag([1, 2]), np.diag([3, 4])), np.diag([3, 4, 6, 8]))
    ket00 = np.array([1, 0, 0, 0])
    np.testing.assert_array_equal(kron(X, X) @ ket00, [0, 0, 0, 1])


@given(seeds)
@settings(max_examples=30, deadline=None)
def test_kron_mixed_product_and_associativity(seed):
    rng = np.random.default_rng(seed)
    a, b, c, d = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)) for n in (2, 3, 2, 3))
    np.testing.assert_allclose(kron(a, b) @ kron(c, d), kron(a @ c, b @ d), atol=1e-10)
    np.testing.assert_allclose(kron(kron(a, b), c), kron(a, kron(b, c)), atol=1e-10)


def test_partial_trace_of_bell_pair_is_maximally_mixed():
    phi = np.array([1, 0, 0, 1]) / math.sqrt(2)
    np.testing.assert_allclose(partial_trace(np.outer(phi, phi), [2, 2], [1]), np.eye(2) / 2, atol=1e-15)


@given(seeds)
@settings(max_examples=30, deadline=None)
def test_partial_trace_of_product(seed):
    rho = random_density_matrix(3, seed)
    sigma = random_density_matrix(2, seed + 1)
    joint = kron(rho, sigma)
    np.testing.assert_allclose(partial_trace(joint, [3, 2], [0]), rho, atol=1e-12)
    np.testing.assert_allclose(partial_trace(joint, [3, 2], [1]), sigma, atol=1e-12)
    assert abs(np.trace(partial_trace(joint, [3, 2], [1])) - np.trace(joint)) < 1e-12


def test_partial_trace_of_qubit_tfd():
    h = Hamiltonian.from_eigenvalues([0.0, 1.0])
    psi = tfd_state(h, 1.0).ket
    rho_b = partial_trace(np.outer(psi, psi.conj()), [2, 2], [1])
    np.testing.assert_allclose(np.diag(rho_b).real, [0.7310585786300049, 0.2689414213699951], atol=1e-12)


def test_partial_trace_rejects_bad_dims():
    with pytest.raises(ValueError):
        partial_trace(np.eye(4), [2, 3], [0])
    with pytest.raises(ValueError):
        partial_trace(np.eye(4), [2, 2], [2])


def test_eig_small_cases():
    w, _ = eig_hermitian(np.diag([2.0, 1.0]))
    np.testing.assert_allclose(w, [1.0, 2.0])
    w, _ = eig_hermitian(X)
    np.testing.assert_allclose(w, [-1.0, 1.0], atol=1e-15)


def test_eig_rejects_non_hermitian():
    with pytest.raises(ValueError):
        eig_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))


@pytest.mark.parametrize("d", [1, 2, 5, 16, 33, 64])
def test_eig_reconstruction_and_orthonormality(d):
    for seed in range(100 if d <= 16 else 10):
        m = random_hermitian(d, seed)
        dec = eig_hermitian(m)
        scale = np.abs(m).max()
        assert np.abs(dec.reconstruct() - m).max() <= 1e-10 * max(scale, 1.0)
        v = dec.eigenvectors
        assert np.abs(v.conj().T @ v - np.eye(d)).max() <= 1e-10
        assert np.all(np.diff(dec.eigenvalues) >= 0)


def test_eig_phase_convention_is_deterministic():
    m = np.eye(3)  # fully degenerate
    _, v = eig_hermitian(m)
    for col in v.T:
        k = np.flatnonzero(np.abs(col) > 1e-12)[0]
        assert abs(col[k].imag) < 1e-15 and col[k].real > 0


def test_matrix_functions_small_cases():
    np.testing.assert_allclose(matrix_func_psd(np.diag([4.0, 9.0]), "sqrt"), np.diag([2.0, 3.0]), atol=1e-14)
    np.testing.assert_allclose(matrix_func_psd(np.eye(3) / 3, "log"), -math.log(3) * np.eye(3), atol=1e-14)
    # log and inv_sqrt vanish off the support
    np.testing.assert_allclose(matrix_func_psd(np.diag([1.0, 0.0]), "log"), np.zeros((2, 2)), atol=1e-15)
    np.testing.assert_allclose(matrix_func_psd(np.diag([4.0, 0.0]), "inv_sqrt"), np.diag([0.5, 0.0]), atol=1e-15)


def test_matrix_functions_clamp_small_negatives_and_reject_large():
    out = matrix_func_psd(np.diag([1.0, -1e-12]), "sqrt")
    np.testing.assert_allclose(out, np.diag([1.0, 0.0]), atol=1e-15)
    with pytest.raises(ValueError):
        matrix_func_psd(np.diag([1.0, -1e-3]), "sqrt")


@given(seeds)
@settings(max_examples=40, deadline=None)
def test_sqrt_squares_back(seed):
    rho = random_density_matrix(4, seed)
    r = matrix_func_psd(rho, "sqrt")
    np.testing.assert_allclose(r @ r, rho, atol=1e-10)


@given(seeds)
@settings(max_examples=40, deadline=None)
def test_log_inverts_exp_on_full_rank(seed):
    m = random_hermitian(4, seed)
    np.testing.assert_allclose(matrix_func_psd(matrix_func_psd(m, "exp"), "log"), m, atol=1e-8)


def test_distances_small_cases():
    rho = random_density_matrix(3, 11)
    d = distances(rho, rho)
    assert d.trace_distance == pytest.approx(0.0, abs=1e-10)
    assert d.fidelity == pytest.approx(1.0, abs=1e-10)
    assert d.purified_distance == pytest.approx(0.0, abs=1e-5)
    zero, one = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    assert tuple(distances(zero, one)) == pytest.approx((1.0, 0.0, 1.0), abs=1e-12)
    plus = np.full((2, 2), 0.5)
    assert trace_distance(zero, plus) == pytest.approx(1 / math.sqrt(2), abs=1e-12)


@given(seeds)
@settings(max_examples=40, deadline=None)
def test_distance_properties(seed):
    a, b, c = (random_density_matrix(3, seed + k) for k in range(3))
    assert trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-12
    assert fidelity(a, b) == pytest.approx(fidelity(b, a), abs=1e-10)
    for v in distances(a, b):
        assert -1e-10 <= v <= 1 + 1e-10


def test_haar_unitary_scalar_and_unitarity():
    u = haar_unitary(1, 5)
    assert u.shape == (1, 1) and abs(abs(u[0, 0]) - 1) < 1e-15
    for seed in range(100):
        u = haar_unitary(8, seed)
        assert np.abs(u.conj().T @ u - np.eye(8)).max() <= 1e-10


def test_haar_unitary_is_seed_deterministic():
    np.testing.assert_array_equal(haar_unitary(4, 123), haar_unitary(4, 123))
    assert not np.allclose(haar_unitary(4, 123), haar_unitary(4, 124))


def test_haar_second_moment():
    rng = np.random.default_rng(2024)
    n = 100_000
    vals = np.array([abs(haar_unitary(2, rng)[0, 0]) ** 2 for _ in range(n)])
    se = vals.std(ddof=1) / math.sqrt(n)
    assert abs(vals.mean() - 0.5) <= 3 * se


def test_density_matrix_validation():
    DensityMatrix(np.eye(2) / 2)
    with pytest.raises(ValueError):
        DensityMatrix(np.eye(2))  # trace 2
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([1.5, -0.5]))
    with pytest.raises(ValueError):
        DensityMatrix(np.eye(4) / 4, dims=(2, 3))


def test_density_matrix_helpers():
    rho = DensityMatrix(kron(random_density_matrix(2, 1), random_density_matrix(3, 2)), dims=(2, 3))
    assert rho.ptrace([0]).dim == 2
    assert DensityMatrix.maximally_mixed(4).eigenvalues == pytest.approx([0.25] * 4)
    psi = np.array([1, 1j]) / math.sqrt(2)
    assert DensityMatrix.from_ket(psi).eigenvalues == pytest.approx([0, 1], abs=1e-15)


def test_matrix_json_round_trip():
    m = random_hermitian(3, 9)[:, :2]
    obj = json.loads(json.dumps(matrix_to_json(m)))
    assert obj["rows"] == 3 and obj["cols"] == 2
    np.testing.assert_array_equal(matrix_from_json(obj), m)
    with pytest.raises(ValueError):
        matrix_from_json({"rows": 2, "cols": 2, "re": [1, 2, 3], "im": [0, 0, 0]})
    with pytest.raises(ValueError):
        matrix_from_json({"rows": 1, "cols": 1, "re": [float("nan")], "im": [0]})
