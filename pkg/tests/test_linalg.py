import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from liouvillian_eth.linalg import (EigensolverError, MAX_KRON_DIM, as_complex_matrix, eig_nonhermitian,
                                    hs_inner, kron, sort_spectrum, unvec, vec)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2, dtype=complex)


def _random(n, rng):
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


def test_as_complex_matrix_rejects_nonfinite():
    with pytest.raises(ValueError):
        as_complex_matrix([[1.0, np.nan], [0.0, 1.0]])
    with pytest.raises(ValueError):
        as_complex_matrix([1.0, 2.0])
    with pytest.raises(ValueError):
        as_complex_matrix(np.ones((2, 3)), square=True)


def test_eig_diagonal():
    dec = eig_nonhermitian(np.diag([2.0, 1.0]))
    np.testing.assert_allclose(dec.eigenvalues, [1, 2])
    np.testing.assert_allclose(np.abs(dec.right_vectors), [[0, 1], [1, 0]], atol=1e-15)
    assert dec.biorthonormal


def test_eig_pauli_x():
    dec = eig_nonhermitian(SX)
    np.testing.assert_allclose(dec.eigenvalues, [-1, 1], atol=1e-14)


def test_eig_jordan_block_flagged_defective():
    dec = eig_nonhermitian([[0, 1], [0, 0]])
    np.testing.assert_allclose(dec.eigenvalues, [0, 0], atol=1e-12)
    assert dec.defective.all()


def test_eig_left_false_has_no_left_vectors():
    dec = eig_nonhermitian(_random(5, np.random.default_rng(0)), left=False)
    assert dec.left_vectors is None
    assert dec.right_vectors.shape == (5, 5)


def test_eig_rejects_nonfinite():
    with pytest.raises(ValueError):
        eig_nonhermitian([[np.inf, 0], [0, 1]])


@pytest.mark.parametrize("n", [2, 7, 16, 64])
def test_eig_residual_and_biorthogonality(n):
    rng = np.random.default_rng(n)
    m = _random(n, rng)
    dec = eig_nonhermitian(m)
    norm = np.linalg.norm(m, 2)
    res = np.linalg.norm(m @ dec.right_vectors - dec.right_vectors * dec.eigenvalues, axis=0)
    assert res.max() <= 1e-8 * norm
    np.testing.assert_allclose(np.linalg.norm(dec.right_vectors, axis=0), 1.0, atol=1e-12)
    assert dec.biorthonormal
    gram = dec.left_vectors.conj().T @ dec.right_vectors
    assert np.abs(gram - np.eye(n)).max() <= 1e-8
    # left vectors satisfy the adjoint relation
    lres = np.linalg.norm(m.conj().T @ dec.left_vectors - dec.left_vectors * dec.eigenvalues.conj(), axis=0)
    assert lres.max() <= 1e-8 * norm * np.abs(dec.left_vectors).max() * n


def test_eig_degenerate_cluster_biorthonormalized():
    rng = np.random.default_rng(3)
    s = _random(6, rng)
    m = s @ np.diag([1, 1, 1, 2, 3, 4]).astype(complex) @ np.linalg.inv(s)
    dec = eig_nonhermitian(m)
    assert dec.biorthonormal
    assert dec.ambiguous_pairs >= 2
    gram = dec.left_vectors.conj().T @ dec.right_vectors
    assert np.abs(gram - np.eye(6)).max() <= 1e-8


def test_eigenvalue_ordering():
    ev = np.array([1 + 1j, -1 + 2j, -1 - 2j, 0.5])
    assert ev[sort_spectrum(ev)].tolist() == [-1 - 2j, -1 + 2j, 0.5, 1 + 1j]
    dec = eig_nonhermitian(np.diag(ev))
    assert dec.eigenvalues.tolist() == [-1 - 2j, -1 + 2j, 0.5, 1 + 1j]


@pytest.mark.parametrize("a,b,expected", [(I2, I2, 2), (SX, SY, 0), (SZ, SZ, 2)])
def test_hs_inner_examples(a, b, expected):
    assert hs_inner(a, b) == pytest.approx(expected)


def test_hs_inner_conjugate_symmetric_and_mismatch():
    rng = np.random.default_rng(1)
    a, b = _random(3, rng), _random(3, rng)
    assert hs_inner(a, b) == pytest.approx(np.conj(hs_inner(b, a)))
    assert hs_inner(a, b) == pytest.approx(np.trace(a.conj().T @ b))
    with pytest.raises(ValueError):
        hs_inner(a, np.eye(2))


def test_kron_examples():
    np.testing.assert_array_equal(kron(I2, I2), np.eye(4))
    np.testing.assert_array_equal(kron(SZ, I2), np.diag([1, 1, -1, -1]))
    rho = I2 / 2
    np.testing.assert_allclose(kron(SX, SX) @ vec(rho), vec(SX @ rho @ SX))


def test_kron_size_guard():
    big = np.zeros((MAX_KRON_DIM, 1))
    with pytest.raises(ValueError):
        kron(big, np.zeros((2, 1)))


def test_vec_roundtrip():
    x = np.arange(9.0).reshape(3, 3)
    np.testing.assert_array_equal(unvec(vec(x)), x)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_vec_identity(n, seed):
    rng = np.random.default_rng(seed)
    a, x, b = _random(n, rng), _random(n, rng), _random(n, rng)
    np.testing.assert_allclose(vec(a @ x @ b), kron(a, b.T) @ vec(x), atol=1e-12 * max(1, n**2) * 10)


def test_shifted_gauge():
    dec = eig_nonhermitian(np.diag([1.0, 2.0 + 1j]))
    sh = dec.shifted(-3.0)
    np.testing.assert_allclose(sh.eigenvalues, dec.eigenvalues - 3.0)
    np.testing.assert_array_equal(sh.omegas, dec.omegas)


def test_eigensolver_error_is_runtime_error():
    assert issubclass(EigensolverError, RuntimeError)
