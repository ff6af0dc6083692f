import numpy as np
import pytest

from liouvillian_eth.ensembles import EnsembleSeed
from liouvillian_eth.linalg import SpectralDecomposition, eig_nonhermitian
from liouvillian_eth.models import (SIGMA, Lindbladian, random_liouvillian, site_operator,
                                    supermagnetization_sector, vectorize, xxz_impurity_chain)
from liouvillian_eth.dynamics import (DynamicsError, all_up_state, current_operator, envelope,
                                      expectation_series, expm_expectation, lindblad_ode, spectral_weights,
                                      stripe_dynamics, stripe_weight_sums, validate_density_matrix)
from liouvillian_eth.stripes import Stripe, partition_stripes

CHAIN = dict(J=1, delta=0.8, h=1, gamma1_plus=0.5, gamma1_minus=1.2, gammaN_plus=1, gammaN_minus=0.8, gamma_z=1)
UP = np.diag([1.0, 0.0]).astype(complex)


def _decay(gamma=1.0, omega0=0.0):
    return Lindbladian(0.5 * omega0 * SIGMA["z"], [(SIGMA["-"], gamma)])


def test_identity_observable_is_conserved():
    lind = random_liouvillian(4, 2, seed=EnsembleSeed(0))
    dec = eig_nonhermitian(vectorize(lind).dense())
    rho = np.eye(4, dtype=complex) / 4
    exp = spectral_weights(dec, np.eye(4), rho)
    np.testing.assert_allclose(expectation_series(exp, [0, 0.5, 3, 10]), 1.0, atol=1e-8)


@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
def test_decaying_qubit_sigma_z(gamma):
    dec = eig_nonhermitian(vectorize(_decay(gamma)).dense())
    exp = spectral_weights(dec, SIGMA["z"], UP)
    t = np.linspace(0, 5, 11)
    np.testing.assert_allclose(expectation_series(exp, t).real, 2 * np.exp(-gamma * t) - 1, atol=1e-10)
    big = np.abs(exp.weights) > 1e-10
    np.testing.assert_allclose(np.sort(exp.weights[big].real), [-1, 2], atol=1e-10)
    np.testing.assert_allclose(np.sort(exp.eigenvalues[big].real), [-gamma, 0], atol=1e-12)


def test_t0_equals_initial_expectation_and_steady_state_limit():
    lind = random_liouvillian(6, 2, seed=EnsembleSeed(1))
    dec = eig_nonhermitian(vectorize(lind).dense())
    rng = np.random.default_rng(0)
    a = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    obs = a + a.conj().T
    rho = np.diag(rng.uniform(size=6)).astype(complex)
    rho /= np.trace(rho)
    exp = spectral_weights(dec, obs, rho)
    assert expectation_series(exp, [0.0])[0] == pytest.approx(np.trace(obs @ rho), abs=1e-9)
    # steady state: right eigenvector of the zero eigenvalue, normalized to unit trace
    k = np.argmin(np.abs(dec.eigenvalues))
    ss = dec.right_vectors[:, k].reshape(6, 6)
    ss = ss / np.trace(ss)
    assert expectation_series(exp, [200.0])[0] == pytest.approx(np.trace(obs @ ss), abs=1e-8)


def test_expansion_matches_ode_and_expm():
    lind = xxz_impurity_chain(3, **CHAIN)
    dec = eig_nonhermitian(vectorize(lind).dense())
    obs = current_operator(3)
    rho = all_up_state(3)
    t = np.linspace(0, 4, 9)
    exp = spectral_weights(dec, obs, rho)
    series = expectation_series(exp, t)
    ode = lindblad_ode(lind, rho, obs, t)
    np.testing.assert_allclose(series.real, ode, atol=1e-7)
    assert np.abs(series.imag).max() <= 1e-8
    np.testing.assert_allclose(expm_expectation(lind, rho, obs, t[::4]), series[::4], atol=1e-9)


def test_sector_expansion_matches_full_space():
    n = 3
    lind = xxz_impurity_chain(n, **CHAIN)
    full = vectorize(lind, sparse=True)
    block, smap = supermagnetization_sector(full, n, 0)
    obs = site_operator(n, 2, "z")
    t = np.linspace(0, 3, 7)
    sec = spectral_weights(eig_nonhermitian(block.matrix), obs, all_up_state(n), sector=smap)
    fullexp = spectral_weights(eig_nonhermitian(full.dense()), obs, all_up_state(n))
    np.testing.assert_allclose(expectation_series(sec, t), expectation_series(fullexp, t), atol=1e-9)
    rho_bad = np.full((8, 8), 1 / 8, dtype=complex)
    with pytest.raises(ValueError):
        spectral_weights(eig_nonhermitian(block.matrix), obs, rho_bad, sector=smap)


def test_zero_generator_keeps_state():
    lind = Lindbladian(np.zeros((2, 2)), [])
    dec = eig_nonhermitian(vectorize(lind).dense())
    rho = np.array([[0.7, 0.2], [0.2, 0.3]], dtype=complex)
    exp = spectral_weights(dec, SIGMA["x"], rho)
    np.testing.assert_allclose(expectation_series(exp, [0, 1, 100]), 0.4, atol=1e-12)
    np.testing.assert_allclose(lindblad_ode(lind, rho, SIGMA["x"], [0, 1, 100]), 0.4, atol=1e-10)


@pytest.mark.parametrize("rho", [
    np.diag([0.5, 0.6]),
    np.diag([1.5, -0.5]),
    np.array([[0.5, 0.3], [0.1, 0.5]]),
])
def test_invalid_density_matrices(rho):
    with pytest.raises(ValueError):
        validate_density_matrix(rho)


def test_requires_biorthonormal_left_vectors():
    dec = eig_nonhermitian(vectorize(_decay()).dense(), left=False)
    with pytest.raises(DynamicsError):
        spectral_weights(dec, SIGMA["z"], UP)
    bad = SpectralDecomposition(np.zeros(4), np.eye(4), np.eye(4), biorthonormal=False)
    with pytest.raises(DynamicsError):
        spectral_weights(bad, SIGMA["z"], UP)


def test_ode_dimension_cap_and_negative_times():
    lind = xxz_impurity_chain(7, **CHAIN)
    with pytest.raises(ValueError):
        lindblad_ode(lind, all_up_state(7), current_operator(7), [0, 1])
    dec = eig_nonhermitian(vectorize(_decay()).dense())
    with pytest.raises(ValueError):
        expectation_series(spectral_weights(dec, SIGMA["z"], UP), [-1.0])


def test_stripe_dynamics_conjugate_pair():
    # a stripe holding lambda = -g/2 +- i w with equal weights gives cos(w t)
    gamma, w0 = 1.0, 3.0
    dec = eig_nonhermitian(vectorize(_decay(gamma, w0)).dense())
    rho = np.full((2, 2), 0.5, dtype=complex)
    exp = spectral_weights(dec, SIGMA["x"], rho)
    pair = [s for s in partition_stripes(dec, 0.2) if s.n_members == 2][0]
    t = np.linspace(0, 4, 41)
    y = stripe_dynamics(exp, pair, t)
    np.testing.assert_allclose(y.real, np.cos(w0 * t), atol=1e-10)
    assert np.abs(y).max() <= 1 + 1e-12
    sums = stripe_weight_sums(exp, partition_stripes(dec, 0.2))
    assert [g for g, _ in sums] == sorted(g for g, _ in sums)


def test_stripe_dynamics_bounded_and_empty():
    lind = random_liouvillian(4, 2, seed=EnsembleSeed(2))
    dec = eig_nonhermitian(vectorize(lind).dense())
    exp = spectral_weights(dec, np.kron(SIGMA["x"], np.eye(2)), np.eye(4, dtype=complex) / 4)
    t = np.linspace(0, 10, 101)
    for s in partition_stripes(dec, 0.3):
        if np.abs(exp.weights[s.member_indices]).sum() > 1e-20:
            assert np.abs(stripe_dynamics(exp, s, t)).max() <= 1 + 1e-12
    with pytest.raises(DynamicsError):
        stripe_dynamics(exp, Stripe(99, 0.0, np.array([], dtype=int), np.array([])), t)


def test_envelope():
    t = np.linspace(0, 10, 101)
    y = np.exp(-t)
    assert envelope(y, t, 5.0) == pytest.approx(np.exp(-4.0))
    with pytest.raises(ValueError):
        envelope(y, t, 50.0)
