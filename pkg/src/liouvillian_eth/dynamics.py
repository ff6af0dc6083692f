"""Spectral-expansion dynamics, stripe-restricted dynamics and an ODE oracle."""

from dataclasses import dataclass
import logging

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .linalg import SpectralDecomposition, as_complex_matrix
from .models import SectorMap, vectorize, site_operator

__all__ = [
    "DynamicsExpansion",
    "DynamicsError",
    "validate_density_matrix",
    "spectral_weights",
    "expectation_series",
    "stripe_weight_sums",
    "stripe_dynamics",
    "lindblad_ode",
    "expm_expectation",
    "envelope",
    "current_operator",
    "all_up_state",
]

log = logging.getLogger(__name__)


class DynamicsError(RuntimeError):
    pass


@dataclass
class DynamicsExpansion:
    """Spectral weights ``c^eta_a c^sigma_a`` of one observable and initial state."""

    weights: np.ndarray
    eigenvalues: np.ndarray
    present: np.ndarray
    c_eta: np.ndarray
    c_sigma: np.ndarray
    observable_label: str = ""
    initial_state_label: str = ""

    @property
    def n_absent(self):
        return int(np.count_nonzero(~self.present))


def current_operator(n_sites):
    """Edge current ``i(sigma^+_1 sigma^-_N - sigma^+_N sigma^-_1)``."""
    sp1 = site_operator(n_sites, 1, "+")
    sm1 = site_operator(n_sites, 1, "-")
    spn = site_operator(n_sites, n_sites, "+")
    smn = site_operator(n_sites, n_sites, "-")
    return 1j * (sp1 @ smn - spn @ sm1)


def all_up_state(n_sites):
    rho = np.zeros((2**n_sites, 2**n_sites), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def validate_density_matrix(rho, tol=1e-10):
    rho = as_complex_matrix(rho, square=True, name="density matrix")
    if np.abs(rho - rho.conj().T).max() > tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise ValueError(f"density matrix trace is {np.trace(rho).real:.6g}, expected 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -tol:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


def spectral_weights(decomp, observable, rho0, sector=None, observable_label="", initial_state_label=""):
    """Project ``observable`` on right and ``rho0`` on left eigenvectors.

    ``c^eta_a = Tr[O eta_a]`` and ``c^sigma_a = Tr[sigma_a^dag rho0]``.  When
    the decomposition lives in a super-magnetization sector, ``sector`` maps
    it back to the full operator space; ``rho0`` must then lie in that sector.
    """
    if not isinstance(decomp, SpectralDecomposition) or decomp.left_vectors is None:
        raise DynamicsError("decomposition without left eigenvectors")
    if not decomp.biorthonormal:
        raise DynamicsError("decomposition is not biorthonormal")
    rho0 = validate_density_matrix(rho0)
    observable = as_complex_matrix(observable, square=True, name="observable")
    if observable.shape != rho0.shape:
        raise ValueError("observable and initial state dimensions differ")
    o_t = observable.T.reshape(-1)
    r = rho0.reshape(-1)
    if sector is not None:
        outside = np.ones(r.size, dtype=bool)
        outside[sector.kept_indices] = False
        if np.abs(r[outside]).max(initial=0.0) > 1e-12:
            raise ValueError(f"initial state has weight outside sector {sector.sector_charge}")
        o_t = o_t[sector.kept_indices]
        r = r[sector.kept_indices]
    if o_t.size != decomp.right_vectors.shape[0]:
        raise ValueError("operator space dimension does not match the decomposition")
    c_eta = o_t @ decomp.right_vectors
    c_sigma = decomp.left_vectors.conj().T @ r
    present = ~decomp.defective
    weights = np.where(present, c_eta * c_sigma, 0.0)
    if not present.all():
        log.warning("%d defective eigenpairs left out of the expansion", int((~present).sum()))
    return DynamicsExpansion(weights=weights, eigenvalues=decomp.eigenvalues.copy(), present=present,
                             c_eta=c_eta, c_sigma=c_sigma, observable_label=observable_label,
                             initial_state_label=initial_state_label)


def expectation_series(exp, times):
    """``sum_a exp(lambda_a t) w_a`` at each time."""
    t = np.asarray(times, dtype=float)
    if np.any(t < 0):
        raise ValueError("times must be non-negative")
    return np.exp(np.outer(t, exp.eigenvalues)) @ exp.weights


def stripe_weight_sums(exp, stripes):
    """``(gamma_bar, sum |w_a|)`` per stripe, ordered by ``gamma_bar``."""
    aw = np.abs(exp.weights)
    out = [(s.gamma_bar, float(aw[np.asarray(s.member_indices, dtype=np.int64)].sum())) for s in stripes]
    return sorted(out)


def stripe_dynamics(exp, stripe, times, floor=1e-30):
    """Stripe-restricted dynamics with the decay gauged out, normalised by the total weight."""
    idx = np.asarray(stripe.member_indices, dtype=np.int64)
    w = exp.weights[idx]
    norm = np.abs(w).sum()
    if norm <= floor:
        raise DynamicsError(f"stripe {stripe.stripe_id} carries no spectral weight ({norm:.3e})")
    omega = exp.eigenvalues.imag[idx]
    t = np.asarray(times, dtype=float)
    return np.exp(1j * np.outer(t, omega)) @ w / norm


def envelope(values, times, t_center, half_width=1.0):
    """Largest ``|value|`` for times within ``half_width`` of ``t_center``."""
    t = np.asarray(times)
    sel = np.abs(t - t_center) <= half_width
    if not sel.any():
        raise ValueError(f"no samples near t = {t_center}")
    return float(np.abs(np.asarray(values)[sel]).max())


def _generator(lind):
    return vectorize(lind, sparse=lind.dim > 16).matrix


def lindblad_ode(lind, rho0, observable, times, rtol=1e-10, atol=1e-12, max_dim=64, trace_tol=1e-8):
    """``Tr[O rho(t)]`` by adaptive Runge-Kutta (4/5) on the vectorized master equation."""
    if lind.dim > max_dim:
        raise ValueError(f"Hilbert dimension {lind.dim} exceeds the oracle cap {max_dim}")
    rho0 = validate_density_matrix(rho0)
    t = np.asarray(times, dtype=float)
    if np.any(np.diff(t) < 0) or np.any(t < 0):
        raise ValueError("times must be non-negative and sorted")
    gen = _generator(lind)
    sol = solve_ivp(lambda _, y: gen @ y, (0.0, float(t[-1])), rho0.reshape(-1).astype(complex),
                    method="RK45", t_eval=t, rtol=rtol, atol=atol)
    if not sol.success:
        raise DynamicsError(f"integration failed: {sol.message}")
    d = lind.dim
    rhos = sol.y.T.reshape(-1, d, d)
    drift = np.abs(np.trace(rhos, axis1=1, axis2=2) - 1.0).max()
    if drift > trace_tol:
        raise DynamicsError(f"trace drift {drift:.3e} exceeds {trace_tol:.1e}")
    vals = np.einsum("ij,tji->t", observable, rhos)
    if np.allclose(observable, observable.conj().T, atol=1e-14):
        return vals.real
    return vals


def expm_expectation(lind, rho0, observable, times):
    """Dense matrix-exponential cross-check of the oracle at a few times."""
    gen = vectorize(lind).matrix
    d = lind.dim
    out = []
    for t in np.atleast_1d(times):
        rho = (sla.expm(gen * float(t)) @ rho0.reshape(-1)).reshape(d, d)
        out.append(np.trace(observable @ rho))
    return np.array(out)
