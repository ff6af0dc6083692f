"""Lindbladian builders, vectorization and super-magnetization sectors."""

from dataclasses import dataclass, field
from math import comb, sqrt

import numpy as np
import scipy.sparse as sp

from .ensembles import EnsembleSeed, sample_ginibre, sample_gue
from .linalg import as_complex_matrix, hs_inner

__all__ = [
    "Lindbladian",
    "SuperMatrix",
    "SectorMap",
    "lindblad_rhs",
    "vectorize",
    "gell_mann_basis",
    "gell_mann_expand",
    "random_liouvillian",
    "coupling_from_geff",
    "pauli",
    "site_operator",
    "xxz_impurity_chain",
    "impurity_site",
    "magnetization",
    "supermagnetization_sector",
    "sector_indices",
    "expected_sector_dimension",
]

SIGMA = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    # basis state 0 is spin up
    "+": np.array([[0, 1], [0, 0]], dtype=complex),
    "-": np.array([[0, 0], [1, 0]], dtype=complex),
}


def pauli(label):
    return SIGMA[label].copy()


@dataclass
class Lindbladian:
    """Hamiltonian plus jump operators ``(L_j, gamma_j)``."""

    hamiltonian: np.ndarray
    jumps: list = field(default_factory=list)
    label: str = ""

    def __post_init__(self):
        self.hamiltonian = as_complex_matrix(self.hamiltonian, square=True, name="hamiltonian")
        d = self.dim
        herm_err = np.abs(self.hamiltonian - self.hamiltonian.conj().T).max(initial=0.0)
        if herm_err > 1e-12 * max(np.abs(self.hamiltonian).max(initial=0.0), 1.0):
            raise ValueError(f"hamiltonian is not Hermitian (max deviation {herm_err:.3e})")
        jumps = []
        for op, rate in self.jumps:
            op = as_complex_matrix(op, square=True, name="jump operator")
            if op.shape != (d, d):
                raise ValueError(f"jump operator shape {op.shape} does not match hamiltonian dimension {d}")
            rate = float(rate)
            if rate < 0 or not np.isfinite(rate):
                raise ValueError(f"jump rates must be non-negative, got {rate}")
            jumps.append((op, rate))
        self.jumps = jumps

    @property
    def dim(self):
        return self.hamiltonian.shape[0]

    def folded_jumps(self):
        """Jump operators with their rates absorbed, ``sqrt(gamma) L``."""
        return [np.sqrt(rate) * op for op, rate in self.jumps]


@dataclass
class SuperMatrix:
    """Matrix of a superoperator in the row-major vectorized basis.

    ``basis_labels[k] = (ket, bra)`` labels super-index ``k`` as ``|ket><bra|``.
    """

    matrix: object
    basis_labels: np.ndarray

    @property
    def dim(self):
        return self.matrix.shape[0]

    def dense(self):
        m = self.matrix
        return m.toarray() if sp.issparse(m) else np.asarray(m)


@dataclass
class SectorMap:
    sector_charge: int
    kept_indices: np.ndarray
    hilbert_dim: int

    @property
    def dimension(self):
        return int(self.kept_indices.size)

    def embed(self, v):
        """Scatter a sector vector back into the full ``D x D`` operator."""
        full = np.zeros(self.hilbert_dim**2, dtype=complex)
        full[self.kept_indices] = v
        return full.reshape(self.hilbert_dim, self.hilbert_dim)

    def project(self, op):
        return np.asarray(op).reshape(-1)[self.kept_indices]


def lindblad_rhs(lind, rho):
    """Operator-form right-hand side of the Lindblad master equation."""
    h = lind.hamiltonian
    out = -1j * (h @ rho - rho @ h)
    for op, rate in lind.jumps:
        ldl = op.conj().T @ op
        out = out + rate * (op @ rho @ op.conj().T - 0.5 * (ldl @ rho + rho @ ldl))
    return out


def vectorize(lind, sparse=False):
    """Liouvillian superoperator of ``lind`` in the row-major basis.

    ``L = -i(H x 1 - 1 x H^T) + sum_j (L_j x L_j^* - 1/2 L_j^dag L_j x 1 - 1/2 1 x (L_j^dag L_j)^T)``
    with rates folded into the jump operators.
    """
    d = lind.dim
    if sparse:
        eye = sp.identity(d, dtype=complex, format="csr")
        kr = lambda a, b: sp.kron(sp.csr_matrix(a), sp.csr_matrix(b), format="csr")
    else:
        eye = np.eye(d, dtype=complex)
        kr = np.kron
    h = lind.hamiltonian
    sup = -1j * (kr(h, eye) - kr(eye, h.T))
    for op in lind.folded_jumps():
        ldl = op.conj().T @ op
        sup = sup + kr(op, op.conj()) - 0.5 * kr(ldl, eye) - 0.5 * kr(eye, ldl.T)
    labels = np.array([(a, b) for a in range(d) for b in range(d)], dtype=np.int64)
    if sparse:
        sup = sp.csr_matrix(sup)
        sup.eliminate_zeros()
    return SuperMatrix(matrix=sup, basis_labels=labels)


def _gell_mann_index(d):
    """Yield ``(kind, j, k)`` descriptors of the generalized Gell-Mann matrices."""
    for j in range(d):
        for k in range(j + 1, d):
            yield ("sym", j, k)
            yield ("asym", j, k)
    for l in range(1, d):
        yield ("diag", l, 0)


def gell_mann_basis(dim):
    """Hilbert-Schmidt orthonormal Hermitian operator basis.

    Element 0 is ``1/sqrt(dim)``; the remaining ``dim**2 - 1`` are traceless
    generalized Gell-Mann matrices scaled to unit norm.
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    basis = [np.eye(dim, dtype=complex) / np.sqrt(dim)]
    for kind, j, k in _gell_mann_index(dim):
        g = np.zeros((dim, dim), dtype=complex)
        if kind == "sym":
            g[j, k] = g[k, j] = 1 / np.sqrt(2)
        elif kind == "asym":
            g[j, k] = -1j / np.sqrt(2)
            g[k, j] = 1j / np.sqrt(2)
        else:
            l = j
            g[np.arange(l), np.arange(l)] = 1.0
            g[l, l] = -l
            g /= np.sqrt(l * (l + 1))
        basis.append(g)
    return basis


def gell_mann_expand(coeffs, dim):
    """``sum_k coeffs[k] G_{k+1}`` over the traceless Gell-Mann elements.

    ``coeffs`` has leading length ``dim**2 - 1``; extra trailing axes are
    broadcast, so ``coeffs`` of shape ``(dim**2 - 1, r)`` gives ``r`` operators
    stacked as ``(r, dim, dim)``.  Uses the sparsity of the basis instead of
    materialising it.
    """
    coeffs = np.asarray(coeffs)
    squeeze = coeffs.ndim == 1
    if squeeze:
        coeffs = coeffs[:, None]
    if coeffs.shape[0] != dim * dim - 1:
        raise ValueError(f"expected {dim * dim - 1} coefficients, got {coeffs.shape[0]}")
    r = coeffs.shape[1]
    out = np.zeros((r, dim, dim), dtype=complex)
    npair = dim * (dim - 1) // 2
    ju, ku = np.triu_indices(dim, 1)
    sym = coeffs[0 : 2 * npair : 2].T / np.sqrt(2)
    asym = coeffs[1 : 2 * npair : 2].T / np.sqrt(2)
    out[:, ju, ku] = sym - 1j * asym
    out[:, ku, ju] = sym + 1j * asym
    diag = coeffs[2 * npair :]  # (dim-1, r), element l = 1..dim-1
    ls = np.arange(1, dim)
    norms = 1.0 / np.sqrt(ls * (ls + 1.0))
    weighted = diag * norms[:, None]
    # entry i < l gets +w_l, entry i == l gets -l w_l
    cum = np.cumsum(weighted[::-1], axis=0)[::-1]  # cum[l-1] = sum_{l' >= l} w_l'
    diag_vals = np.zeros((dim, r), dtype=complex)
    diag_vals[0] = cum[0]
    for i in range(1, dim):
        above = cum[i] if i < dim - 1 else 0.0
        diag_vals[i] = above - i * weighted[i - 1]
    out[:, np.arange(dim), np.arange(dim)] = diag_vals.T
    return out[0] if squeeze else out


def coupling_from_geff(g_eff, dim, r, beta):
    """Bare coupling ``g`` from ``g_eff = (2 r beta dim)^(1/4) g``."""
    return g_eff / (2.0 * r * beta * dim) ** 0.25


def random_liouvillian(dim, r, beta=2.0, g_eff=1.0, seed=None, hamiltonian_variance=1.0):
    """Random Lindbladian: GUE Hamiltonian and ``r`` traceless Ginibre jumps.

    ``L_j = g sum_k G_k w_kj`` with ``w`` an ``(dim**2 - 1) x r`` Ginibre
    matrix; all rates are 1 (the scale sits in ``g``).  The Hamiltonian has
    off-diagonal variance ``hamiltonian_variance`` (unit by default, so its
    bandwidth grows like ``sqrt(dim)`` together with the dissipator at fixed
    ``g_eff``).
    """
    if dim < 2 or dim % 2:
        raise ValueError(f"dim must be an even integer >= 2, got {dim}")
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    if not g_eff > 0 or not beta > 0:
        raise ValueError("g_eff and beta must be positive")
    if seed is None or isinstance(seed, int):
        seed = EnsembleSeed(seed or 0)
    h = sample_gue(dim, seed, variance=hamiltonian_variance)
    w = sample_ginibre(dim * dim - 1, r, seed)
    g = coupling_from_geff(g_eff, dim, r, beta)
    ops = g * gell_mann_expand(w, dim)
    return Lindbladian(
        hamiltonian=h,
        jumps=[(op, 1.0) for op in ops],
        label=f"random_liouvillian(D={dim}, r={r}, beta={beta}, g_eff={g_eff})",
    )


def site_operator(n_sites, site, op):
    """Embed single-site ``op`` at 1-based ``site`` of an ``n_sites`` qubit chain.

    Site 1 is the most significant tensor factor.
    """
    if not 1 <= site <= n_sites:
        raise ValueError(f"site {site} outside 1..{n_sites}")
    if isinstance(op, str):
        op = SIGMA[op]
    left = np.eye(2 ** (site - 1), dtype=complex)
    right = np.eye(2 ** (n_sites - site), dtype=complex)
    return np.kron(np.kron(left, op), right)


def impurity_site(n_sites):
    """1-based impurity site: ``N/2`` for even ``N``, ``ceil(N/2)`` for odd."""
    return (n_sites + 1) // 2


def xxz_impurity_chain(n_sites, J=1.0, delta=0.0, h=0.0, gamma1_plus=0.0, gamma1_minus=0.0,
                       gammaN_plus=0.0, gammaN_minus=0.0, gamma_z=0.0):
    """Open XXZ chain with a single magnetic impurity, boundary pumping/loss and dephasing."""
    if int(n_sites) != n_sites or n_sites < 2:
        raise ValueError(f"n_sites must be an integer >= 2, got {n_sites}")
    n = int(n_sites)
    rates = dict(gamma1_plus=gamma1_plus, gamma1_minus=gamma1_minus, gammaN_plus=gammaN_plus,
                 gammaN_minus=gammaN_minus, gamma_z=gamma_z)
    for name, val in rates.items():
        if val < 0:
            raise ValueError(f"{name} must be non-negative, got {val}")
    ops = {(s, a): site_operator(n, s, a) for s in range(1, n + 1) for a in "xyz+-"}
    d = 2**n
    ham = np.zeros((d, d), dtype=complex)
    for j in range(1, n):
        ham += J * (ops[j, "x"] @ ops[j + 1, "x"] + ops[j, "y"] @ ops[j + 1, "y"]
                    + delta * ops[j, "z"] @ ops[j + 1, "z"])
    ham += h * ops[impurity_site(n), "z"]
    jumps = [
        (ops[1, "+"], gamma1_plus),
        (ops[1, "-"], gamma1_minus),
        (ops[n, "+"], gammaN_plus),
        (ops[n, "-"], gammaN_minus),
    ]
    jumps += [(ops[j, "z"], gamma_z) for j in range(1, n + 1)]
    jumps = [(op, rate) for op, rate in jumps if rate > 0]
    return Lindbladian(
        hamiltonian=ham,
        jumps=jumps,
        label=f"xxz_impurity_chain(N={n}, J={J}, delta={delta}, h={h})",
    )


def magnetization(n_sites):
    """Eigenvalues of ``S^z = sum_j sigma^z_j`` on the computational basis."""
    states = np.arange(2**n_sites)
    n_down = np.array([bin(s).count("1") for s in states])
    return n_sites - 2 * n_down


def sector_indices(n_sites, charge):
    """Super-indices of ``|a><b|`` with ``m(a) - m(b) == charge``.

    Ordered lexicographically by (bra, ket) configuration.
    """
    m = magnetization(n_sites)
    d = m.size
    ket, bra = np.nonzero((m[:, None] - m[None, :]) == charge)
    order = np.lexsort((ket, bra))
    return (ket[order] * d + bra[order]).astype(np.int64)


def supermagnetization_sector(sup, n_sites, charge=0, check_tol=1e-10):
    """Block of ``sup`` on the ``S^z x 1 - 1 x S^z`` eigenspace with eigenvalue ``charge``.

    Raises ``ValueError`` when the block is empty or when ``sup`` couples the
    sector to the rest of the space by more than ``check_tol`` (relative).
    """
    matrix = sup.matrix if isinstance(sup, SuperMatrix) else sup
    d = 2**n_sites
    if matrix.shape != (d * d, d * d):
        raise ValueError(f"superoperator shape {matrix.shape} is not that of a {n_sites}-qubit model")
    kept = sector_indices(n_sites, charge)
    if kept.size == 0:
        raise ValueError(f"super-magnetization sector {charge} is empty for N={n_sites}")
    csr = sp.csr_matrix(matrix)
    rows = csr[kept]
    block = rows[:, kept]
    mask = np.ones(d * d, dtype=bool)
    mask[kept] = False
    leak = rows[:, mask]
    leak_in = csr[mask][:, kept]
    scale = max(abs(csr).max(), 1e-300)
    cross = max(abs(leak).max() if leak.nnz else 0.0, abs(leak_in).max() if leak_in.nnz else 0.0)
    if cross > check_tol * scale:
        raise ValueError(
            f"superoperator does not preserve sector {charge}: cross-block element {cross:.3e}"
        )
    labels = np.stack([kept // d, kept % d], axis=1)
    smap = SectorMap(sector_charge=int(charge), kept_indices=kept, hilbert_dim=d)
    return SuperMatrix(matrix=block.toarray(), basis_labels=labels), smap


def expected_sector_dimension(n_sites, charge=0):
    """Closed-form dimension: number of (ket, bra) pairs with the given charge."""
    if charge % 2:
        return 0
    shift = charge // 2
    # m(a) - m(b) = 2 (down(b) - down(a))
    return sum(comb(n_sites, k) * comb(n_sites, k + shift) for k in range(n_sites + 1)
               if 0 <= k + shift <= n_sites)
