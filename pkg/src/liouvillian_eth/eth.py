"""Superoperator matrix elements on stripe eigenbases and their ETH statistics."""

from dataclasses import dataclass, field
import logging

import numpy as np
import scipy.sparse as sp
from scipy import stats

from .linalg import SpectralDecomposition, as_complex_matrix
from .models import SectorMap, site_operator

__all__ = [
    "SuperOperatorSpec",
    "EthSample",
    "EthSampleSet",
    "EthStatistics",
    "build_superoperator",
    "restrict_to_sector",
    "matrix_elements",
    "diagonal_statistics",
    "offdiagonal_statistics",
    "gaussianity",
    "stripe_dependence_report",
    "scaling_slope",
    "qubit_factor_operator",
]

log = logging.getLogger(__name__)

KINDS = ("coherent", "measurement")


@dataclass
class SuperOperatorSpec:
    """Which probe superoperator to build and from which operator.

    ``base_operator`` is either an explicit matrix, a ``(site, label)`` pair
    for an ``n_sites`` qubit chain, or the string ``"x_qubit"`` for
    ``sigma^x`` on the leading qubit factor of a ``dim`` dimensional space.
    """

    kind: str
    base_operator: object
    n_sites: int | None = None
    dim: int | None = None

    def operator(self):
        op = self.base_operator
        if isinstance(op, str):
            if op != "x_qubit":
                raise ValueError(f"unknown operator descriptor {op!r}")
            if self.dim is None:
                raise ValueError("dim is required for the 'x_qubit' descriptor")
            return qubit_factor_operator(self.dim)
        if isinstance(op, tuple):
            if self.n_sites is None:
                raise ValueError("n_sites is required for a (site, label) descriptor")
            site, label = op
            return site_operator(self.n_sites, int(site), label)
        op = as_complex_matrix(op, square=True, name="base operator")
        if self.dim is not None and op.shape[0] != self.dim:
            raise ValueError(f"base operator dimension {op.shape[0]} does not match model dimension {self.dim}")
        return op


def qubit_factor_operator(dim, label="x"):
    """``sigma^label (x) 1_{dim/2}``."""
    if dim % 2:
        raise ValueError(f"dim must be even, got {dim}")
    return np.kron(site_operator(1, 1, label), np.eye(dim // 2))


def build_superoperator(spec, sparse=False):
    """Coherent ``O x 1 - 1 x O^T`` or measurement ``O x O^*`` superoperator."""
    if spec.kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {spec.kind!r}")
    op = spec.operator()
    d = op.shape[0]
    if sparse:
        o = sp.csr_matrix(op)
        eye = sp.identity(d, dtype=complex, format="csr")
        if spec.kind == "coherent":
            return sp.csr_matrix(sp.kron(o, eye) - sp.kron(eye, o.T))
        return sp.csr_matrix(sp.kron(o, o.conj()))
    eye = np.eye(d, dtype=complex)
    if spec.kind == "coherent":
        return np.kron(op, eye) - np.kron(eye, op.T)
    return np.kron(op, op.conj())


def restrict_to_sector(superop, smap, tol=1e-10, compress=False):
    """Block of ``superop`` on a super-magnetization sector.

    By default the superoperator must preserve the sector.  With
    ``compress=True`` the block ``P O P`` is returned even when ``O`` leaks;
    its elements between sector vectors equal the full-space elements, which
    is all that stripe matrix elements need.
    """
    csr = sp.csr_matrix(superop)
    kept = smap.kept_indices
    n = csr.shape[0]
    if n != smap.hilbert_dim**2:
        raise ValueError(f"superoperator dimension {n} does not match sector map ({smap.hilbert_dim}**2)")
    mask = np.ones(n, dtype=bool)
    mask[kept] = False
    rows = csr[kept]
    out_leak = rows[:, mask]
    in_leak = csr[mask][:, kept]
    cross = max(abs(out_leak).max() if out_leak.nnz else 0.0, abs(in_leak).max() if in_leak.nnz else 0.0)
    scale = max(abs(csr).max() if csr.nnz else 0.0, 1e-300)
    if cross > tol * scale and not compress:
        raise ValueError(
            f"superoperator couples sector {smap.sector_charge} to other sectors "
            f"(max cross-block element {cross:.3e}); it does not commute with the super-magnetization"
        )
    return rows[:, kept].toarray()


@dataclass
class EthSample:
    alpha: int
    beta: int
    omega_alpha: float
    omega_beta: float
    gamma_bar: float
    value: complex
    overlap: complex


@dataclass
class EthSampleSet:
    """Columnar store of matrix elements over stripes (and realizations)."""

    alpha: np.ndarray
    beta: np.ndarray
    omega_alpha: np.ndarray
    omega_beta: np.ndarray
    gamma_bar: np.ndarray
    value: np.ndarray
    overlap: np.ndarray
    stripe_id: np.ndarray
    realization: np.ndarray
    liouville_dim: int = 0
    skipped_defective: int = 0

    def __len__(self):
        return self.alpha.size

    def __iter__(self):
        for k in range(len(self)):
            yield EthSample(int(self.alpha[k]), int(self.beta[k]), float(self.omega_alpha[k]),
                            float(self.omega_beta[k]), float(self.gamma_bar[k]),
                            complex(self.value[k]), complex(self.overlap[k]))

    @property
    def diagonal(self):
        return self.alpha == self.beta

    def select(self, mask):
        cols = {name: getattr(self, name)[mask] for name in _COLUMNS}
        return EthSampleSet(**cols, liouville_dim=self.liouville_dim,
                            skipped_defective=self.skipped_defective)

    @classmethod
    def concat(cls, sets):
        sets = list(sets)
        if not sets:
            raise ValueError("nothing to concatenate")
        cols = {name: np.concatenate([getattr(s, name) for s in sets]) for name in _COLUMNS}
        dims = {s.liouville_dim for s in sets}
        return cls(**cols, liouville_dim=dims.pop() if len(dims) == 1 else 0,
                   skipped_defective=sum(s.skipped_defective for s in sets))


_COLUMNS = ("alpha", "beta", "omega_alpha", "omega_beta", "gamma_bar", "value", "overlap",
            "stripe_id", "realization")


def matrix_elements(superop, decomp, stripes, biorthogonal=False, realization=0):
    """Elements ``<eta_a | O eta_b>`` for every ordered member pair of every stripe.

    With ``biorthogonal=True`` the bra is the left eigenvector instead,
    ``<sigma_a | O eta_b>``.  Defective eigenpairs are skipped and counted.
    """
    if not isinstance(decomp, SpectralDecomposition) or decomp.right_vectors is None:
        raise ValueError("decomposition with right eigenvectors required")
    if biorthogonal and decomp.left_vectors is None:
        raise ValueError("biorthogonal elements need left eigenvectors")
    n = decomp.dim
    right = decomp.right_vectors
    bra_vectors = decomp.left_vectors if biorthogonal else right
    if superop.shape != (right.shape[0], right.shape[0]):
        raise ValueError(f"superoperator shape {superop.shape} does not match eigenvectors {right.shape}")
    cols = {name: [] for name in _COLUMNS}
    skipped = 0
    for s in stripes:
        idx = np.asarray(s.member_indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise IndexError(f"stripe {s.stripe_id} references eigenpairs outside 0..{n - 1}")
        good = ~decomp.defective[idx]
        skipped += int(np.count_nonzero(~good))
        idx = idx[good]
        if idx.size == 0:
            continue
        r = right[:, idx]
        bra = bra_vectors[:, idx]
        vals = bra.conj().T @ (superop @ r)
        over = bra.conj().T @ r
        a, b = np.meshgrid(np.arange(idx.size), np.arange(idx.size), indexing="ij")
        a = a.ravel()
        b = b.ravel()
        om = decomp.eigenvalues.imag[idx]
        cols["alpha"].append(idx[a])
        cols["beta"].append(idx[b])
        cols["omega_alpha"].append(om[a])
        cols["omega_beta"].append(om[b])
        cols["gamma_bar"].append(np.full(a.size, s.gamma_bar))
        cols["value"].append(np.asarray(vals).ravel())
        cols["overlap"].append(over.ravel())
        cols["stripe_id"].append(np.full(a.size, s.stripe_id, dtype=np.int64))
        cols["realization"].append(np.full(a.size, realization, dtype=np.int64))
    if skipped:
        log.warning("skipped %d defective eigenpairs", skipped)
    empty = {"alpha": np.int64, "beta": np.int64, "stripe_id": np.int64, "realization": np.int64,
             "value": complex, "overlap": complex}
    arrays = {name: (np.concatenate(v) if v else np.empty(0, dtype=empty.get(name, float)))
              for name, v in cols.items()}
    return EthSampleSet(**arrays, liouville_dim=right.shape[0], skipped_defective=skipped)


@dataclass
class EthStatistics:
    var_offdiag: float
    offdiag_samples: np.ndarray
    mean_offdiag: float
    excess_kurtosis: float
    ks_distance: float
    liouville_dim: int
    var_diag: float = float("nan")
    n_diag: int = 0
    omega_center: float = float("nan")
    delta_omega: float = float("nan")

    @property
    def n_offdiag(self):
        return int(self.offdiag_samples.size)


def diagonal_statistics(samples, omega_cutoff, min_samples=2):
    """Variance of ``Re O_aa`` over diagonal samples with ``|Omega_a| < omega_cutoff``.

    Returns ``(var_diag, table)`` where ``table`` has columns
    ``omega, value, stripe_id, realization``.
    """
    mask = samples.diagonal & (np.abs(samples.omega_alpha) < omega_cutoff)
    n = int(np.count_nonzero(mask))
    if n < min_samples:
        raise ValueError(f"only {n} diagonal samples with |omega| < {omega_cutoff}")
    vals = samples.value[mask].real
    table = np.rec.fromarrays(
        [samples.omega_alpha[mask], vals, samples.stripe_id[mask], samples.realization[mask]],
        names="omega,value,stripe_id,realization",
    )
    return float(np.var(vals)), table


def gaussianity(x):
    """``(variance, excess kurtosis, KS distance to N(0, variance))``."""
    x = np.asarray(x, dtype=float)
    var = float(np.var(x))
    if var == 0.0:
        return 0.0, float("nan"), float("nan")
    kurt = float(stats.kurtosis(x, fisher=True, bias=True))
    ks = float(stats.kstest(x, "norm", args=(0.0, np.sqrt(var))).statistic)
    return var, kurt, ks


def offdiagonal_window(samples, omega_center, delta_omega):
    """Mask of off-diagonal pairs ``a < b`` with ``||omega| - omega_center| <= delta_omega``."""
    omega = np.abs(samples.omega_alpha - samples.omega_beta)
    # one entry per unordered pair: O_ba is the conjugate for Hermitian O
    return (samples.alpha < samples.beta) & (np.abs(omega - omega_center) <= delta_omega)


def offdiagonal_statistics(samples, omega_center, delta_omega, min_samples=50):
    """Gaussianity of ``Re O_ab`` for pairs in the ``|omega|`` window."""
    mask = offdiagonal_window(samples, omega_center, delta_omega)
    n = int(np.count_nonzero(mask))
    if n == 0:
        raise ValueError(f"no off-diagonal pairs with |omega| = {omega_center} +- {delta_omega}")
    if n < min_samples:
        raise ValueError(f"only {n} off-diagonal pairs in the window (need {min_samples})")
    x = samples.value[mask].real
    var, kurt, ks = gaussianity(x)
    return EthStatistics(var_offdiag=var, offdiag_samples=x, mean_offdiag=float(x.mean()),
                         excess_kurtosis=kurt, ks_distance=ks, liouville_dim=samples.liouville_dim,
                         omega_center=omega_center, delta_omega=delta_omega)


def stripe_dependence_report(samples, omega_cutoff, omega_center, delta_omega):
    """One row per stripe: diagonal mean/variance and off-diagonal window variance.

    Rows are keyed by ``(realization, stripe_id)``; statistics that have too
    few samples come out as NaN.
    """
    rows = []
    keys = sorted(set(zip(samples.realization.tolist(), samples.stripe_id.tolist())))
    for real, sid in keys:
        sub = samples.select((samples.realization == real) & (samples.stripe_id == sid))
        dmask = sub.diagonal & (np.abs(sub.omega_alpha) < omega_cutoff)
        dvals = sub.value[dmask].real
        omask = offdiagonal_window(sub, omega_center, delta_omega)
        ovals = sub.value[omask].real
        rows.append({
            "realization": real,
            "stripe_id": sid,
            "gamma_bar": float(sub.gamma_bar[0]),
            "n_members": int(np.count_nonzero(sub.diagonal)),
            "n_diag": int(dvals.size),
            "mean_diag": float(dvals.mean()) if dvals.size else float("nan"),
            "var_diag": float(dvals.var()) if dvals.size > 1 else float("nan"),
            "n_offdiag": int(ovals.size),
            "var_offdiag": float(ovals.var()) if ovals.size > 1 else float("nan"),
        })
    return rows


def scaling_slope(dims, variances):
    """Least-squares slope of ``log(variance)`` against ``log(dim)``."""
    x = np.log(np.asarray(dims, dtype=float))
    y = np.log(np.asarray(variances, dtype=float))
    return float(np.polyfit(x, y, 1)[0])
