"""Dense complex linear algebra shared by every other module.

Operators are plain ``numpy`` complex arrays.  Vectorization is row-major
(``X.reshape(-1)``), which gives ``vec(A X B) = kron(A, B.T) @ vec(X)``.
"""

from dataclasses import dataclass, field
import logging

import numpy as np
import scipy.linalg as sla

__all__ = [
    "EigensolverError",
    "SpectralDecomposition",
    "as_complex_matrix",
    "vec",
    "unvec",
    "hs_inner",
    "kron",
    "eig_nonhermitian",
    "sort_spectrum",
    "DEFECT_THRESHOLD",
    "MAX_KRON_DIM",
]

log = logging.getLogger(__name__)

# |<sigma|eta>| of unit vectors below this marks a (near-)defective eigenpair.
DEFECT_THRESHOLD = 1e-10
BIORTHO_TOL = 1e-8
MAX_KRON_DIM = 1 << 15


class EigensolverError(RuntimeError):
    pass


def as_complex_matrix(a, square=False, name="matrix"):
    """Validate and convert ``a`` to a 2D complex128 array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {m.shape}")
    if square and m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return m


def vec(x):
    return np.asarray(x).reshape(-1)


def unvec(v, dim=None):
    v = np.asarray(v)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    if dim * dim != v.size:
        raise ValueError(f"cannot reshape vector of length {v.size} into a square operator")
    return v.reshape(dim, dim)


def hs_inner(a, b):
    """Hilbert-Schmidt inner product ``Tr[a^dagger b]``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def kron(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    if max(rows, cols) > MAX_KRON_DIM:
        raise ValueError(f"Kronecker product of size {rows}x{cols} exceeds {MAX_KRON_DIM}")
    return np.kron(a, b)


def sort_spectrum(eigenvalues):
    """Indices ordering eigenvalues by real part, then imaginary part."""
    ev = np.asarray(eigenvalues)
    return np.lexsort((ev.imag, ev.real))


@dataclass
class SpectralDecomposition:
    """Eigenvalues with paired right and (optionally) left eigenvectors.

    Columns of ``right_vectors`` have unit Hilbert-Schmidt norm.  When
    ``biorthonormal`` is set, ``left_vectors[:, a].conj() @ right_vectors[:, b]``
    equals ``delta_ab`` for every non-defective pair.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray | None = None
    left_vectors: np.ndarray | None = None
    biorthonormal: bool = False
    condition_estimates: np.ndarray | None = None
    defective: np.ndarray = field(default=None)
    ambiguous_pairs: int = 0

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=np.complex128)
        if self.defective is None:
            self.defective = np.zeros(self.eigenvalues.size, dtype=bool)

    @property
    def dim(self):
        return self.eigenvalues.size

    @property
    def gammas(self):
        return self.eigenvalues.real

    @property
    def omegas(self):
        return self.eigenvalues.imag

    @property
    def has_vectors(self):
        return self.right_vectors is not None

    def shifted(self, shift):
        """Copy with every eigenvalue moved by the complex constant ``shift``."""
        return SpectralDecomposition(
            eigenvalues=self.eigenvalues + shift,
            right_vectors=self.right_vectors,
            left_vectors=self.left_vectors,
            biorthonormal=self.biorthonormal,
            condition_estimates=self.condition_estimates,
            defective=self.defective,
            ambiguous_pairs=self.ambiguous_pairs,
        )

    def gram(self):
        if self.left_vectors is None:
            raise ValueError("decomposition carries no left vectors")
        return self.left_vectors.conj().T @ self.right_vectors


def _clusters(eigenvalues, tol):
    """Group indices of (numerically) equal eigenvalues.

    ``eigenvalues`` must already be sorted by real part.
    """
    n = eigenvalues.size
    clusters = []
    start = 0
    re = eigenvalues.real
    while start < n:
        stop = start + 1
        while stop < n and re[stop] - re[start] <= tol:
            stop += 1
        block = list(range(start, stop))
        # split the real-part window by imaginary part
        while block:
            seed = block[0]
            members = [k for k in block if abs(eigenvalues[k] - eigenvalues[seed]) <= tol]
            clusters.append(members)
            block = [k for k in block if k not in members]
        start = stop
    return clusters


def eig_nonhermitian(m, left=True, degeneracy_tol=1e-9):
    """Full eigendecomposition of a general complex square matrix.

    Parameters
    ----------
    m : array_like
        Square matrix with finite entries.
    left : bool
        Also compute left eigenvectors and biorthonormalize them against the
        right ones.  Costs roughly twice as much as right vectors alone.
    degeneracy_tol : float
        Relative distance (in units of the spectral radius) under which two
        eigenvalues are treated as one degenerate cluster.

    Returns
    -------
    SpectralDecomposition
        Sorted by ascending real part, then imaginary part.
    """
    m = as_complex_matrix(m, square=True)
    n = m.shape[0]
    try:
        if left:
            w, vl, vr = sla.eig(m, left=True, right=True, check_finite=False)
        else:
            w, vr = sla.eig(m, check_finite=False)
            vl = None
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverError(f"eigensolver did not converge: {exc}") from exc

    order = sort_spectrum(w)
    w = w[order]
    vr = vr[:, order]
    vr = vr / np.linalg.norm(vr, axis=0)
    if vl is None:
        return SpectralDecomposition(eigenvalues=w, right_vectors=vr)

    vl = vl[:, order]
    vl = vl / np.linalg.norm(vl, axis=0)
    raw_overlap = np.einsum("ij,ij->j", vl.conj(), vr)
    cond = 1.0 / np.maximum(np.abs(raw_overlap), np.finfo(float).tiny)
    defective = np.abs(raw_overlap) < DEFECT_THRESHOLD

    scale = max(np.abs(w).max(initial=0.0), 1.0)
    ambiguous = 0
    for members in _clusters(w, degeneracy_tol * scale):
        idx = np.array(members)
        if len(idx) == 1:
            a = idx[0]
            if not defective[a]:
                vl[:, a] = vl[:, a] / np.conj(raw_overlap[a])
            continue
        ambiguous += len(idx) - 1
        block = vl[:, idx].conj().T @ vr[:, idx]
        sv = np.linalg.svd(block, compute_uv=False)
        if sv[-1] < DEFECT_THRESHOLD:
            defective[idx] = True
            cond[idx] = 1.0 / max(sv[-1], np.finfo(float).tiny)
            continue
        defective[idx] = False
        cond[idx] = 1.0 / sv[-1]
        # left block -> left block @ inv(G)^H makes the cluster Gram matrix the identity
        vl[:, idx] = vl[:, idx] @ np.linalg.inv(block).conj().T

    ok = ~defective
    biortho = False
    if ok.any():
        gram = vl[:, ok].conj().T @ vr[:, ok]
        err = np.abs(gram - np.eye(int(ok.sum()))).max()
        biortho = bool(err <= BIORTHO_TOL)
        if not biortho:
            log.warning("biorthonormalization residual %.3e exceeds %.1e", err, BIORTHO_TOL)
    if defective.any():
        log.warning("%d eigenpairs flagged as (near-)defective", int(defective.sum()))
    if ambiguous:
        log.debug("%d eigenvalues share a degenerate cluster", ambiguous)

    return SpectralDecomposition(
        eigenvalues=w,
        right_vectors=vr,
        left_vectors=vl,
        biorthonormal=biortho,
        condition_estimates=cond,
        defective=defective,
        ambiguous_pairs=ambiguous,
    )
