"""Experiment pipeline: realizations, decomposition cache and per-analysis reductions.

The functions here are what ``liouvillian-eth run`` executes; they are also
usable directly from Python for custom studies.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import logging
from pathlib import Path

import numpy as np

from .dynamics import (all_up_state, current_operator, envelope, expectation_series, spectral_weights,
                       stripe_dynamics, stripe_weight_sums, DynamicsError)
from .ensembles import EnsembleSeed, sample_ginibre, sample_gue, sample_poisson2d
from .eth import SuperOperatorSpec, build_superoperator, matrix_elements, restrict_to_sector
from .linalg import EigensolverError, SpectralDecomposition, eig_nonhermitian
from .models import (random_liouvillian, site_operator, supermagnetization_sector, vectorize,
                     xxz_impurity_chain)
from .spectral_stats import complex_spacing_ratios, conjugate_bulk, r_ratio
from .stripes import partition_stripes, select_bulk_stripes

__all__ = [
    "ModelInstance",
    "RealizationResult",
    "build_model",
    "compute_realization",
    "run_realizations",
    "load_decomposition",
    "spectrum_statistics",
    "observable_matrix",
    "observable_label",
    "eth_samples",
    "target_stripe",
    "dynamics_summary",
]

log = logging.getLogger(__name__)

LINDBLAD_MODELS = ("random_liouvillian", "xxz_chain")


@dataclass
class ModelInstance:
    """One realization of a model, ready for diagonalization.

    ``kind`` is ``"liouvillian"`` (``matrix`` holds the generator, possibly a
    sector block), ``"hermitian"``, ``"nonhermitian"`` or ``"points"``
    (``matrix`` holds the eigenvalues directly).
    """

    kind: str
    matrix: np.ndarray
    hilbert_dim: int = 0
    n_sites: int = 0
    sector: object = None
    lindbladian: object = None


def build_model(model, params, size, seed):
    if model == "random_liouvillian":
        lind = random_liouvillian(size, int(params["r"]), float(params["beta"]), float(params["g_eff"]),
                                  seed=seed, hamiltonian_variance=float(params["hamiltonian_variance"]))
        return ModelInstance("liouvillian", vectorize(lind).matrix, hilbert_dim=size, lindbladian=lind)
    if model == "xxz_chain":
        rates = {k: float(params[k]) for k in ("gamma1_plus", "gamma1_minus", "gammaN_plus",
                                               "gammaN_minus", "gamma_z")}
        lind = xxz_impurity_chain(size, float(params["J"]), float(params["delta"]), float(params["h"]), **rates)
        block, smap = supermagnetization_sector(vectorize(lind, sparse=True), size, int(params["sector"]))
        return ModelInstance("liouvillian", block.matrix, hilbert_dim=2**size, n_sites=size, sector=smap,
                             lindbladian=lind)
    if model == "gue_reference":
        return ModelInstance("hermitian", sample_gue(size, seed))
    if model == "ginibre_reference":
        return ModelInstance("nonhermitian", sample_ginibre(size, seed=seed))
    if model == "poisson2d_reference":
        return ModelInstance("points", sample_poisson2d(size, tuple(params["box"]), seed))
    raise ValueError(f"unknown model {model!r}")


@dataclass
class RealizationResult:
    variant: str
    size: int
    index: int
    eigenvalues: np.ndarray = None
    cache_path: str = None
    error: str = None
    defective: int = 0
    biorthonormal: bool = True
    meta: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.error is None


def _save_decomposition(path, decomp):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    np.save(path / "eigenvalues.npy", decomp.eigenvalues)
    np.save(path / "right.npy", decomp.right_vectors)
    if decomp.left_vectors is not None:
        np.save(path / "left.npy", decomp.left_vectors)
    np.save(path / "defective.npy", decomp.defective)
    np.save(path / "biorthonormal.npy", np.array(decomp.biorthonormal))


def load_decomposition(path, mmap=True):
    """Read a decomposition written by :func:`compute_realization`."""
    path = Path(path)
    mode = "r" if mmap else None
    left = path / "left.npy"
    return SpectralDecomposition(
        eigenvalues=np.load(path / "eigenvalues.npy"),
        right_vectors=np.load(path / "right.npy", mmap_mode=mode),
        left_vectors=np.load(left, mmap_mode=mode) if left.exists() else None,
        biorthonormal=bool(np.load(path / "biorthonormal.npy")),
        defective=np.load(path / "defective.npy"),
    )


def compute_realization(task):
    """Worker entry point: build, diagonalize and (optionally) cache one realization.

    ``task`` is a dict with keys ``model, params, variant, size, master_seed,
    index, vectors, left, cache_dir``.
    """
    res = RealizationResult(task["variant"], task["size"], task["index"])
    seed = EnsembleSeed(task["master_seed"], task["index"])
    try:
        inst = build_model(task["model"], task["params"], task["size"], seed)
        if inst.kind == "points":
            res.eigenvalues = np.sort_complex(inst.matrix)
        elif inst.kind == "hermitian":
            res.eigenvalues = np.linalg.eigvalsh(inst.matrix).astype(complex)
        elif not task["vectors"]:
            ev = np.linalg.eigvals(inst.matrix)
            res.eigenvalues = ev[np.lexsort((ev.imag, ev.real))]
        else:
            decomp = eig_nonhermitian(inst.matrix, left=task["left"])
            res.eigenvalues = decomp.eigenvalues
            res.defective = int(decomp.defective.sum())
            res.biorthonormal = bool(decomp.biorthonormal)
            if task.get("cache_dir"):
                path = Path(task["cache_dir"]) / f"{task['variant'] or 'base'}_{task['size']}_{task['index']:04d}"
                _save_decomposition(path, decomp)
                res.cache_path = str(path)
        if not np.all(np.isfinite(res.eigenvalues)):
            raise EigensolverError("non-finite eigenvalues")
    except (EigensolverError, np.linalg.LinAlgError, FloatingPointError) as exc:
        res.eigenvalues = None
        res.error = f"{type(exc).__name__}: {exc}"
    return res


def run_realizations(tasks, workers=1):
    """Run tasks on a process pool; results come back in task order."""
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [compute_realization(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(compute_realization, tasks))


def spectrum_statistics(model, eigenvalues):
    """Per-realization summary: ``{n, cos_theta, mean_abs_z, r_mean}`` plus the ratios."""
    ev = np.asarray(eigenvalues)
    if model == "gue_reference":
        rs = r_ratio(ev.real)
        return {"n": int(rs.r_values.size), "r_mean": rs.mean_r}, None
    subset = conjugate_bulk(ev) if model in LINDBLAD_MODELS else None
    cs = complex_spacing_ratios(ev, subset=subset)
    return {"n": int(cs.z_values.size), "cos_theta": cs.cos_theta_mean,
            "mean_abs_z": float(np.abs(cs.z_values).mean()), "excluded": cs.excluded}, cs.z_values


def observable_label(obs):
    if isinstance(obs, dict):
        return f"sigma{obs['pauli']}_{obs['site']}".replace("+", "plus").replace("-", "minus")
    return str(obs)


def observable_matrix(obs, n_sites):
    if obs == "current":
        return current_operator(n_sites)
    return site_operator(n_sites, int(obs["site"]), obs["pauli"])


def _superoperator(kind, obs, inst_dim, n_sites, sector):
    if obs == "x_qubit":
        spec = SuperOperatorSpec(kind, "x_qubit", dim=inst_dim)
    elif isinstance(obs, dict):
        spec = SuperOperatorSpec(kind, (int(obs["site"]), obs["pauli"]), n_sites=n_sites)
    else:
        spec = SuperOperatorSpec(kind, observable_matrix(obs, n_sites))
    sup = build_superoperator(spec, sparse=True)
    if sector is not None:
        # matrix elements only pair sector vectors, so the compressed block is exact
        return restrict_to_sector(sup, sector, compress=True)
    return sup


def eth_samples(decomp, stripes, kind, observable, hilbert_dim, n_sites=0, sector=None,
                biorthogonal=False, realization=0, keep=None):
    """Matrix elements of one probe superoperator over the given stripes.

    ``keep`` is an optional callable mapping the sample set to a boolean mask;
    only kept samples are returned (to bound memory across realizations).
    """
    sup = _superoperator(kind, observable, hilbert_dim, n_sites, sector)
    samples = matrix_elements(sup, decomp, stripes, biorthogonal=biorthogonal, realization=realization)
    if keep is not None:
        samples = samples.select(keep(samples))
    return samples


def target_stripe(stripes, eigenvalues):
    """Bulk stripe whose centre is closest to the median decay rate of the spectrum."""
    if not stripes:
        raise ValueError("no bulk stripes")
    med = float(np.median(np.asarray(eigenvalues).real))
    return min(stripes, key=lambda s: (abs(s.gamma_bar - med), s.stripe_id))


def dynamics_summary(decomp, sector, n_sites, observable, times, d_max, min_members=3,
                     weight_threshold=1e-10):
    """Spectral weights, full and stripe dynamics of one observable from the all-up state.

    Returns a dict with the weight sums over bulk stripes, the full series,
    the stripe series on :func:`target_stripe`, and scalar diagnostics.
    """
    obs = observable_matrix(observable, n_sites)
    exp = spectral_weights(decomp, obs, all_up_state(n_sites), sector=sector,
                           observable_label=observable_label(observable), initial_state_label="all_up")
    stripes = partition_stripes(decomp, d_max)
    bulk = select_bulk_stripes(stripes, min_members)
    sums = stripe_weight_sums(exp, bulk)
    target = target_stripe(bulk, decomp.eigenvalues)
    times = np.asarray(times, dtype=float)
    series = expectation_series(exp, times)
    w = np.abs(exp.weights[target.member_indices])
    try:
        sdyn = stripe_dynamics(exp, target, times)
        env0 = envelope(sdyn, times, 1.0)
        env20 = envelope(sdyn, times, 20.0) if times[-1] >= 19.0 else float("nan")
    except DynamicsError:
        sdyn = np.zeros(times.size, dtype=complex)
        env0 = env20 = float("nan")
    med = float(np.median(decomp.eigenvalues.real))
    deep = [s for g, s in sums if g < med]
    return {
        "weight_sums": sums,
        "series": series,
        "stripe_series": sdyn,
        "target_gamma_bar": target.gamma_bar,
        "target_members": target.n_members,
        "n_weights_above": int(np.count_nonzero(w > weight_threshold)),
        "fraction_above": float(np.mean(w > weight_threshold)) if w.size else float("nan"),
        "envelope_initial": env0,
        "envelope_t20": env20,
        "max_deep_bulk_sum": float(max(deep)) if deep else float("nan"),
        "n_bulk_stripes": len(bulk),
        "absent_pairs": exp.n_absent,
    }
