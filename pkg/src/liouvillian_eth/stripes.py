"""Liouvillian stripes: vertical boxes of a complex spectrum and their width sweep."""

from dataclasses import dataclass
import logging
import warnings

import numpy as np

from .linalg import SpectralDecomposition
from .spectral_stats import nearest_neighbours, r_values

__all__ = [
    "Stripe",
    "StripeSweep",
    "partition_stripes",
    "stripe_r",
    "stripe_r_values",
    "sweep_width",
    "default_d_grid",
    "select_bulk_stripes",
    "single_peak",
]

log = logging.getLogger(__name__)

# lower end of the default width grid, in units of the median NN distance;
# the <r> maximum sits below one NN distance
NN_FRACTION = 0.05


@dataclass
class Stripe:
    """Eigenvalues with ``|Re(lambda) - gamma_bar| <= width / 2``.

    ``member_indices`` and ``omegas`` are aligned and sorted by ``omegas``.
    """

    gamma_bar: float
    width: float
    member_indices: np.ndarray
    omegas: np.ndarray
    stripe_id: int = 0

    @property
    def n_members(self):
        return int(self.member_indices.size)

    def mean_r(self):
        r = r_values(self.omegas)
        return float(r.mean()) if r.size else float("nan")


@dataclass
class StripeSweep:
    d_grid: np.ndarray
    mean_r_curve: np.ndarray
    sample_counts: np.ndarray
    d_max: float
    r_at_dmax: float


def _eigenvalues(spectrum):
    if isinstance(spectrum, SpectralDecomposition):
        return spectrum.eigenvalues
    return np.asarray(spectrum, dtype=complex).ravel()


def partition_stripes(spectrum, d):
    """Tile ``[min Re, max Re]`` with boxes of width ``d`` starting at the minimum.

    Every eigenvalue lands in exactly one box (the maximum goes into the last
    box).  Empty boxes are kept so stripe ids map to fixed decay rates.
    """
    if not d > 0:
        raise ValueError(f"stripe width must be positive, got {d}")
    ev = _eigenvalues(spectrum)
    if ev.size == 0:
        raise ValueError("empty spectrum")
    gam = ev.real
    g0 = gam.min()
    span = gam.max() - g0
    if d > span:
        warnings.warn(f"stripe width {d:.4g} exceeds spectral width {span:.4g}; single stripe", stacklevel=2)
        n_box = 1
    else:
        n_box = max(int(np.ceil(span / d)), 1)
    box = np.minimum(np.floor((gam - g0) / d).astype(np.int64), n_box - 1)
    order = np.argsort(box, kind="stable")
    bounds = np.searchsorted(box[order], np.arange(n_box + 1))
    stripes = []
    for k in range(n_box):
        members = order[bounds[k]:bounds[k + 1]]
        om = ev.imag[members]
        srt = np.argsort(om, kind="stable")
        stripes.append(Stripe(gamma_bar=float(g0 + (k + 0.5) * d), width=float(d),
                              member_indices=members[srt], omegas=om[srt], stripe_id=k))
    return stripes


def stripe_r_values(stripes):
    vals = [r_values(s.omegas) for s in stripes if s.n_members >= 3]
    return np.concatenate(vals) if vals else np.empty(0)


def stripe_r(stripes):
    """Mean gap ratio of stripe energies, pooled over stripes with at least 3 members."""
    r = stripe_r_values(stripes)
    if r.size == 0:
        raise ValueError("no stripe has at least 3 members")
    return float(r.mean())


def default_d_grid(spectra, n=40):
    """Log-spaced widths from 1/20 of the median nearest-neighbour distance to the full width."""
    spectra = [_eigenvalues(s) for s in spectra]
    nn = []
    width = 0.0
    for ev in spectra:
        _, dist, _ = nearest_neighbours(ev, k=1)
        d = dist[:, 0]
        nn.append(d[d > 0])
        width = max(width, ev.real.max() - ev.real.min())
    lo = NN_FRACTION * float(np.median(np.concatenate(nn)))
    if not width > lo:
        return np.array([max(width, lo)])
    return np.geomspace(lo, width, n)


def sweep_width(spectra, d_grid=None):
    """Disorder- and stripe-pooled ``<r>`` as a function of stripe width."""
    spectra = list(spectra)
    if not spectra:
        raise ValueError("empty list of spectra")
    if d_grid is None:
        d_grid = default_d_grid(spectra)
    d_grid = np.atleast_1d(np.asarray(d_grid, dtype=float))
    if d_grid.size == 0 or np.any(d_grid <= 0):
        raise ValueError("d_grid must contain positive widths")
    curve = np.full(d_grid.size, np.nan)
    counts = np.zeros(d_grid.size, dtype=np.int64)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for i, d in enumerate(d_grid):
            pooled = [stripe_r_values(partition_stripes(s, d)) for s in spectra]
            r = np.concatenate(pooled)
            counts[i] = r.size
            if r.size:
                curve[i] = r.mean()
    if np.all(np.isnan(curve)):
        raise ValueError("no width produced a stripe with at least 3 members")
    k = int(np.nanargmax(curve))
    return StripeSweep(d_grid=d_grid, mean_r_curve=curve, sample_counts=counts,
                       d_max=float(d_grid[k]), r_at_dmax=float(curve[k]))


def single_peak(sweep, level=None, smooth=5):
    """True when the smoothed curve exceeds ``level`` on one contiguous run of widths.

    The curve is averaged over ``smooth`` neighbouring grid points first, which
    suppresses sampling noise at thin widths. ``level`` defaults to halfway
    between the Poisson value and the smoothed peak.
    """
    from scipy.ndimage import uniform_filter1d

    from .spectral_stats import POISSON_R

    curve = np.asarray(sweep.mean_r_curve, dtype=float)
    finite = np.isfinite(curve)
    if smooth > 1 and finite.any():
        filled = np.where(finite, curve, np.nanmean(curve))
        curve = np.where(finite, uniform_filter1d(filled, min(smooth, curve.size), mode="nearest"), np.nan)
    if level is None:
        level = 0.5 * (POISSON_R + np.nanmax(curve))
    above = np.nan_to_num(curve, nan=-np.inf) > level
    runs = np.count_nonzero(np.diff(above.astype(int)) == 1) + int(above[0])
    return runs == 1


def select_bulk_stripes(stripes, min_members=3):
    """Stripes with at least ``min_members`` members, minus the two edge boxes.

    The boxes holding the smallest and largest decay rate (spectral edge and
    the steady-state box) are always dropped.
    """
    nonempty = [s for s in stripes if s.n_members > 0]
    if len(nonempty) <= 2:
        return []
    lo = min(nonempty, key=lambda s: s.gamma_bar).stripe_id
    hi = max(nonempty, key=lambda s: s.gamma_bar).stripe_id
    return [s for s in nonempty if s.stripe_id not in (lo, hi) and s.n_members >= min_members]
