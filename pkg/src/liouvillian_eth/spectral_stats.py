"""Unfolding-free level statistics for real and complex spectra."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "RatioStats",
    "ComplexRatioStats",
    "POISSON_R",
    "GOE_R",
    "POISSON2D_COS",
    "GINIBRE_COS",
    "dedupe_levels",
    "r_ratio",
    "r_values",
    "complex_spacing_ratios",
    "nearest_neighbours",
    "conjugate_bulk",
]

POISSON_R = 0.386
GOE_R = 0.53
POISSON2D_COS = 0.0
GINIBRE_COS = 0.24

DUPLICATE_TOL = 1e-12


@dataclass
class RatioStats:
    r_values: np.ndarray
    mean_r: float
    sample_count: int
    duplicates_removed: int = 0


@dataclass
class ComplexRatioStats:
    z_values: np.ndarray
    cos_theta_mean: float
    excluded: int = 0
    ties: int = 0

    @property
    def sample_count(self):
        return self.z_values.size

    @property
    def r_mean(self):
        return float(np.abs(self.z_values).mean())


def dedupe_levels(levels, tol=DUPLICATE_TOL):
    """Sorted copy of ``levels`` with near-equal neighbours merged."""
    x = np.sort(np.asarray(levels, dtype=float).ravel())
    if x.size == 0:
        return x
    keep = np.ones(x.size, dtype=bool)
    keep[1:] = np.diff(x) > tol * max(1.0, np.abs(x).max())
    return x[keep]


def r_values(levels, tol=DUPLICATE_TOL):
    """Gap ratios ``min(s_a, s_{a-1}) / max(s_a, s_{a-1})`` of deduplicated levels.

    Returns an empty array for fewer than three distinct levels.
    """
    x = dedupe_levels(levels, tol)
    if x.size < 3:
        return np.empty(0)
    s = np.diff(x)
    lo = np.minimum(s[1:], s[:-1])
    hi = np.maximum(s[1:], s[:-1])
    return lo / hi


def r_ratio(levels, tol=DUPLICATE_TOL):
    levels = np.asarray(levels, dtype=float).ravel()
    r = r_values(levels, tol)
    if r.size == 0:
        raise ValueError("need at least 3 distinct levels")
    removed = levels.size - (r.size + 2)
    return RatioStats(r_values=r, mean_r=float(r.mean()), sample_count=int(r.size),
                      duplicates_removed=int(removed))


def nearest_neighbours(points, k=2):
    """Indices and distances of the ``k`` nearest other points of each point.

    Ties in distance are broken by index.  Returns ``(idx, dist, n_ties)``.
    """
    pts = np.asarray(points, dtype=complex).ravel()
    n = pts.size
    if n <= k:
        raise ValueError(f"need more than {k} points")
    xy = np.column_stack([pts.real, pts.imag])
    kq = min(k + 2, n)
    dist, idx = cKDTree(xy).query(xy, k=kq)
    # drop the query point itself (also when it has exact duplicates)
    self_hit = idx == np.arange(n)[:, None]
    dist = np.where(self_hit, np.inf, dist)
    order = np.lexsort((idx, dist), axis=1)
    dist = np.take_along_axis(dist, order, axis=1)[:, :k]
    idx = np.take_along_axis(idx, order, axis=1)[:, :k]
    ties = int(np.count_nonzero(dist[:, 1:] == dist[:, :-1]))
    return idx, dist, ties


def complex_spacing_ratios(points, subset=None):
    """Complex spacing ratios ``z = (l - l_NN) / (l - l_NNN)`` and ``<cos arg z>``.

    Neighbours are searched among all ``points``; ``subset`` (boolean mask or
    indices) restricts which points contribute a ratio.  Points whose nearest
    neighbour coincides with them are excluded and counted.
    """
    pts = np.asarray(points, dtype=complex).ravel()
    if pts.size < 3:
        raise ValueError("need at least 3 points")
    idx, dist, ties = nearest_neighbours(pts, k=2)
    use = np.ones(pts.size, dtype=bool)
    if subset is not None:
        sel = np.zeros(pts.size, dtype=bool)
        sel[subset] = True
        use &= sel
    degenerate = dist[:, 0] <= 0.0
    excluded = int(np.count_nonzero(degenerate & use))
    use &= ~degenerate
    if not use.any():
        raise ValueError("no points with distinct nearest neighbours")
    p = pts[use]
    z = (p - pts[idx[use, 0]]) / (p - pts[idx[use, 1]])
    return ComplexRatioStats(z_values=z, cos_theta_mean=float(np.cos(np.angle(z)).mean()),
                             excluded=excluded, ties=ties)


def conjugate_bulk(eigenvalues, imag_margin=None, drop_steady=True):
    """Mask of eigenvalues in the open upper half plane, away from the real axis.

    Liouvillian spectra are symmetric under complex conjugation; each
    conjugate pair is represented once and eigenvalues within
    ``imag_margin`` of the real axis (where the mirror image is a spurious
    nearest neighbour) are dropped.  The default margin is the median
    nearest-neighbour distance.
    """
    ev = np.asarray(eigenvalues, dtype=complex)
    if imag_margin is None:
        _, dist, _ = nearest_neighbours(ev, k=1)
        d = dist[:, 0]
        imag_margin = float(np.median(d[d > 0])) if np.any(d > 0) else 0.0
    mask = ev.imag > imag_margin
    if drop_steady:
        mask &= np.abs(ev) > 1e-8 * max(1.0, np.abs(ev).max())
    return mask
