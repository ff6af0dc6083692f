"""Seeded random-matrix samplers.

Every sampler takes an :class:`EnsembleSeed`; the stream for a given
``(master_seed, realization_index)`` pair is independent of how many other
realizations were drawn before it, so sweeps can run in any order.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["EnsembleSeed", "sample_gue", "sample_ginibre", "sample_poisson2d"]


@dataclass(frozen=True)
class EnsembleSeed:
    master_seed: int = 0
    realization_index: int = 0

    def generator(self, stream=0):
        """Counter-based Philox generator keyed on the seed pair and a stream tag."""
        ss = np.random.SeedSequence(
            entropy=int(self.master_seed) & ((1 << 64) - 1),
            spawn_key=(int(self.realization_index), int(stream)),
        )
        return np.random.Generator(np.random.Philox(ss))


def _rng(seed, stream=0):
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        seed = EnsembleSeed()
    elif isinstance(seed, (int, np.integer)):
        seed = EnsembleSeed(int(seed))
    return seed.generator(stream)


def _complex_normal(rng, shape):
    # unit variance: E|z|^2 = 1
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_gue(dim, seed=None, variance=None):
    """GUE matrix with off-diagonal variance ``E|H_ij|^2 = variance``.

    The default ``variance = 1/dim`` puts the semicircle on ``[-2, 2]``.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if variance is None:
        variance = 1.0 / dim
    rng = _rng(seed, stream=1)
    a = _complex_normal(rng, (dim, dim))
    h = (a + a.conj().T) * np.sqrt(variance / 2.0)
    # exact Hermiticity (diagonal real by construction up to rounding)
    h = 0.5 * (h + h.conj().T)
    np.fill_diagonal(h, h.diagonal().real)
    return h


def sample_ginibre(m, n=None, seed=None):
    """``m x n`` matrix of i.i.d. unit-variance complex Gaussians."""
    n = m if n is None else n
    if m < 1 or n < 1:
        raise ValueError("matrix dimensions must be >= 1")
    rng = _rng(seed, stream=2)
    return _complex_normal(rng, (m, n))


def sample_poisson2d(n, box=(0.0, 1.0, 0.0, 1.0), seed=None):
    """``n`` uniform points in the rectangle ``(x0, x1, y0, y1)`` of the complex plane."""
    if n < 3:
        raise ValueError("need at least 3 points")
    x0, x1, y0, y1 = map(float, box)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate box {box!r}")
    rng = _rng(seed, stream=3)
    x = rng.uniform(x0, x1, n)
    y = rng.uniform(y0, y1, n)
    return x + 1j * y
