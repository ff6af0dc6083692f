"""Liouvillian stripes and eigenstate thermalization for open quantum systems."""

__version__ = "0.1.0"

from .ensembles import EnsembleSeed, sample_ginibre, sample_gue, sample_poisson2d
from .linalg import EigensolverError, SpectralDecomposition, eig_nonhermitian, hs_inner, vec, unvec
from .models import (Lindbladian, SectorMap, random_liouvillian, supermagnetization_sector, vectorize,
                     xxz_impurity_chain)
from .spectral_stats import complex_spacing_ratios, conjugate_bulk, r_ratio
from .stripes import Stripe, partition_stripes, select_bulk_stripes, stripe_r, sweep_width
from .eth import (SuperOperatorSpec, build_superoperator, diagonal_statistics, matrix_elements,
                  offdiagonal_statistics)
from .dynamics import expectation_series, lindblad_ode, spectral_weights, stripe_dynamics
