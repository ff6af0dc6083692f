import warnings

import numpy as np
import pytest

from liouvillian_eth.ensembles import EnsembleSeed, sample_ginibre, sample_poisson2d
from liouvillian_eth.linalg import eig_nonhermitian
from liouvillian_eth.models import SIGMA, Lindbladian, vectorize
from liouvillian_eth.stripes import (Stripe, StripeSweep, default_d_grid, partition_stripes, select_bulk_stripes,
                                     single_peak, stripe_r, sweep_width)


def test_partition_two_boxes():
    ev = np.array([-1 + 1j, -1 - 1j, -3 + 2j, -3 - 2j])
    stripes = [s for s in partition_stripes(ev, 1.0) if s.n_members]
    assert [s.n_members for s in stripes] == [2, 2]


def test_partition_conserves_count_and_respects_width():
    rng = np.random.default_rng(0)
    ev = rng.standard_normal(500) + 1j * rng.standard_normal(500)
    for d in (0.05, 0.3, 1.7):
        stripes = partition_stripes(ev, d)
        members = np.concatenate([s.member_indices for s in stripes])
        assert np.array_equal(np.sort(members), np.arange(500))
        for s in stripes:
            assert np.all(np.abs(ev.real[s.member_indices] - s.gamma_bar) <= d / 2 + 1e-12)
            assert np.all(np.diff(s.omegas) >= 0)
            np.testing.assert_array_equal(s.omegas, ev.imag[s.member_indices])


def test_partition_damped_qubit_pair():
    gamma, w0 = 1.0, 3.0
    lind = Lindbladian(0.5 * w0 * SIGMA["z"], [(SIGMA["-"], gamma)])
    dec = eig_nonhermitian(vectorize(lind).dense())
    stripes = [s for s in partition_stripes(dec, 0.4 * gamma) if s.n_members]
    pair = [s for s in stripes if s.n_members == 2]
    assert len(pair) == 1
    np.testing.assert_allclose(pair[0].omegas, [-w0, w0], atol=1e-12)


def test_partition_errors_and_wide_stripe():
    with pytest.raises(ValueError):
        partition_stripes([1 + 1j, 2], 0.0)
    with pytest.warns(UserWarning):
        stripes = partition_stripes([0, -1 + 1j, -2], 10.0)
    assert len(stripes) == 1 and stripes[0].n_members == 3


def test_partition_gauge_independence():
    rng = np.random.default_rng(1)
    ev = rng.standard_normal(300) + 1j * rng.standard_normal(300)
    a = partition_stripes(ev, 0.2)
    b = partition_stripes(ev - 7.5, 0.2)
    assert len(a) == len(b)
    for sa, sb in zip(a, b):
        assert np.array_equal(sa.member_indices, sb.member_indices)
        assert sb.gamma_bar == pytest.approx(sa.gamma_bar - 7.5)
    grid = [0.1, 0.2, 0.5]
    np.testing.assert_allclose(sweep_width([ev], grid).mean_r_curve, sweep_width([ev - 7.5], grid).mean_r_curve)


def test_stripe_r_equal_spacing_and_errors():
    s = Stripe(0.0, 1.0, np.arange(5), np.arange(5.0))
    assert stripe_r([s]) == 1.0
    with pytest.raises(ValueError):
        stripe_r([Stripe(0.0, 1.0, np.arange(2), np.arange(2.0))])


def test_stripe_r_poisson_any_width():
    pts = sample_poisson2d(20_000, seed=EnsembleSeed(5))
    for d in (0.002, 0.02, 0.2):
        assert stripe_r(partition_stripes(pts, d)) == pytest.approx(0.386, abs=0.01)


def test_sweep_single_grid_point():
    pts = sample_poisson2d(1000, seed=EnsembleSeed(1))
    sw = sweep_width([pts], [0.1])
    assert sw.d_max == 0.1
    assert sw.r_at_dmax == sw.mean_r_curve[0]


def test_sweep_errors():
    with pytest.raises(ValueError):
        sweep_width([])
    with pytest.raises(ValueError):
        sweep_width([np.array([1j, 2j, 3j])], [-1.0])


def test_sweep_ginibre_peak():
    ev = np.linalg.eigvals(sample_ginibre(600, seed=EnsembleSeed(2)) / np.sqrt(600))
    sw = sweep_width([ev])
    assert sw.r_at_dmax == np.nanmax(sw.mean_r_curve)
    assert sw.r_at_dmax >= 0.48
    assert single_peak(sw)
    assert sw.mean_r_curve[-1] == pytest.approx(0.386, abs=0.03)
    # the chosen width is thin compared with the spectral height
    assert sw.d_max <= 0.1 * (ev.imag.max() - ev.imag.min())


@pytest.mark.parametrize("curve,expected", [
    ([0.386] * 5 + [0.45, 0.5, 0.52, 0.5, 0.45] + [0.386] * 5, True),
    ([0.386] * 3 + [0.5] * 4 + [0.386] * 5 + [0.5] * 4 + [0.386] * 3, False),
])
def test_single_peak_synthetic(curve, expected):
    grid = np.geomspace(0.01, 1, len(curve))
    sw = StripeSweep(grid, np.array(curve), np.zeros(len(curve), int), grid[0], 0.0)
    assert single_peak(sw) is expected


def test_default_grid_brackets_nn_spacing():
    pts = sample_poisson2d(2000, seed=EnsembleSeed(0))
    grid = default_d_grid([pts], n=10)
    assert grid.size == 10
    assert grid[-1] == pytest.approx(pts.real.max() - pts.real.min())
    assert np.all(np.diff(grid) > 0)


def test_select_bulk_stripes():
    rng = np.random.default_rng(3)
    ev = -rng.uniform(0, 4, 400) + 1j * rng.standard_normal(400)
    stripes = partition_stripes(ev, 0.5)
    assert select_bulk_stripes(stripes, min_members=np.inf) == []
    bulk = select_bulk_stripes(stripes, min_members=0)
    nonempty = [s for s in stripes if s.n_members]
    assert len(bulk) == len(nonempty) - 2
    ids = {s.stripe_id for s in bulk}
    assert nonempty[0].stripe_id not in ids and nonempty[-1].stripe_id not in ids
    assert all(s.n_members >= 20 for s in select_bulk_stripes(stripes, 20))


def test_sweep_suppresses_wide_width_warnings():
    pts = sample_poisson2d(100, seed=EnsembleSeed(0))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sweep_width([pts], [0.1, 100.0])
