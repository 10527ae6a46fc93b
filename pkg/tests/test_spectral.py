"""Grid, transform, norm, and product layer."""

import numpy as np
import pytest

from kgcharge.spectral import (
    FieldSnapshot,
    GridMismatch,
    ModeArray,
    SizeMismatch,
    SpectralGrid,
    estimate_algebra_constant,
    evaluate_at,
    hermitian_defect,
    pair_modes,
    pointwise_product,
    random_band_limited,
    random_localized_field,
    sobolev_norm,
    to_grid,
    to_modes,
    zero_modes,
)
from oracles import folded_convolution, signed_mode_index


def test_grid_validation():
    with pytest.raises(ValueError):
        SpectralGrid(dim=0)
    with pytest.raises(ValueError):
        SpectralGrid(extent=0.0)
    with pytest.raises(ValueError):
        SpectralGrid(modes=6)
    with pytest.raises(ValueError):
        SpectralGrid(modes=33)
    with pytest.raises(ValueError):
        SpectralGrid(mass=0.0)
    with pytest.raises(ValueError, match="q > n/2"):
        SpectralGrid(sobolev_q=0)


def test_grid_bookkeeping(small_grid):
    g = small_grid
    assert g.shape == (32,)
    assert g.volume == pytest.approx(20.0)
    assert g.spacing == pytest.approx(0.625)
    assert g.dealias_bound == (32 - 1) // 3
    np.testing.assert_array_equal(g.mode_index, signed_mode_index(32))
    # the kept band is symmetric under k -> -k
    mask = g.keep_mask
    np.testing.assert_array_equal(mask, mask[(-np.arange(32)) % 32])


def test_transform_roundtrip(small_grid, rng):
    samples = rng.standard_normal(small_grid.shape)
    back = to_grid(to_modes(small_grid, samples))
    np.testing.assert_allclose(back, samples, atol=1e-12)


def test_transform_scaling_on_a_single_mode(small_grid):
    # With the integral normalization, cos(k1 x) has coefficient V/2 at +-k1.
    x = small_grid.axis_points
    k1 = 2.0 * np.pi / small_grid.extent
    f = to_modes(small_grid, np.cos(k1 * x))
    expected = np.zeros(32, dtype=complex)
    expected[1] = expected[-1] = small_grid.volume / 2.0
    np.testing.assert_allclose(f.values, expected, atol=1e-10)


def test_to_modes_rejects_wrong_shape(small_grid):
    with pytest.raises(SizeMismatch):
        to_modes(small_grid, np.zeros(33))
    with pytest.raises(SizeMismatch):
        ModeArray(small_grid, np.zeros(31, dtype=complex))


def test_pair_modes_is_the_space_integral(small_grid, rng):
    f = random_band_limited(small_grid, rng)
    g = random_band_limited(small_grid, rng)
    # band-limited integrands make the Riemann sum on the grid exact
    direct = small_grid.spacing * (to_grid(f) * to_grid(g)).sum()
    assert complex(pair_modes(f, g)) == pytest.approx(direct, rel=1e-12)


def test_sobolev_norm_closed_form(small_grid):
    x = small_grid.axis_points
    k1 = 4.0 * np.pi / small_grid.extent
    f = to_modes(small_grid, np.cos(k1 * x))
    # ||cos(k x)||_{H^q}^2 = (1 + k^2)^q V / 2
    for q, weight in ((0, 1.0), (1, 1.0 + k1**2), (-1, 1.0 / (1.0 + k1**2))):
        expected = np.sqrt(weight**q if q >= 0 else weight) * np.sqrt(
            small_grid.volume / 2.0
        )
        assert sobolev_norm(f, q) == pytest.approx(expected, rel=1e-12)


def test_sobolev_norm_defaults_to_the_grid_index(small_grid, rng):
    f = random_band_limited(small_grid, rng)
    assert sobolev_norm(f) == sobolev_norm(f, small_grid.sobolev_q)


def test_dual_norm_is_weaker(small_grid, rng):
    f = random_band_limited(small_grid, rng)
    assert sobolev_norm(f, -1) <= sobolev_norm(f, 0) <= sobolev_norm(f, 1)


def test_pointwise_product_matches_folded_convolution(small_grid, rng):
    f = random_band_limited(small_grid, rng)
    g = random_band_limited(small_grid, rng)
    prod = pointwise_product(f, g)
    oracle = folded_convolution(f.values, g.values, small_grid.volume)
    np.testing.assert_allclose(prod.values, oracle, atol=1e-12)


def test_product_of_kept_cosines_is_alias_free(small_grid):
    # k1 + k2 stays inside the kept band, so the product must be exact:
    # cos a cos b = (cos(a+b) + cos(a-b)) / 2.
    x = small_grid.axis_points
    base = 2.0 * np.pi / small_grid.extent
    j1, j2 = 4, 6
    f = to_modes(small_grid, np.cos(j1 * base * x))
    g = to_modes(small_grid, np.cos(j2 * base * x))
    prod = to_grid(pointwise_product(f, g))
    expected = 0.5 * (np.cos((j1 + j2) * base * x) + np.cos((j1 - j2) * base * x))
    np.testing.assert_allclose(prod, expected, atol=1e-12)


def test_product_outside_the_band_is_dropped(small_grid):
    x = small_grid.axis_points
    base = 2.0 * np.pi / small_grid.extent
    j = small_grid.dealias_bound
    f = to_modes(small_grid, np.cos(j * base * x))
    prod = pointwise_product(f, f)
    # 2 j falls outside the kept band; only the zero mode survives
    assert abs(prod.values[2 * j % 32]) < 1e-12
    assert prod.values[0].real == pytest.approx(small_grid.volume / 2.0, rel=1e-12)


def test_hermitian_defect(small_grid, rng):
    f = to_modes(small_grid, rng.standard_normal(small_grid.shape))
    assert hermitian_defect(f) < 1e-12
    broken = f.values.copy()
    broken[3] += 1.0j
    assert hermitian_defect(ModeArray(small_grid, broken, False)) > 0.1


def test_evaluate_at_grid_points_and_off_grid(small_grid, rng):
    f = random_band_limited(small_grid, rng)
    samples = to_grid(f)
    x3 = small_grid.axis_points[3]
    assert evaluate_at(f, x3) == pytest.approx(samples[3], rel=1e-10, abs=1e-12)
    k1 = 2.0 * np.pi / small_grid.extent
    g = to_modes(small_grid, np.cos(k1 * small_grid.axis_points))
    assert evaluate_at(g, 0.3) == pytest.approx(np.cos(k1 * 0.3), abs=1e-10)


def test_random_band_limited_is_band_limited_and_real(small_grid, rng):
    f = random_band_limited(small_grid, rng)
    assert np.all(f.values[~small_grid.keep_mask] == 0.0)
    assert hermitian_defect(f) < 1e-10
    assert f.real_field
    assert not np.iscomplexobj(to_grid(f))


def test_random_localized_field_is_band_limited_and_real(small_grid):
    rng = np.random.default_rng(7)
    f = random_localized_field(small_grid, rng)
    assert np.all(f.values[~small_grid.keep_mask] == 0.0)
    assert hermitian_defect(f) < 1e-10
    g = random_localized_field(small_grid, np.random.default_rng(7))
    np.testing.assert_array_equal(f.values, g.values)


def test_estimate_algebra_constant_contract(small_grid):
    c1 = estimate_algebra_constant(small_grid, trials=60, seed=3)
    c2 = estimate_algebra_constant(small_grid, trials=60, seed=3)
    assert c1 == c2
    assert np.isfinite(c1) and c1 > 0
    one = to_modes(small_grid, np.ones(small_grid.shape))
    floor = sobolev_norm(pointwise_product(one, one)) / sobolev_norm(one) ** 2
    assert c1 >= floor
    with pytest.raises(ValueError):
        estimate_algebra_constant(small_grid, trials=0)


def test_single_mode_pair_is_dominated(small_grid):
    c_q = estimate_algebra_constant(small_grid)
    x = small_grid.axis_points
    base = 2.0 * np.pi / small_grid.extent
    f = to_modes(small_grid, np.cos(3 * base * x))
    g = to_modes(small_grid, np.cos(5 * base * x))
    ratio = sobolev_norm(pointwise_product(f, g)) / (sobolev_norm(f) * sobolev_norm(g))
    assert ratio <= c_q


def test_algebra_constant_dominates_random_pairs(small_grid):
    # the advertised product inequality, on 10^3 fresh pairs
    c_q = estimate_algebra_constant(small_grid)
    rng = np.random.default_rng(915)
    for trial in range(1000):
        draw = random_localized_field if trial % 2 else random_band_limited
        f = draw(small_grid, rng)
        g = draw(small_grid, rng)
        bound = c_q * sobolev_norm(f) * sobolev_norm(g)
        assert sobolev_norm(pointwise_product(f, g)) <= bound


def test_zero_modes(small_grid):
    z = zero_modes(small_grid)
    assert sobolev_norm(z) == 0.0
    assert z.real_field


def test_snapshot_grid_mismatch(small_grid, rng):
    other = SpectralGrid(dim=1, extent=20.0, modes=64, mass=1.0, sobolev_q=1)
    f = random_band_limited(small_grid, rng)
    g = random_band_limited(other, rng)
    with pytest.raises(GridMismatch):
        FieldSnapshot(0.0, f, g)
    with pytest.raises(GridMismatch):
        pair_modes(f, g)
    with pytest.raises(GridMismatch):
        pointwise_product(f, g)
