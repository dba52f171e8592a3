import numpy as np
import pytest

from gridfield.connectivity import (Kernel, ShiftSet, SpectralError, TorusGrid,
                                    convolve_means, sample_kernel, shift_factor,
                                    spectral_transform)
from oracles import ball_indicator_transform, direct_convolve_means

KERNEL_AMP = 0.005 * 128**2


def reference_kernel(n=64):
    return sample_kernel(TorusGrid(n), KERNEL_AMP, 10.0, 50.0)


def test_grid_validation():
    with pytest.raises(ValueError):
        TorusGrid(3)
    with pytest.raises(ValueError):
        TorusGrid(7)


def test_grid_coords_contain_origin():
    grid = TorusGrid(8)
    x = grid.coords1d()
    assert x[0] == 0.0
    assert x.min() == -0.5
    assert x.max() == 0.5 - grid.dx


def test_w0_matches_reference_value():
    kernel = reference_kernel(64)
    assert kernel.W0 == pytest.approx(-20.6711, abs=0.15)


def test_kernel_at_origin():
    A, a = 3.0, 2.0
    kernel = sample_kernel(TorusGrid(16), A, a, 40.0)
    assert kernel.samples[0, 0] == pytest.approx(-A * (1.0 + np.tanh(a)), rel=1e-14)


def test_kernel_inhibitory_and_even():
    kernel = reference_kernel(32)
    assert (kernel.samples <= 0).all()
    # evenness under index negation (FFT ordering): W[i,j] = W[-i mod n, j] = W[i, -j mod n]
    s = kernel.samples
    assert np.allclose(s, np.roll(s[::-1, :], 1, axis=0), atol=1e-15)
    assert np.allclose(s, np.roll(s[:, ::-1], 1, axis=1), atol=1e-15)


def test_kernel_support_guard():
    with pytest.raises(ValueError):
        sample_kernel(TorusGrid(32), 1.0, 10.0, 12.0)  # support reaches past 0.5


def test_zero_mode_equals_integral():
    kernel = reference_kernel(32)
    assert kernel.what(0, 0) == pytest.approx(kernel.samples.sum() * kernel.grid.dx**2,
                                              rel=1e-12)


def test_spectral_table_bounds_and_symmetry():
    kernel = reference_kernel(32)
    table = spectral_transform(kernel, 5)
    assert len(table) == 11 * 11
    for (k1, k2), v in table.items():
        assert v == pytest.approx(table[(-k1, k2)], abs=1e-12)
        assert v == pytest.approx(table[(k1, -k2)], abs=1e-12)
    with pytest.raises(ValueError):
        spectral_transform(kernel, 16)


def test_spectral_error_on_uneven_kernel():
    grid = TorusGrid(16)
    samples = np.zeros((16, 16))
    samples[3, 5] = -1.0  # no mirror partner
    with pytest.raises(SpectralError):
        Kernel(grid, samples)


def test_ball_indicator_against_bessel_quadrature():
    n = 128
    grid = TorusGrid(n)
    rho = grid.torus_distance()
    r = 0.2
    kernel = Kernel(grid, (rho <= r).astype(float))
    tol = 2.0 * grid.dx * abs(kernel.spectral).max()
    for k1, k2 in [(0, 0), (1, 0), (2, 1), (3, 3), (5, 0), (4, 3)]:
        kmag = 2.0 * np.pi * np.hypot(k1, k2)
        ref = ball_indicator_transform(r, kmag)
        assert kernel.what(k1, k2) == pytest.approx(ref, abs=tol)


def test_bessel_closed_form_matches_quadrature():
    # sanity of the oracle itself: 2 pi r J1(r|k|)/|k| (note the factor r)
    from scipy.special import j1
    r = 0.2
    for kmag in (2.0 * np.pi, 10.0, 25.0):
        assert ball_indicator_transform(r, kmag) == pytest.approx(
            2.0 * np.pi * r * j1(r * kmag) / kmag, rel=1e-9)


def test_constant_kernel_spectrum():
    grid = TorusGrid(16)
    kernel = Kernel(grid, np.full((16, 16), -2.5))
    assert kernel.what(0, 0) == pytest.approx(-2.5, rel=1e-12)
    for k in [(1, 0), (0, 3), (2, 2)]:
        assert abs(kernel.what(*k)) < 1e-12


def test_parseval():
    kernel = reference_kernel(32)
    lhs = (kernel.spectral**2).sum()
    rhs = (kernel.samples**2).sum() * kernel.grid.dx**2
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_shift_factor_values():
    assert shift_factor(0, 0, 0.37) == pytest.approx(4.0)
    assert shift_factor(4, 0, 1.0 / 64.0) == pytest.approx(2.0 * np.cos(np.pi / 8.0) + 2.0,
                                                           rel=1e-12)
    assert shift_factor(2, 2, 0.25) == pytest.approx(-4.0)


def test_shift_factor_bounded():
    rng = np.random.default_rng(0)
    for _ in range(200):
        k1, k2 = rng.integers(-10, 11, size=2)
        z = rng.uniform(0.0, 0.5)
        assert abs(shift_factor(k1, k2, z)) <= 4.0 + 1e-12


def test_convolution_constant_means():
    kernel = reference_kernel(32)
    shifts = ShiftSet(kernel.grid, 1)
    means = np.full((4, 32, 32), 0.7)
    out = convolve_means(kernel, shifts, means)
    assert np.allclose(out, kernel.W0 * 0.7, rtol=1e-12)


def test_convolution_against_direct_sum():
    n = 16
    grid = TorusGrid(n)
    kernel = sample_kernel(grid, 2.0, 3.0, 40.0)
    shifts = ShiftSet(grid, 1)
    rng = np.random.default_rng(1)
    means = rng.uniform(0.0, 1.0, size=(4, n, n))
    fast = convolve_means(kernel, shifts, means)
    slow = direct_convolve_means(kernel, shifts, means)
    assert np.abs(fast - slow).max() <= 1e-10 * np.abs(slow).max()


def test_convolution_single_site_shifted_copy():
    n = 16
    grid = TorusGrid(n)
    kernel = sample_kernel(grid, 2.0, 3.0, 40.0)
    shifts = ShiftSet(grid, 2)
    means = np.zeros((4, n, n))
    means[0, 3, 4] = 1.0  # north population only
    fast = convolve_means(kernel, shifts, means)
    slow = direct_convolve_means(kernel, shifts, means)
    assert np.abs(fast - slow).max() <= 1e-12 * np.abs(slow).max()
    # mass at one cell of the north field: a quarter kernel copy centered at
    # the shifted source position
    expect_center = np.unravel_index(np.argmin(fast), fast.shape)
    assert expect_center == (3, (4 + 2) % n)


def test_convolution_linearity():
    n = 16
    grid = TorusGrid(n)
    kernel = sample_kernel(grid, 2.0, 3.0, 40.0)
    shifts = ShiftSet(grid, 1)
    rng = np.random.default_rng(2)
    m1 = rng.uniform(size=(4, n, n))
    m2 = rng.uniform(size=(4, n, n))
    lhs = convolve_means(kernel, shifts, 2.0 * m1 + 3.0 * m2)
    rhs = 2.0 * convolve_means(kernel, shifts, m1) + 3.0 * convolve_means(kernel, shifts, m2)
    assert np.abs(lhs - rhs).max() <= 1e-12


def test_shiftset_translate_directions():
    grid = TorusGrid(8)
    shifts = ShiftSet(grid, 1)
    g = np.zeros((8, 8))
    g[2, 3] = 1.0
    # north: T g (y) = g(y - z), content moves +1 cell in y
    assert shifts.translate(g, 0)[2, 4] == 1.0
    assert shifts.translate(g, 1)[1, 3] == 1.0  # west
    assert shifts.translate(g, 2)[2, 2] == 1.0  # south
    assert shifts.translate(g, 3)[3, 3] == 1.0  # east
