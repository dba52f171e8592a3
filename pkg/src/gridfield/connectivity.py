"""Inhibitory connectivity on the periodic neural sheet.

The sheet is the unit torus [-0.5, 0.5)^2 sampled on an n x n grid. Fields and
kernel samples are stored in FFT order: index i holds coordinate
((i/n + 0.5) mod 1) - 0.5, so index 0 is the origin and the DFT of the samples
is exactly the lattice Fourier transform W_hat(k) = sum W(x) exp(-i k.x) dx^2
for k = 2*pi*(k1, k2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

IMAG_TOL = 1e-10

# population order: index, cardinal direction, unit vector (x, y)
BETA_NORTH, BETA_WEST, BETA_SOUTH, BETA_EAST = 0, 1, 2, 3
BETA_UNIT = ((0, 1), (-1, 0), (0, -1), (1, 0))


class SpectralError(ValueError):
    """Kernel spectrum has a non-negligible imaginary part (not even on the grid)."""


@dataclass(frozen=True)
class TorusGrid:
    """n x n periodic grid on [-0.5, 0.5)^2 with spacing dx = 1/n."""

    n: int

    def __post_init__(self):
        if self.n < 4 or self.n % 2:
            raise ValueError(f"grid.n must be even and >= 4, got {self.n}")

    @property
    def dx(self) -> float:
        return 1.0 / self.n

    def coords1d(self) -> np.ndarray:
        """Cell coordinates in FFT order (origin first)."""
        return np.fft.fftfreq(self.n, d=1.0)  # i/n wrapped to [-0.5, 0.5)

    def torus_distance(self) -> np.ndarray:
        """Minimum-image distance of every cell from the origin cell."""
        x = self.coords1d()
        return np.hypot(x[:, None], x[None, :])


@dataclass(frozen=True)
class ShiftSet:
    """Orientation shifts r^beta = z * e_beta for beta = north, west, south, east."""

    grid: TorusGrid
    z_cells: int = 1

    def __post_init__(self):
        if self.z_cells < 0 or self.z_cells >= self.grid.n:
            raise ValueError(f"shift.z_cells out of range: {self.z_cells}")

    @property
    def z(self) -> float:
        return self.z_cells * self.grid.dx

    def translate(self, field: np.ndarray, beta: int) -> np.ndarray:
        """(T_r g)(y) = g(y - r^beta) as an exact cyclic shift; axis 0 is x, axis 1 is y."""
        ex, ey = BETA_UNIT[beta]
        return np.roll(field, (self.z_cells * ex, self.z_cells * ey), axis=(0, 1))


class Kernel:
    """Sampled connectivity W with its integral W0 and real lattice spectrum."""

    def __init__(self, grid: TorusGrid, samples: np.ndarray, params: dict | None = None):
        samples = np.asarray(samples, dtype=float)
        if samples.shape != (grid.n, grid.n):
            raise ValueError(f"samples shape {samples.shape} != grid {(grid.n, grid.n)}")
        self.grid = grid
        self.samples = samples
        self.params = params or {}
        spec = np.fft.fft2(samples) * grid.dx**2
        scale = np.abs(spec).max()
        if scale > 0 and np.abs(spec.imag).max() > IMAG_TOL * scale:
            raise SpectralError(
                f"kernel spectrum max |Im| = {np.abs(spec.imag).max():.3e} exceeds "
                f"{IMAG_TOL:.0e} * max |W_hat| = {IMAG_TOL * scale:.3e}; kernel not even on the grid"
            )
        self.spectral = spec.real.copy()
        self._fft = np.fft.rfft2(samples)  # cached for convolutions
        self.W0 = float(self.spectral[0, 0])

    def what(self, k1: int, k2: int) -> float:
        """W_hat at lattice mode k = 2*pi*(k1, k2)."""
        n = self.grid.n
        return float(self.spectral[k1 % n, k2 % n])


def sample_kernel(grid: TorusGrid, A: float, a: float, b: float) -> Kernel:
    """Sample W(|x|) = -A*(1 + tanh(a - b*|x|)) on the grid (minimum-image |x|)."""
    if not (A > 0 and b > 0):
        raise ValueError("kernel requires A > 0 and b > 0")
    rho = grid.torus_distance()
    samples = -A * (1.0 + np.tanh(a - b * rho))
    support = rho[np.abs(samples) > 1e-12 * A]
    if support.size and support.max() > 0.5:
        raise ValueError(
            f"kernel support radius {support.max():.3f} exceeds half the sheet; "
            "minimum-image sampling is ambiguous"
        )
    return Kernel(grid, samples, params={"A": A, "a": a, "b": b})


def spectral_transform(kernel: Kernel, k_max: int) -> dict[tuple[int, int], float]:
    """Table of W_hat(k) for all lattice modes with |k1|, |k2| <= k_max."""
    if k_max > kernel.grid.n // 2 - 1:
        raise ValueError(f"k_max {k_max} exceeds Nyquist range for n={kernel.grid.n}")
    return {
        (k1, k2): kernel.what(k1, k2)
        for k1 in range(-k_max, k_max + 1)
        for k2 in range(-k_max, k_max + 1)
    }


def shift_factor(k1: float, k2: float, z: float) -> float:
    """sum_beta exp(-i k . r^beta) = 2 cos(2 pi k1 z) + 2 cos(2 pi k2 z)."""
    return 2.0 * np.cos(2.0 * np.pi * k1 * z) + 2.0 * np.cos(2.0 * np.pi * k2 * z)


def convolve_means(kernel: Kernel, shifts: ShiftSet, means: np.ndarray) -> np.ndarray:
    """(1/4) sum_beta (W * T_{r^beta} <f^beta>) as one periodic FFT convolution.

    means: (4, n, n) mean-activity fields. The four shifted convolutions collapse
    into a single one against the sum of pre-shifted fields.
    """
    n = kernel.grid.n
    if means.shape != (4, n, n):
        raise ValueError(f"means shape {means.shape} != (4, {n}, {n})")
    summed = np.zeros((n, n))
    for beta in range(4):
        summed += shifts.translate(means[beta], beta)
    conv = np.fft.irfft2(kernel._fft * np.fft.rfft2(summed), s=(n, n))
    return 0.25 * kernel.grid.dx**2 * conv
