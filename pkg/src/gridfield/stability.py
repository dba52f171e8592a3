"""Linear stability of the homogeneous state: dispersion quantity and thresholds.

The mode-wise amplification factor on the lattice k = 2*pi*(k1, k2) is

    F(k) = (1/4) Phi0' W_hat(k) [2 cos(2 pi k1 z) + 2 cos(2 pi k2 z)],

with Phi0' evaluated at the stationary operating point. Without noise the
homogeneous state is linearly stable iff max_k F(k) < 1; with noise the
condition sharpens to F(k) < sigma / M_inf for all k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activation import Activation, derivative, evaluate
from .connectivity import Kernel, ShiftSet, TorusGrid, shift_factor
from .homogeneous import HomogeneousState, solve_stationary


class NoCrossingError(RuntimeError):
    """The stability indicator does not change sign on the scanned range."""


class MultipleCrossingError(RuntimeError):
    """More than one sign change detected; all crossing intervals are reported."""


@dataclass(frozen=True)
class DispersionTable:
    """F(k) over the lattice |k1|, |k2| <= k_max, plus its ingredients."""

    k1: np.ndarray
    k2: np.ndarray
    what: np.ndarray
    shift: np.ndarray
    F: np.ndarray
    phi0_prime: float
    sigma: float
    k_max: int
    z: float

    def lookup(self, k1: int, k2: int) -> float:
        size = 2 * self.k_max + 1
        idx = (k1 + self.k_max) * size + (k2 + self.k_max)
        return float(self.F[idx])


def dispersion_from_phi0p(kernel: Kernel, z: float, phi0_prime: float, k_max: int,
                          sigma: float = float("nan")) -> DispersionTable:
    """Dispersion table with an explicitly frozen Phi0'."""
    if k_max > kernel.grid.n // 2 - 1:
        raise ValueError(f"k_max {k_max} exceeds the lattice range for n={kernel.grid.n}")
    ks = np.arange(-k_max, k_max + 1)
    k1, k2 = np.meshgrid(ks, ks, indexing="ij")
    k1 = k1.ravel()
    k2 = k2.ravel()
    what = np.array([kernel.what(a, b) for a, b in zip(k1, k2)])
    shift = shift_factor(k1.astype(float), k2.astype(float), z)
    F = 0.25 * phi0_prime * what * shift
    return DispersionTable(k1=k1, k2=k2, what=what, shift=shift, F=F,
                           phi0_prime=phi0_prime, sigma=sigma, k_max=k_max, z=z)


def dispersion(kernel: Kernel, shifts: ShiftSet, hom: HomogeneousState,
               k_max: int = 10) -> DispersionTable:
    """Dispersion table at the solved operating point of hom."""
    phi0p = derivative(hom.activation, hom.w0 * hom.mean + hom.b)
    return dispersion_from_phi0p(kernel, shifts.z, phi0p, k_max, sigma=hom.sigma)


def dominant_modes(table: DispersionTable, rtol: float = 1e-6) -> list[tuple[int, int]]:
    """Full tie set of argmax F (never a single representative)."""
    fmax = table.F.max()
    tol = rtol * max(abs(fmax), 1e-300)
    idx = np.flatnonzero(table.F >= fmax - tol)
    return [(int(table.k1[i]), int(table.k2[i])) for i in idx]


def zero_noise_mean(activation: Activation, W0: float, B: float) -> float:
    """Fixed point m = Phi(W0 m + B) of the zero-noise consistency relation."""
    if W0 > 0:
        raise ValueError(f"W0 must be <= 0, got {W0}")
    lo, hi = 0.0, evaluate(activation, B) + 1e-9
    if evaluate(activation, B) - 0.0 <= 0.0:
        return 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if evaluate(activation, W0 * mid + B) - mid > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def zero_noise_stable(table: DispersionTable) -> tuple[bool, tuple[int, int]]:
    """True iff max_k F(k) < 1 (strict); returns the maximising mode as well."""
    i = int(np.argmax(table.F))
    worst = (int(table.k1[i]), int(table.k2[i]))
    return bool(table.F[i] < 1.0), worst


def linearized_growth_rate(k: tuple[int, int], table: DispersionTable, tau: float) -> float:
    """Growth rate lambda = (F(k) - 1) / tau of the linearised mean dynamics."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    return (table.lookup(*k) - 1.0) / tau


def stability_indicator(kernel: Kernel, shifts: ShiftSet, activation: Activation,
                        W0: float, B: float, sigma: float, k_max: int = 10) -> float:
    """max_k F(k) * M_inf(sigma) / sigma - 1; negative means linearly stable."""
    hom = solve_stationary(activation, W0, B, sigma)
    table = dispersion(kernel, shifts, hom, k_max)
    fmax = float(table.F.max())
    if fmax <= 0.0:
        return -1.0
    return fmax * hom.m_inf / sigma - 1.0


def critical_sigma(kernel: Kernel, shifts: ShiftSet, activation: Activation,
                   W0: float, B: float, sigma_range: tuple[float, float],
                   tol: float = 1e-6, k_max: int = 10, scan_points: int = 200) -> float:
    """Noise threshold where max_k F(k) M_inf/sigma crosses 1, scan then bisect.

    Monotonicity of the indicator in sigma is not guaranteed, hence the scan;
    multiple crossings raise with all bracketing intervals reported.
    """
    lo, hi = sigma_range
    if not 0 < lo < hi:
        raise ValueError(f"invalid sigma_range {sigma_range}")
    sigmas = np.linspace(lo, hi, scan_points)
    vals = np.array([stability_indicator(kernel, shifts, activation, W0, B, s, k_max)
                     for s in sigmas])
    sign_change = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)
    if len(sign_change) == 0:
        raise NoCrossingError(
            f"stability indicator has one sign on [{lo:.4g}, {hi:.4g}] "
            f"(endpoints {vals[0]:.4g}, {vals[-1]:.4g})"
        )
    if len(sign_change) > 1:
        brackets = [(float(sigmas[i]), float(sigmas[i + 1])) for i in sign_change]
        raise MultipleCrossingError(f"multiple indicator crossings: {brackets}")
    i = sign_change[0]
    a, b = float(sigmas[i]), float(sigmas[i + 1])
    fa = vals[i]
    while b - a > tol:
        mid = 0.5 * (a + b)
        fm = stability_indicator(kernel, shifts, activation, W0, B, mid, k_max)
        if np.sign(fm) == np.sign(fa):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


def mode_pattern(modes, weights, grid: TorusGrid) -> np.ndarray:
    """sum_i w_i cos(k_i . x) sampled on the grid (FFT cell ordering)."""
    x = grid.coords1d()
    field = np.zeros((grid.n, grid.n))
    for (k1, k2), w in zip(modes, weights):
        field += w * np.cos(2.0 * np.pi * (k1 * x[:, None] + k2 * x[None, :]))
    return field
