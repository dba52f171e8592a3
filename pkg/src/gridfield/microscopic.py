"""Reflected interacting particle system: the microscopic oracle for the PDE.

NM neurons stacked in N columns per population; each activity follows

    s <- s + (dt/tau) (Phi(arg) - s) + sqrt(2 sigma dt / tau) xi,   s <- |s|,

where arg couples empirical column means through the same discrete kernel
convolution as the mean-field solver. Reflection at zero realises the
boundary local time to first order; the local time itself is not tracked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activation import Activation, evaluate
from .connectivity import Kernel, ShiftSet, TorusGrid, convolve_means


@dataclass
class ParticleParams:
    tau: float = 10.0
    sigma: float = 0.03
    B: float = 3.0


class ParticleEnsemble:
    """Activity values s[beta, column, particle].

    Two layouts: a sheet ensemble (grid given, one column per grid cell,
    coupled through the kernel convolution) and the homogeneous all-to-all
    ensemble (grid None, a single column per population, coupled through the
    scalar integral W0 times the global mean).

    Noise is drawn from per-worker child streams of the base seed
    (SeedSequence.spawn), so results are reproducible given (seed, workers).
    """

    def __init__(self, M: int, seed: int, grid: TorusGrid | None = None,
                 W0: float = 0.0, s0: float = 0.0, workers: int = 1):
        self.grid = grid
        self.M = M
        self.W0 = W0
        ncols = grid.n * grid.n if grid is not None else 1
        self.s = np.full((4, ncols, M), float(s0))
        self.t = 0.0
        if not workers >= 1:
            raise ValueError("workers must be >= 1")
        self.workers = workers
        self._streams = [np.random.default_rng(ss)
                         for ss in np.random.SeedSequence(seed).spawn(workers)]
        # particle slots assigned to workers in contiguous blocks
        self._blocks = np.array_split(np.arange(M), workers)

    def column_means(self) -> np.ndarray:
        return self.s.mean(axis=2)  # (4, ncols)

    def _noise(self) -> np.ndarray:
        out = np.empty_like(self.s)
        for rng, block in zip(self._streams, self._blocks):
            if block.size:
                out[:, :, block] = rng.standard_normal((4, self.s.shape[1], block.size))
        return out


def particle_step(ens: ParticleEnsemble, params: ParticleParams,
                  kernel: Kernel | None, shifts: ShiftSet | None,
                  activation: Activation, dt: float,
                  B_beta=None, noise: np.ndarray | None = None) -> None:
    """One Euler-Maruyama step with reflection; noise is injectable for tests."""
    if not dt <= params.tau / 10.0:
        raise ValueError(f"dt={dt} exceeds tau/10 = {params.tau / 10.0}")
    if B_beta is None:
        B_beta = np.full(4, params.B)
    B_beta = np.asarray(B_beta, dtype=float)
    if ens.grid is not None:
        n = ens.grid.n
        conv = convolve_means(kernel, shifts, ens.column_means().reshape(4, n, n))
        arg = conv[None, :, :] + B_beta[:, None, None]
        phi = evaluate(activation, arg).reshape(4, n * n)
    else:
        # all-to-all: (1/4) sum_beta' W0 <s^beta'> = W0 * global mean
        arg = ens.W0 * float(ens.s.mean()) + B_beta
        phi = evaluate(activation, arg)[:, None]  # (4, 1)
    if noise is None:
        noise = ens._noise()
    ens.s += ((dt / params.tau) * (phi[:, :, None] - ens.s)
              + np.sqrt(2.0 * params.sigma * dt / params.tau) * noise)
    np.abs(ens.s, out=ens.s)
    if not np.isfinite(ens.s).all():
        raise FloatingPointError(f"non-finite particle state at t={ens.t:.3f} ms")
    ens.t += dt


def run_particles(ens: ParticleEnsemble, params: ParticleParams,
                  kernel: Kernel | None, shifts: ShiftSet | None,
                  activation: Activation, dt: float, T: float,
                  record_every: int = 0):
    """Advance to time T; optionally record (t, global mean) every k-th step."""
    times, means = [], []
    nsteps = int(np.ceil(T / dt))
    for k in range(nsteps):
        particle_step(ens, params, kernel, shifts, activation, dt)
        if record_every and (k + 1) % record_every == 0:
            times.append(ens.t)
            means.append(float(ens.s.mean()))
    return np.array(times), np.array(means)


def empirical_density(ens: ParticleEnsemble, bins: int, s_max: float) -> np.ndarray:
    """Mass-one normalised histograms on [0, s_max], shaped (4, N, bins)."""
    if not bins > 0:
        raise ValueError("bins must be positive")
    edges = np.linspace(0.0, s_max, bins + 1)
    nbeta, ncol, _ = ens.s.shape
    out = np.empty((nbeta, ncol, bins))
    width = s_max / bins
    for b in range(nbeta):
        for c in range(ncol):
            counts, _ = np.histogram(np.minimum(ens.s[b, c], s_max - 1e-12), bins=edges)
            out[b, c] = counts / (ens.M * width)
    return out
