"""Finite-volume time evolution of the 4-population Fokker-Planck system.

For every population beta and sheet cell x the density f(s) obeys

    tau df/dt = -d/ds[(Phi(arg(x)) - s) f] + sigma d^2f/ds^2

with no-flux boundaries at s = 0 and s = s_max, where arg(x) couples the
populations through one periodic convolution of the kernel against the
shifted mean-activity fields plus the external input B^beta(t).

The interface flux uses exponential fitting (Scharfetter-Gummel):

    J_{j+1/2} = (sigma/ds) [ B(-w) f_j - B(w) f_{j+1} ],   w = v ds / sigma,
    v = Phi - s_{j+1/2},   B(x) = x / (e^x - 1).

Because the drift is linear in s, the midpoint interface velocity integrates
it exactly and the discrete Gaussian steady profile is preserved to machine
precision. The flux is well-defined at vacuum cells (delta initial data),
reduces to pure upwinding as sigma -> 0, and is positivity-preserving under

    dt <= cfl * tau / (max|v|/ds + 2 sigma/ds^2).

The update is evaluated in positive-combination form, so cell values stay
nonnegative in floating point as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .activation import Activation, evaluate
from .connectivity import Kernel, ShiftSet, TorusGrid, convolve_means

THETA_BETA = np.array([np.pi / 2.0, np.pi, 1.5 * np.pi, 2.0 * np.pi])


class SolverError(RuntimeError):
    """Non-finite values or a CFL/positivity violation during stepping."""


@dataclass
class SolverParams:
    tau: float = 10.0          # relaxation time (ms)
    sigma: float = 0.015       # noise strength
    B: float = 3.0             # baseline external input
    alpha: float = 0.0         # velocity modulation
    cfl: float = 0.9
    t_min: float = 2000.0      # ms
    t_max: float = 6000.0      # ms
    stop_tol: float = 1e-8     # L1 rate threshold for stationarity

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if not 0 < self.cfl <= 1:
            raise ValueError(f"cfl must be in (0, 1], got {self.cfl}")


@dataclass
class RunReport:
    final_time: float
    final_rate: float
    stop_reason: str  # "stationary" | "max-time"
    steps: int


@njit(parallel=True, cache=True)
def _advance(f2, phi, s_if, ds, sigma, coef, delta_out):
    """One explicit step on all columns; f2 is (ncols, ns), updated in place.

    coef = dt / (tau * ds). Writes sum |df| per column into delta_out
    (NaN signals a non-finite column). Positive-combination update:
    f_j <- f_j (1 - coef (aL_{j+1/2} + aR_{j-1/2}))
           + f_{j-1} coef aL_{j-1/2} + f_{j+1} coef aR_{j+1/2},
    aL = (sigma/ds) B(-w), aR = (sigma/ds) B(w), w = (phi - s_{j+1/2}) ds/sigma.

    B(-w) = w + B(w), and along a column w drops by ds^2/sigma per interface,
    so e^w follows a geometric recurrence: one exp per column. IEEE inf/0
    propagation handles the |w| > 709 tails (B -> 0 and B -> |w|) exactly.
    """
    ncols, ns = f2.shape
    sig_ds = sigma / ds
    dw = ds * ds / sigma if sigma > 0.0 else 0.0
    K = math.exp(-dw) if sigma > 0.0 else 1.0
    for c in prange(ncols):
        p = phi[c]
        acc = 0.0
        aLm = 0.0
        aRm = 0.0
        fm = 0.0
        fj = f2[c, 0]
        if sigma > 0.0:
            w = (p - s_if[1]) * ds / sigma
            ew = math.exp(w)
        else:
            w = 0.0
            ew = 1.0
        for j in range(ns):
            if j < ns - 1:
                f1 = f2[c, j + 1]
                if sigma > 0.0:
                    aw = w if w >= 0.0 else -w
                    if aw < 1e-8:
                        bw = 1.0 - 0.5 * w + w * w / 12.0
                    else:
                        bw = w / (ew - 1.0)
                    aLp = sig_ds * (w + bw)
                    aRp = sig_ds * bw
                    w -= dw
                    ew *= K
                    if ew == np.inf and w < 709.0:
                        ew = math.exp(w)  # re-enter the representable band
                else:
                    v = p - s_if[j + 1]
                    aLp = v if v > 0.0 else 0.0
                    aRp = -v if v < 0.0 else 0.0
            else:
                f1 = 0.0
                aLp = 0.0
                aRp = 0.0
            fn = (fj * (1.0 - coef * (aLp + aRm))
                  + fm * (coef * aLm) + f1 * (coef * aRp))
            acc += abs(fn - fj)
            f2[c, j] = fn
            fm = fj
            fj = f1
            aLm = aLp
            aRm = aRp
        delta_out[c] = acc if math.isfinite(acc) else np.nan


class FieldState:
    """Discrete density f[beta, ix, iy, j] with its grid geometry and clock."""

    def __init__(self, f: np.ndarray, grid: TorusGrid, s_max: float, t: float = 0.0,
                 beta_locked: bool = False):
        f = np.ascontiguousarray(f, dtype=float)
        if f.ndim != 4 or f.shape[0] != 4 or f.shape[1] != grid.n or f.shape[2] != grid.n:
            raise ValueError(f"f shape {f.shape} incompatible with grid n={grid.n}")
        self.f = f
        self.grid = grid
        self.s_max = float(s_max)
        self.t = float(t)
        # True while the four populations are exact copies (beta-symmetric data
        # under equal inputs); lets step() advance one population and mirror.
        self.beta_locked = beta_locked

    @property
    def ns(self) -> int:
        return self.f.shape[3]

    @property
    def ds(self) -> float:
        return self.s_max / self.ns

    @property
    def s_centers(self) -> np.ndarray:
        return (np.arange(self.ns) + 0.5) * self.ds

    @property
    def s_interfaces(self) -> np.ndarray:
        return np.arange(self.ns + 1) * self.ds

    def copy(self) -> "FieldState":
        return FieldState(self.f.copy(), self.grid, self.s_max, self.t, self.beta_locked)

    def column_masses(self) -> np.ndarray:
        """Per-(beta, x) mass sum_j f ds; the scheme conserves it exactly."""
        return self.f.sum(axis=3) * self.ds


def mean_activity(state: FieldState) -> np.ndarray:
    """<f^beta>(x) = sum_j s_j f[...,j] ds (midpoint rule); shape (4, n, n)."""
    return np.tensordot(state.f, state.s_centers, axes=([3], [0])) * state.ds


def mean_combined(state: FieldState) -> np.ndarray:
    """<f>(x) = sum_beta <f^beta>(x)."""
    return mean_activity(state).sum(axis=0)


def firing_argument(state: FieldState, kernel: Kernel, shifts: ShiftSet,
                    B_beta: np.ndarray) -> np.ndarray:
    """Convolution term plus external input, per population; Phi applies downstream."""
    conv = convolve_means(kernel, shifts, mean_activity(state))
    return conv[None, :, :] + np.asarray(B_beta, dtype=float)[:, None, None]


def cfl_dt(params: SolverParams, phis: np.ndarray, ds: float, s_max: float) -> float:
    vmax = max(float(phis.max()), s_max - float(phis.min()))
    return params.cfl * params.tau / (vmax / ds + 2.0 * params.sigma / ds**2)


def external_input(t: float, trajectory, alpha: float, B: float) -> np.ndarray:
    """B^beta(t) = B + alpha v(t) cos(theta(t) - theta^beta); v in cm/ms."""
    v, theta = trajectory.velocity_at(t)
    return B + alpha * v * np.cos(theta - THETA_BETA)


def step(state: FieldState, params: SolverParams, kernel: Kernel, shifts: ShiftSet,
         activation: Activation, B_beta=None, dt: float | None = None,
         max_dt: float | None = None):
    """Advance by one explicit step; returns (dt, L1 rate of change).

    The rate is sum_beta ||df^beta/dt||_{L1(Omega x [0,s_max])}, an upper bound
    for the combined-population rate used as the stationarity stop criterion.
    """
    if B_beta is None:
        B_beta = np.full(4, params.B)
    else:
        B_beta = np.asarray(B_beta, dtype=float)
    locked = state.beta_locked and float(np.ptp(B_beta)) == 0.0
    if not locked:
        state.beta_locked = False

    args = firing_argument(state, kernel, shifts, B_beta)
    phis = np.ascontiguousarray(evaluate(activation, args))
    if dt is None:
        dt = cfl_dt(params, phis, state.ds, state.s_max)
        if max_dt is not None:
            dt = min(dt, max_dt)
    else:
        limit = cfl_dt(params, phis, state.ds, state.s_max) / params.cfl
        if dt > limit * (1 + 1e-12):
            raise SolverError(f"dt={dt:.3e} violates the CFL bound {limit:.3e}")

    n = state.grid.n
    coef = dt / (params.tau * state.ds)
    if locked:
        f2 = state.f[0].reshape(n * n, state.ns)
        delta = np.empty(n * n)
        _advance(f2, phis[0].reshape(-1), state.s_interfaces, state.ds,
                 params.sigma, coef, delta)
        state.f[1:] = state.f[0]
        total = 4.0 * delta.sum()
    else:
        f2 = state.f.reshape(4 * n * n, state.ns)
        delta = np.empty(4 * n * n)
        _advance(f2, phis.reshape(-1), state.s_interfaces, state.ds,
                 params.sigma, coef, delta)
        total = delta.sum()
    if not math.isfinite(total):
        raise SolverError(f"non-finite density at t={state.t:.3f} ms")
    state.t += dt
    rate = total * state.grid.dx**2 * state.ds / dt
    return dt, rate


def run_to_time(state: FieldState, params: SolverParams, kernel: Kernel,
                shifts: ShiftSet, activation: Activation, t_end: float,
                input_fn=None) -> int:
    """Advance to exactly t_end (the final step is clamped); returns step count."""
    steps = 0
    while state.t < t_end - 1e-12:
        B_beta = input_fn(state.t) if input_fn is not None else None
        step(state, params, kernel, shifts, activation, B_beta,
             max_dt=t_end - state.t)
        steps += 1
    return steps


def run_to_stationary(state: FieldState, params: SolverParams, kernel: Kernel,
                      shifts: ShiftSet, activation: Activation,
                      input_fn=None, callback=None) -> RunReport:
    """Advance until (t >= t_min and rate <= stop_tol) or t >= t_max.

    input_fn(t) -> B^beta array enables trajectory-driven runs; callback, if
    given, is called as callback(state, step_index, rate) after every step.
    """
    rate = np.inf
    steps = 0
    while state.t < params.t_max:
        B_beta = input_fn(state.t) if input_fn is not None else None
        _, rate = step(state, params, kernel, shifts, activation, B_beta)
        steps += 1
        if callback is not None:
            callback(state, steps, rate)
        if state.t >= params.t_min and rate <= params.stop_tol:
            return RunReport(state.t, rate, "stationary", steps)
    return RunReport(state.t, rate, "max-time", steps)


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------

def _delta_profile(ns: int, ds: float, s_value: float) -> np.ndarray:
    """Unit-mass column with everything in the cell containing s_value."""
    prof = np.zeros(ns)
    j = min(int(s_value / ds), ns - 1)
    prof[j] = 1.0 / ds
    return prof


def delta_columns(grid: TorusGrid, ns: int, s_max: float, rng: np.random.Generator,
                  frac: float = 0.01, active_level: float = 1.0,
                  per_beta: bool = False) -> FieldState:
    """Random activation protocol: frac of the columns start as a delta at
    s = active_level, the rest at s = 0; every column has mass one."""
    ds = s_max / ns
    lo = _delta_profile(ns, ds, 0.0)
    hi = _delta_profile(ns, ds, active_level)
    n = grid.n
    ncells = max(1, round(frac * n * n))
    f = np.empty((4, n, n, ns))
    draws = 4 if per_beta else 1
    for b in range(draws):
        flat = rng.choice(n * n, size=ncells, replace=False)
        mask = np.zeros(n * n, dtype=bool)
        mask[flat] = True
        mask = mask.reshape(n, n)
        sheet = np.where(mask[:, :, None], hi[None, None, :], lo[None, None, :])
        if per_beta:
            f[b] = sheet
        else:
            f[:] = sheet[None]
    return FieldState(f, grid, s_max, beta_locked=not per_beta)


def from_homogeneous(activation: Activation, W0: float, B: float, sigma: float,
                     grid: TorusGrid, ns: int, s_max: float) -> FieldState:
    """Every column carries the grid-projected stationary profile."""
    from .homogeneous import project_to_grid

    ds = s_max / ns
    s_centers = (np.arange(ns) + 0.5) * ds
    prof, _, _ = project_to_grid(activation, W0, B, sigma, s_centers, ds)
    f = np.broadcast_to(prof, (4, grid.n, grid.n, ns)).copy()
    return FieldState(f, grid, s_max, beta_locked=True)


def perturb_means(state: FieldState, amplitude: float, rng: np.random.Generator) -> None:
    """Shift every column's mean activity by a random relative amount.

    Columns are tilted along their own (s - m)/std direction, which moves the
    mean by ~ amplitude * std * xi(x) while keeping the mass exactly one (a
    plain multiplicative factor would be undone by the mass renormalisation).
    The same xi field applies to all four populations, so a beta-symmetric
    state stays beta-symmetric and the probe is purely spatial.
    """
    s = state.s_centers
    m = np.tensordot(state.f, s, axes=([3], [0])) * state.ds  # (4, n, n)
    var = np.tensordot(state.f, s * s, axes=([3], [0])) * state.ds - m * m
    std = np.sqrt(np.maximum(var, 1e-30))
    xi = rng.uniform(-1.0, 1.0, size=(state.grid.n, state.grid.n))
    tilt = (s[None, None, None, :] - m[..., None]) / std[..., None]
    tilt = np.clip(amplitude * xi[None, :, :, None] * tilt, -0.9, 0.9)
    state.f *= 1.0 + tilt
    state.f /= state.f.sum(axis=3, keepdims=True) * state.ds


def perturbed_homogeneous(activation: Activation, W0: float, B: float, sigma: float,
                          grid: TorusGrid, ns: int, s_max: float,
                          rng: np.random.Generator, amplitude: float = 0.02) -> FieldState:
    """Homogeneous columns with their means shifted by ~amplitude * std * xi(x)."""
    state = from_homogeneous(activation, W0, B, sigma, grid, ns, s_max)
    perturb_means(state, amplitude, rng)
    return state


def stripe_seeded(grid: TorusGrid, ns: int, s_max: float,
                  band_width: float = 0.125, active_level: float = 1.0) -> FieldState:
    """Horizontal band at activity level one: delta at s=active_level for cells
    with |y| < band_width/2, delta at s=0 elsewhere."""
    ds = s_max / ns
    lo = _delta_profile(ns, ds, 0.0)
    hi = _delta_profile(ns, ds, active_level)
    y = grid.coords1d()
    band = np.abs(y) < band_width / 2.0
    sheet = np.where(band[None, :, None], hi[None, None, :], lo[None, None, :])
    f = np.broadcast_to(sheet, (4, grid.n, grid.n, ns)).copy()
    return FieldState(f, grid, s_max, beta_locked=True)


# ---------------------------------------------------------------------------
# single-column (spatially homogeneous) solver
# ---------------------------------------------------------------------------

class Homogeneous1D:
    """The homogeneous problem on one s-column with scalar coupling W0."""

    def __init__(self, activation: Activation, W0: float, B: float, sigma: float,
                 ns: int, s_bound: float, tau: float = 10.0, cfl: float = 0.9):
        self.activation = activation
        self.W0 = W0
        self.B = B
        self.sigma = sigma
        self.tau = tau
        self.cfl = cfl
        self.ns = ns
        self.s_bound = float(s_bound)
        self.ds = self.s_bound / ns
        self.s_centers = (np.arange(ns) + 0.5) * self.ds
        self.s_interfaces = np.arange(ns + 1) * self.ds
        self.f = np.zeros(ns)
        self.t = 0.0

    def set_random_deltas(self, rng: np.random.Generator, npoints: int, level: float):
        """npoints distinct cells set to the given level, zero elsewhere."""
        self.f[:] = 0.0
        idx = rng.choice(self.ns, size=npoints, replace=False)
        self.f[idx] = level
        self.t = 0.0

    def mean(self) -> float:
        return float((self.s_centers * self.f).sum() * self.ds)

    def step(self, dt: float | None = None) -> float:
        phi = evaluate(self.activation, self.W0 * self.mean() + self.B)
        if dt is None:
            vmax = max(phi, self.s_bound - phi)
            dt = self.cfl * self.tau / (vmax / self.ds + 2.0 * self.sigma / self.ds**2)
        delta = np.empty(1)
        _advance(self.f[None, :], np.array([phi]), self.s_interfaces, self.ds,
                 self.sigma, dt / (self.tau * self.ds), delta)
        if not math.isfinite(delta[0]):
            raise SolverError(f"non-finite density at t={self.t:.3f} ms")
        self.t += dt
        return dt

    def stationary_profile(self):
        """Grid projection of the stationary state on this solver's grid."""
        from .homogeneous import project_to_grid

        return project_to_grid(self.activation, self.W0, self.B, self.sigma,
                               self.s_centers, self.ds)

    def l1_distance(self, profile: np.ndarray) -> float:
        return float(np.abs(self.f - profile).sum() * self.ds)
