"""Numerical studies: bifurcation sweeps, pattern classes, trajectory replay,
grid refinement and relaxation-rate measurements."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .activation import Activation, evaluate
from .connectivity import Kernel, ShiftSet, TorusGrid, convolve_means, sample_kernel
from .fokker_planck import (FieldState, Homogeneous1D, SolverParams, delta_columns,
                            external_input, mean_activity, mean_combined,
                            perturb_means, perturbed_homogeneous, run_to_stationary,
                            run_to_time, step, stripe_seeded)
from .homogeneous import solve_stationary
from .trajectory import Trajectory

INITS = ("random_deltas", "perturbed_homogeneous", "stripe_seeded")


@dataclass(frozen=True)
class BranchRecord:
    """One bifurcation-branch point: spatial extremes of <f> = sum_beta <f^beta>."""

    sigma: float
    max_mean: float
    min_mean: float
    pattern: str
    stop_reason: str
    final_time: float


# ---------------------------------------------------------------------------
# pattern classification
# ---------------------------------------------------------------------------

def _pair_powers(field: np.ndarray):
    """Power of each +/-k mode pair of the zero-mean field, with integer freqs."""
    n = field.shape[0]
    P = np.abs(np.fft.fft2(field - field.mean())) ** 2
    freqs = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    pairs = {}
    for i in range(n):
        for j in range(n):
            k1, k2 = int(freqs[i]), int(freqs[j])
            if (k1, k2) == (0, 0):
                continue
            if k1 > 0 or (k1 == 0 and k2 > 0):
                key = (k1, k2)
            else:
                key = (-k1, -k2)
            pairs[key] = pairs.get(key, 0.0) + P[i, j]
    return pairs


def _collinear(a, b) -> bool:
    return a[0] * b[1] - a[1] * b[0] == 0


def classify_pattern(mean_field: np.ndarray, hom_tol: float = 1e-3,
                     stripe_frac: float = 0.8, peak_factor: float = 2.0) -> str:
    """Label a mean-activity field: homogeneous, stripe, hexagonal, eye or other.

    Homogeneous when the relative spatial contrast is below hom_tol. Otherwise
    the spectrum decides: one +/-k pair holding >= stripe_frac of the non-zero
    power is a stripe; >= 3 non-collinear pairs within peak_factor of the top
    peak form a hexagonal arrangement; exactly 2 such directions an eye.
    """
    mx = float(mean_field.max())
    mn = float(mean_field.min())
    if mx <= 0.0 or (mx - mn) / abs(mx) < hom_tol:
        return "homogeneous"
    pairs = _pair_powers(mean_field)
    total = sum(pairs.values())
    if total <= 0.0:
        return "homogeneous"
    ranked = sorted(pairs.items(), key=lambda kv: -kv[1])
    top_k, top_p = ranked[0]
    if top_p >= stripe_frac * total:
        return "stripe"
    dominant = [k for k, p in ranked if p >= top_p / peak_factor]
    directions: list[tuple[int, int]] = []
    for k in dominant:
        if not any(_collinear(k, d) for d in directions):
            directions.append(k)
    if len(directions) >= 3:
        return "hexagonal"
    if len(directions) == 2:
        return "eye"
    return "other"


def detect_transition(branch: list[BranchRecord], jump_factor: float = 5.0):
    """Largest jump of (max_mean - min_mean) between consecutive sigma points.

    Returns (sigma_star, jump) or None when no jump exceeds jump_factor times
    the median inter-point change.
    """
    if len(branch) < 3:
        raise ValueError("transition detection needs at least 3 branch points")
    recs = sorted(branch, key=lambda r: r.sigma)
    amp = np.array([r.max_mean - r.min_mean for r in recs])
    jumps = np.abs(np.diff(amp))
    i = int(np.argmax(jumps))
    med = float(np.median(jumps))
    if jumps[i] <= jump_factor * med or jumps[i] == 0.0:
        return None
    sigma_star = 0.5 * (recs[i].sigma + recs[i + 1].sigma)
    return sigma_star, float(jumps[i])


# ---------------------------------------------------------------------------
# continuation sweep
# ---------------------------------------------------------------------------

def homogeneous_reference(activation: Activation, W0: float, B: float,
                          sigma: float) -> float:
    """Combined homogeneous mean 4 <f_inf>, the reference line of the diagrams."""
    return 4.0 * solve_stationary(activation, W0, B, sigma).mean


def make_initial_state(init: str, activation: Activation, kernel: Kernel,
                       sigma: float, grid: TorusGrid, ns: int, s_max: float,
                       params: SolverParams, rng: np.random.Generator,
                       perturb_amplitude: float = 0.02) -> FieldState:
    if init == "random_deltas":
        return delta_columns(grid, ns, s_max, rng)
    if init == "perturbed_homogeneous":
        return perturbed_homogeneous(activation, kernel.W0, params.B, sigma,
                                     grid, ns, s_max, rng, perturb_amplitude)
    if init == "stripe_seeded":
        return stripe_seeded(grid, ns, s_max)
    raise ValueError(f"unknown init {init!r}; expected one of {INITS}")


def bifurcation_sweep(direction: str, sigma_grid, init: str, params: SolverParams,
                      kernel: Kernel, shifts: ShiftSet, activation: Activation,
                      ns: int, s_max: float, seed: int = 0,
                      perturb_amplitude: float = 0.02,
                      reperturb_homogeneous: bool = True,
                      state_hook=None, min_points: int = 20) -> list[BranchRecord]:
    """Continuation in sigma: each point starts from the previous steady state.

    direction "l2r" sweeps ascending sigma, "r2l" descending. When a
    continuation point inherits a numerically homogeneous state, the
    configured perturbation is re-injected (reperturb_homogeneous) so every
    point probes finite-amplitude stability instead of round-off ripples.
    state_hook(sigma, state, report) is called after each converged point.
    """
    if direction not in ("l2r", "r2l"):
        raise ValueError(f"direction must be 'l2r' or 'r2l', got {direction!r}")
    sigmas = np.sort(np.asarray(sigma_grid, dtype=float))
    if len(sigmas) < min_points:
        raise ValueError(f"sigma grid has {len(sigmas)} points, need >= {min_points}")
    if direction == "r2l":
        sigmas = sigmas[::-1]
    rng = np.random.default_rng(seed)
    grid = kernel.grid
    records: list[BranchRecord] = []
    state: FieldState | None = None
    for sigma in sigmas:
        p = replace(params, sigma=float(sigma))
        if state is None:
            state = make_initial_state(init, activation, kernel, float(sigma),
                                       grid, ns, s_max, p, rng, perturb_amplitude)
        else:
            state = state.copy()
            if reperturb_homogeneous and classify_pattern(mean_combined(state)) == "homogeneous":
                perturb_means(state, perturb_amplitude, rng)
        state.t = 0.0
        report = run_to_stationary(state, p, kernel, shifts, activation)
        field = mean_combined(state)
        records.append(BranchRecord(
            sigma=float(sigma), max_mean=float(field.max()), min_mean=float(field.min()),
            pattern=classify_pattern(field), stop_reason=report.stop_reason,
            final_time=report.final_time,
        ))
        if state_hook is not None:
            state_hook(float(sigma), state, report)
    return records


# ---------------------------------------------------------------------------
# trajectory replay
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiringEvent:
    t: float      # ms
    x: float      # cm
    y: float      # cm
    rate: float   # Phi value at the probe cell


def replay(state: FieldState, params: SolverParams, kernel: Kernel, shifts: ShiftSet,
           activation: Activation, trajectory: Trajectory,
           probe_cell: tuple[int, int] = (0, 0), threshold: float = 0.0,
           probe_beta: int = 0, max_gap_ms: float = 100.0) -> list[FiringEvent]:
    """Drive the pre-stabilised state with the trajectory input and record
    firing events of the probe cell at every trajectory sample.

    One event is emitted per trajectory sample whose probe firing rate exceeds
    the threshold. The drift gain of the sheet per cm of physical movement is
    alpha * z-dependent; with v in cm/ms and alpha = 0.3 the desk-scale fields
    are localised well inside an 80 cm enclosure (see the acceptance suite).
    """
    if trajectory.max_gap() > max_gap_ms:
        raise ValueError(
            f"trajectory gap {trajectory.max_gap():.1f} ms exceeds {max_gap_ms} ms"
        )
    state.t = float(trajectory.t[0])
    events: list[FiringEvent] = []
    ix, iy = probe_cell
    next_sample = 0
    t_end = float(trajectory.t[-1])

    def probe_rate() -> float:
        conv = convolve_means(kernel, shifts, mean_activity(state))
        b = external_input(min(state.t, t_end), trajectory, params.alpha, params.B)
        return float(evaluate(activation, conv[ix, iy] + b[probe_beta]))

    while True:
        while next_sample < len(trajectory.t) and trajectory.t[next_sample] <= state.t:
            t_s = float(trajectory.t[next_sample])
            rate = probe_rate()
            if rate > threshold:
                x, y = trajectory.position_at(t_s)
                events.append(FiringEvent(t=t_s, x=x, y=y, rate=rate))
            next_sample += 1
        if state.t >= t_end or next_sample >= len(trajectory.t):
            break
        b_beta = external_input(state.t, trajectory, params.alpha, params.B)
        step(state, params, kernel, shifts, activation, b_beta)
    return events


def cluster_events(events: list[FiringEvent], link_radius_cm: float = 8.0,
                   min_size: int = 5) -> int:
    """Number of disjoint spatial clusters (single-linkage at link_radius_cm)."""
    if not events:
        return 0
    pts = np.array([[e.x, e.y] for e in events])
    tree = cKDTree(pts)
    parent = np.arange(len(pts))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in tree.query_pairs(link_radius_cm):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
    roots, counts = np.unique([find(i) for i in range(len(pts))], return_counts=True)
    return int((counts >= min_size).sum())


def measure_drift_gain(state: FieldState, params: SolverParams, kernel: Kernel,
                       shifts: ShiftSet, activation: Activation, v: float,
                       duration_ms: float, mode: tuple[int, int] = (4, 0)) -> float:
    """Sheet-translation speed (sheet units/ms) under constant eastward drive v.

    Tracks the phase of the dominant Fourier mode of <f> while feeding
    B^beta = B + alpha v cos(theta - theta^beta) with theta = 0 (east).
    """
    from .fokker_planck import THETA_BETA

    b_beta = params.B + params.alpha * v * np.cos(0.0 - THETA_BETA)
    k1, k2 = mode
    t0 = state.t
    phases = [0.0]
    times = [0.0]
    last = None
    while state.t - t0 < duration_ms:
        step(state, params, kernel, shifts, activation, b_beta)
        coef = np.fft.fft2(mean_combined(state))[k1 % state.grid.n, k2 % state.grid.n]
        ph = float(np.angle(coef))
        if last is not None:
            d = ph - last
            d -= 2.0 * np.pi * np.round(d / (2.0 * np.pi))
            phases.append(phases[-1] + d)
            times.append(state.t - t0)
        else:
            phases.append(ph - ph)
            times.append(state.t - t0)
        last = ph
    slope = np.polyfit(times[1:], phases[1:], 1)[0]  # rad/ms
    # exp(i k.x0(t)) phase: moving east by dx shifts phase by -2 pi k1 dx
    return -slope / (2.0 * np.pi * k1) if k1 else 0.0


# ---------------------------------------------------------------------------
# grid refinement
# ---------------------------------------------------------------------------

def _block_average(arr: np.ndarray, factor: int) -> np.ndarray:
    """Piecewise averages over factor^d blocks along every axis."""
    out = arr
    for ax in range(arr.ndim):
        n = out.shape[ax]
        shape = out.shape[:ax] + (n // factor, factor) + out.shape[ax + 1:]
        out = out.reshape(shape).mean(axis=ax + 1)
    return out


@dataclass(frozen=True)
class RefinementRow:
    n: int
    l1: float
    l2: float
    ooc_l1: float   # NaN on the first row
    ooc_l2: float


def refinement_study(n_list, t_eval: float, params: SolverParams,
                     activation: Activation, kernel_params: dict,
                     z: float = 1.0 / 32.0, s_max: float = 1.3, seed: int = 0,
                     frac: float = 0.01) -> list[RefinementRow]:
    """L1/L2 (in x) errors of <f> at t_eval against the finest grid in n_list.

    The random 1% delta initialization is drawn once on the finest grid and
    coarsened by piecewise averages, and the physical shift z is held fixed
    across levels (it must be an integer number of cells on every level).
    """
    ns = sorted(int(n) for n in n_list)
    n_fine = ns[-1]
    rng = np.random.default_rng(seed)
    fine_grid = TorusGrid(n_fine)
    fine = delta_columns(fine_grid, n_fine, s_max, rng, frac=frac)

    fields = {}
    for n in ns:
        factor = n_fine // n
        if factor * n != n_fine:
            raise ValueError(f"levels must nest: {n} does not divide {n_fine}")
        grid = TorusGrid(n)
        zc = round(z * n)
        if abs(zc - z * n) > 1e-12 or zc < 1:
            raise ValueError(f"shift z={z} is not a positive integer number of cells at n={n}")
        kernel = sample_kernel(grid, **kernel_params)
        shifts = ShiftSet(grid, zc)
        # piecewise average over (x, y, s) blocks
        f0 = fine.f.reshape(4, n, factor, n, factor, n, factor).mean(axis=(2, 4, 6))
        state = FieldState(np.ascontiguousarray(f0), grid, s_max,
                           beta_locked=fine.beta_locked)
        run_to_time(state, params, kernel, shifts, activation, t_eval)
        fields[n] = mean_combined(state)

    rows: list[RefinementRow] = []
    prev: tuple[float, float] | None = None
    for n in ns[:-1]:
        factor = n_fine // n
        ref = _block_average(fields[n_fine], factor)
        diff = fields[n] - ref
        dx2 = (1.0 / n) ** 2
        l1 = float(np.abs(diff).sum() * dx2)
        l2 = float(np.sqrt((diff**2).sum() * dx2))
        if prev is None:
            rows.append(RefinementRow(n, l1, l2, float("nan"), float("nan")))
        else:
            rows.append(RefinementRow(n, l1, l2,
                                      float(np.log2(prev[0] / l1)),
                                      float(np.log2(prev[1] / l2))))
        prev = (l1, l2)
    return rows


# ---------------------------------------------------------------------------
# relaxation-rate study (homogeneous 1-D problem)
# ---------------------------------------------------------------------------

def fit_decay_slope(t: np.ndarray, err: np.ndarray, hi_frac: float = 1e-1,
                    lo_abs: float = 1e-11) -> float:
    """Slope of the exponential regime: fit ln(err) vs t between the time err
    first falls below hi_frac * err peak and the time it reaches lo_abs."""
    t = np.asarray(t, dtype=float)
    err = np.asarray(err, dtype=float)
    peak = err.max()
    mask = (err <= hi_frac * peak) & (err >= lo_abs)
    # restrict to the first contiguous stretch to avoid the numerical floor
    idx = np.flatnonzero(mask)
    if idx.size < 3:
        raise ValueError("not enough samples in the exponential window")
    cut = np.flatnonzero(np.diff(idx) > 1)
    if cut.size:
        idx = idx[: cut[0] + 1]
    if idx.size < 3:
        raise ValueError("exponential window too short")
    coeffs = np.polyfit(t[idx], np.log(err[idx]), 1)
    return float(-coeffs[0])


def relaxation_study(runs: int, seed: int = 0, sigma: float = 0.03,
                     W0: float = -20.6711, B: float = 3.0, epsilon: float = 0.01,
                     ns: int = 512, s_bound: float = 3.0, n_deltas: int = 51,
                     t_end: float = 300.0, record_every: int = 20):
    """Random-delta relaxation protocol on [0, s_bound]: decay slopes of
    |<f> - <f_inf>| and ||f - f_inf||_L1 per seeded run, plus the first run's
    error-vs-time curve (t, mean_err, l1_err) for plotting."""
    act = Activation("smooth_eps", epsilon=epsilon)
    slopes_mean = []
    slopes_l1 = []
    curve = None
    for run in range(runs):
        rng = np.random.default_rng(seed + run)
        solver = Homogeneous1D(act, W0, B, sigma, ns, s_bound)
        solver.set_random_deltas(rng, n_deltas, ns / (n_deltas * s_bound))
        prof, m_disc, _ = solver.stationary_profile()
        ts, e_mean, e_l1 = [], [], []
        k = 0
        while solver.t < t_end:
            solver.step()
            k += 1
            if k % record_every == 0:
                ts.append(solver.t)
                e_mean.append(abs(solver.mean() - m_disc))
                e_l1.append(solver.l1_distance(prof))
        if curve is None:
            curve = (np.array(ts), np.array(e_mean), np.array(e_l1))
        slopes_mean.append(fit_decay_slope(np.array(ts), np.array(e_mean)))
        slopes_l1.append(fit_decay_slope(np.array(ts), np.array(e_l1)))
    return np.array(slopes_mean), np.array(slopes_l1), curve
