import numpy as np
import pytest

from gridfield.activation import Activation
from gridfield.connectivity import Kernel, ShiftSet, TorusGrid, sample_kernel
from gridfield.fokker_planck import (FieldState, Homogeneous1D, SolverError,
                                     SolverParams, delta_columns, external_input,
                                     firing_argument, from_homogeneous,
                                     mean_activity, mean_combined,
                                     perturbed_homogeneous, run_to_stationary,
                                     run_to_time, step, stripe_seeded)
from gridfield.homogeneous import solve_stationary
from gridfield.trajectory import Trajectory

RELU = Activation("relu")
EPS01 = Activation("smooth_eps", epsilon=0.01)


def small_model(n=16, A=2.0, a=3.0, b=40.0):
    grid = TorusGrid(n)
    kernel = sample_kernel(grid, A, a, b)
    return grid, kernel, ShiftSet(grid, 1)


def zero_kernel(n=16):
    grid = TorusGrid(n)
    return grid, Kernel(grid, np.zeros((n, n))), ShiftSet(grid, 1)


def test_firing_argument_homogeneous():
    grid, kernel, shifts = small_model()
    state = from_homogeneous(EPS01, kernel.W0, 3.0, 0.03, grid, 32, 1.3)
    m = mean_activity(state)[0, 0, 0]
    args = firing_argument(state, kernel, shifts, np.array([3.0, 3.0, 3.0, 3.1]))
    assert np.allclose(args[0], kernel.W0 * m + 3.0, rtol=1e-10)
    assert np.allclose(args[3], kernel.W0 * m + 3.1, rtol=1e-10)


def test_stationary_preservation_full_solver():
    grid, kernel, shifts = small_model()
    state = from_homogeneous(EPS01, kernel.W0, 3.0, 0.03, grid, 64, 1.3)
    ref = state.f.copy()
    params = SolverParams(sigma=0.03)
    for _ in range(100):
        step(state, params, kernel, shifts, EPS01)
    l1 = np.abs(state.f - ref).sum() * grid.dx**2 * state.ds
    assert l1 <= 1e-8


def test_mass_conservation_and_positivity():
    grid, kernel, shifts = small_model()
    rng = np.random.default_rng(0)
    state = delta_columns(grid, 32, 1.3, rng, per_beta=True)
    params = SolverParams(sigma=0.01)
    masses0 = state.column_masses()
    assert np.allclose(masses0, 1.0, atol=1e-12)
    prev = masses0
    for _ in range(200):
        step(state, params, kernel, shifts, RELU)
        masses = state.column_masses()
        assert np.abs(masses - prev).max() <= 1e-14
        prev = masses
    assert state.f.min() >= 0.0
    assert np.abs(state.column_masses() - 1.0).max() <= 1e-12


def test_cfl_violation_raises():
    grid, kernel, shifts = small_model()
    state = from_homogeneous(EPS01, kernel.W0, 3.0, 0.03, grid, 32, 1.3)
    params = SolverParams(sigma=0.03)
    with pytest.raises(SolverError):
        step(state, params, kernel, shifts, EPS01, dt=100.0)


def test_zero_noise_transport_toward_phi():
    # sigma=0, Phi == c frozen (zero kernel, B=c): mean obeys the relaxation ODE
    grid, kernel, shifts = zero_kernel()
    ns, s_max, c, tau = 128, 1.3, 0.8, 10.0
    ds = s_max / ns
    f = np.zeros((4, grid.n, grid.n, ns))
    j0 = int(0.2 / ds)
    f[:, :, :, j0] = 1.0 / ds
    state = FieldState(f, grid, s_max, beta_locked=True)
    params = SolverParams(sigma=0.0, B=c, tau=tau)
    m0 = mean_activity(state)[0, 0, 0]
    T = 20.0
    run_to_time(state, params, kernel, shifts, RELU, T)
    got = mean_activity(state)[0, 0, 0]
    ode = c + (m0 - c) * np.exp(-T / tau)  # method-of-lines relaxation oracle
    assert abs(got - ode) <= 2.0 * ds
    assert state.f.min() >= 0.0


def test_mean_activity_delta_and_linearity():
    grid, _, _ = small_model()
    ns, s_max = 32, 1.3
    ds = s_max / ns
    f = np.zeros((4, grid.n, grid.n, ns))
    j = int(1.0 / ds)
    f[:, :, :, j] = 1.0 / ds
    state = FieldState(f, grid, s_max)
    assert np.allclose(mean_activity(state), (j + 0.5) * ds, rtol=1e-12)
    f2 = np.zeros_like(f)
    f2[:, :, :, 4] = 1.0 / ds
    mixed = FieldState(0.25 * f + 0.75 * f2, grid, s_max)
    assert np.allclose(mean_activity(mixed),
                       0.25 * (j + 0.5) * ds + 0.75 * 4.5 * ds, rtol=1e-12)


def test_mean_activity_matches_homogeneous_solver():
    grid = TorusGrid(16)
    sigma = 0.03
    st = solve_stationary(EPS01, -20.6711, 3.0, sigma)
    ns, s_max = 64, 1.3
    ds = s_max / ns
    s = (np.arange(ns) + 0.5) * ds
    prof = np.exp(-((s - st.phi0) ** 2) / (2.0 * sigma))
    prof /= prof.sum() * ds
    f = np.broadcast_to(prof, (4, grid.n, grid.n, ns)).copy()
    state = FieldState(f, grid, s_max)
    assert abs(mean_activity(state)[0, 0, 0] - st.mean) <= ds**2


def test_external_input_geometry():
    traj = Trajectory(t=np.array([0.0, 10.0]), x=np.array([0.0, 0.0]),
                      y=np.array([0.0, 0.2]), radius=80.0)  # moving north
    b = external_input(5.0, traj, alpha=0.3, B=3.0)
    v = 0.02
    assert b[0] == pytest.approx(3.0 + 0.3 * v, rel=1e-12)   # north maximal
    assert b[2] == pytest.approx(3.0 - 0.3 * v, rel=1e-12)   # south minimal
    assert b.sum() == pytest.approx(12.0, rel=1e-12)
    still = Trajectory(t=np.array([0.0, 10.0]), x=np.array([1.0, 1.0]),
                       y=np.array([1.0, 1.0]), radius=80.0)
    assert np.allclose(external_input(5.0, still, 0.3, 3.0), 3.0)


def test_run_to_stationary_stops_at_t_min():
    grid, kernel, shifts = small_model()
    state = from_homogeneous(EPS01, kernel.W0, 3.0, 0.03, grid, 32, 1.3)
    params = SolverParams(sigma=0.03, t_min=5.0, t_max=50.0)
    report = run_to_stationary(state, params, kernel, shifts, EPS01)
    assert report.stop_reason == "stationary"
    assert report.final_time >= 5.0
    assert report.final_time < 6.0
    assert report.final_rate <= 1e-10


def test_run_to_stationary_max_time_path():
    grid, kernel, shifts = small_model()
    rng = np.random.default_rng(1)
    state = delta_columns(grid, 32, 1.3, rng)
    params = SolverParams(sigma=0.01, t_min=1.0, t_max=5.0, stop_tol=0.0)
    report = run_to_stationary(state, params, kernel, shifts, RELU)
    assert report.stop_reason == "max-time"
    assert report.final_time >= 5.0


def test_delta_columns_protocol():
    grid = TorusGrid(32)
    rng = np.random.default_rng(2)
    state = delta_columns(grid, 64, 1.3, rng, frac=0.01)
    assert np.allclose(state.column_masses(), 1.0, atol=1e-12)
    ds = state.ds
    j1 = int(1.0 / ds)
    active = (state.f[0, :, :, j1] > 0).sum()
    assert active == round(0.01 * 32 * 32)
    assert state.beta_locked
    state2 = delta_columns(grid, 64, 1.3, np.random.default_rng(2), per_beta=True)
    assert not state2.beta_locked


def test_stripe_seed_band():
    grid = TorusGrid(32)
    state = stripe_seeded(grid, 64, 1.3, band_width=0.125)
    ds = state.ds
    j1 = int(1.0 / ds)
    y = grid.coords1d()
    active_rows = (state.f[0, 0, :, j1] > 0)
    assert (np.abs(y[active_rows]) < 0.0625 + 1e-12).all()
    assert active_rows.sum() == (np.abs(y) < 0.0625).sum()
    assert np.allclose(state.column_masses(), 1.0, atol=1e-12)


def test_beta_locked_fast_path_matches_full():
    grid, kernel, shifts = small_model()
    rng = np.random.default_rng(3)
    locked = delta_columns(grid, 32, 1.3, rng)
    full = locked.copy()
    full.beta_locked = False
    params = SolverParams(sigma=0.01)
    for _ in range(25):
        step(locked, params, kernel, shifts, RELU)
        step(full, params, kernel, shifts, RELU)
    assert np.array_equal(locked.f, full.f)
    assert locked.t == full.t


def test_unequal_inputs_clear_lock():
    grid, kernel, shifts = small_model()
    state = from_homogeneous(EPS01, kernel.W0, 3.0, 0.03, grid, 32, 1.3)
    assert state.beta_locked
    step(state, SolverParams(sigma=0.03), kernel, shifts, EPS01,
         B_beta=np.array([3.0, 3.0, 3.0, 3.01]))
    assert not state.beta_locked


def test_solver_error_on_nonfinite():
    grid, kernel, shifts = small_model()
    state = from_homogeneous(EPS01, kernel.W0, 3.0, 0.03, grid, 32, 1.3)
    state.f[0, 0, 0, 0] = np.nan
    with pytest.raises(SolverError):
        step(state, SolverParams(sigma=0.03), kernel, shifts, EPS01)


def test_homogeneous_1d_stationarity_per_step():
    solver = Homogeneous1D(EPS01, -20.6711, 3.0, 0.03, 512, 3.0)
    prof, _, _ = solver.stationary_profile()
    solver.f[:] = prof
    step_l1 = []
    for _ in range(10):
        before = solver.f.copy()
        solver.step()
        step_l1.append(np.abs(solver.f - before).sum() * solver.ds)
    assert max(step_l1) <= 1e-8


def test_positivity_property_random_states():
    # under the CFL rule no negative cell value appears, for arbitrary
    # nonnegative data and inputs
    grid, kernel, shifts = small_model(n=8)
    rng = np.random.default_rng(9)
    for trial in range(10):
        f = rng.uniform(0.0, 5.0, size=(4, 8, 8, 16))
        f[rng.uniform(size=f.shape) < 0.6] = 0.0  # plenty of vacuum
        state = FieldState(f, grid, 1.3)
        params = SolverParams(sigma=float(rng.uniform(0.0, 0.1)),
                              B=float(rng.uniform(-2.0, 4.0)))
        for _ in range(20):
            step(state, params, kernel, shifts, RELU)
        assert state.f.min() >= 0.0


def test_params_validation():
    with pytest.raises(ValueError):
        SolverParams(tau=0.0)
    with pytest.raises(ValueError):
        SolverParams(cfl=1.5)
    with pytest.raises(ValueError):
        SolverParams(sigma=-0.1)
