"""Command-line entry point wiring configs to the modules.

Subcommands: stationary, stability, simulate, bifurcate, replay, particles,
refine, relax. Every run echoes its effective config to the output directory
before computing and writes a manifest.csv listing the artifacts produced.

Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 non-convergence.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import experiments, microscopic, stateio
from .activation import Activation
from .config import ConfigError, RunConfig, echo_config, parse_config, parse_override
from .connectivity import Kernel, ShiftSet, SpectralError, TorusGrid, sample_kernel
from .experiments import bifurcation_sweep, refinement_study, relaxation_study, replay
from .fokker_planck import (FieldState, SolverError, SolverParams, run_to_stationary)
from .homogeneous import ConsistencyError, m_infinity, solve_stationary
from .stability import (MultipleCrossingError, NoCrossingError, critical_sigma,
                        dispersion)
from .trajectory import load_trajectory_csv, save_trajectory_csv, synth_trajectory

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_NONCONV = 0, 2, 3, 4


class RunDir:
    """Output directory with artifact tracking for the manifest."""

    def __init__(self, path: str):
        self.path = path
        os.makedirs(path, exist_ok=True)
        self.artifacts: list[tuple[str, str]] = []

    def file(self, name: str, kind: str) -> str:
        self.artifacts.append((kind, name))
        return os.path.join(self.path, name)

    def write_manifest(self):
        stateio.write_csv(os.path.join(self.path, "manifest.csv"),
                          ["kind", "file"], self.artifacts)


def make_activation(cfg: RunConfig) -> Activation:
    a = cfg.activation
    return Activation(a.kind, epsilon=a.epsilon, gain=a.gain)


def build_model(cfg: RunConfig):
    grid = TorusGrid(cfg.grid.n)
    kernel = sample_kernel(grid, cfg.kernel.A, cfg.kernel.a, cfg.kernel.b)
    shifts = ShiftSet(grid, cfg.shift.z_cells)
    act = make_activation(cfg)
    s = cfg.solver
    params = SolverParams(tau=s.tau, sigma=s.sigma, B=s.B, alpha=s.alpha, cfl=s.cfl,
                          t_min=s.t_min, t_max=s.t_max, stop_tol=s.stop_tol)
    return grid, kernel, shifts, act, params


def _sigma_grid(cfg: RunConfig) -> np.ndarray:
    return np.linspace(cfg.sweep.sigma_lo, cfg.sweep.sigma_hi, cfg.sweep.points)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_stationary(cfg: RunConfig, run: RunDir, args) -> int:
    _, kernel, _, act, params = build_model(cfg)
    rows = []
    for sigma in _sigma_grid(cfg):
        st = solve_stationary(act, kernel.W0, params.B, float(sigma))
        rows.append((st.sigma, st.mean, st.phi0, st.Z, m_infinity(st)))
    header = ["sigma", "m", "phi0", "Z", "M_inf"]
    stateio.write_csv(run.file("stationary.csv", "stationary-table"), header, rows)
    print(",".join(header))
    for row in rows:
        print(",".join(f"{v:.17g}" for v in row))
    return EXIT_OK


def cmd_stability(cfg: RunConfig, run: RunDir, args) -> int:
    _, kernel, shifts, act, params = build_model(cfg)
    if args.dump_kernel:
        stateio.write_kernel_csv(run.file("kernel.csv", "kernel-samples"), kernel)
    hom = solve_stationary(act, kernel.W0, params.B, params.sigma)
    table = dispersion(kernel, shifts, hom, cfg.k_max)
    stateio.write_dispersion_csv(run.file("dispersion.csv", "dispersion-table"), table)
    sigma_c = critical_sigma(kernel, shifts, act, kernel.W0, params.B,
                             (cfg.sweep.sigma_lo, cfg.sweep.sigma_hi), k_max=cfg.k_max)
    stateio.write_csv(run.file("stability_summary.csv", "stability-summary"),
                      ["sigma_c"], [(sigma_c,)])
    print(f"sigma_c,{sigma_c:.17g}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, run: RunDir, args) -> int:
    grid, kernel, shifts, act, params = build_model(cfg)
    rng = np.random.default_rng(cfg.seed)
    state = experiments.make_initial_state(
        cfg.sweep.init, act, kernel, params.sigma, grid, cfg.grid.n_s,
        cfg.grid.s_max, params, rng, cfg.sweep.perturb_amplitude)
    dump_every = args.dump_every
    next_dump = [dump_every] if dump_every else [float("inf")]
    counter = [0]

    def on_step(st: FieldState, k: int, rate: float):
        if st.t >= next_dump[0]:
            counter[0] += 1
            stateio.write_state(st, run.file(f"state_{counter[0]:04d}.gcnf", "state-dump"))
            next_dump[0] += dump_every

    report = run_to_stationary(state, params, kernel, shifts, act, callback=on_step)
    stateio.write_state(state, run.file("state_final.gcnf", "state-dump"))
    if args.slice_s is not None:
        stateio.slice_csv(run.file("f_slice.csv", "density-slice"), state,
                          s_value=args.slice_s)
    stateio.write_csv(run.file("run_report.csv", "run-report"),
                      ["final_time", "final_rate", "stop_reason", "steps"],
                      [(report.final_time, report.final_rate, report.stop_reason,
                        report.steps)])
    print(f"stopped: {report.stop_reason} at t={report.final_time:.1f} ms "
          f"(rate {report.final_rate:.3e})")
    return EXIT_OK


def cmd_bifurcate(cfg: RunConfig, run: RunDir, args) -> int:
    _, kernel, shifts, act, params = build_model(cfg)
    sigmas = _sigma_grid(cfg)
    if len(sigmas) < 20:
        print(f"warning: sweep uses only {len(sigmas)} sigma points (desk scale)",
              file=sys.stderr)

    def hook(sigma: float, state: FieldState, report):
        if args.dump_states:
            stateio.write_state(state, run.file(f"state_sigma_{sigma:.6g}.gcnf",
                                                "state-dump"))

    records = bifurcation_sweep(
        cfg.sweep.direction, sigmas, cfg.sweep.init, params, kernel, shifts, act,
        cfg.grid.n_s, cfg.grid.s_max, seed=cfg.seed,
        perturb_amplitude=cfg.sweep.perturb_amplitude, state_hook=hook,
        min_points=3)
    stateio.write_branch_csv(run.file(f"branch_{cfg.sweep.direction}.csv", "branch"),
                             records)
    trans = experiments.detect_transition(records)
    if trans is None:
        print("no transition detected")
    else:
        print(f"transition sigma*={trans[0]:.6g} jump={trans[1]:.6g}")
    return EXIT_OK


def cmd_replay(cfg: RunConfig, run: RunDir, args) -> int:
    grid, kernel, shifts, act, params = build_model(cfg)
    rng = np.random.default_rng(cfg.seed)
    if args.trajectory:
        traj = load_trajectory_csv(args.trajectory, cfg.replay.radius_cm)
    else:
        traj = synth_trajectory(cfg.replay.duration_ms, cfg.replay.radius_cm,
                                cfg.seed, cfg.replay.sample_dt_ms)
    save_trajectory_csv(traj, run.file("trajectory.csv", "trajectory"))

    state = experiments.make_initial_state("random_deltas", act, kernel, params.sigma,
                                           grid, cfg.grid.n_s, cfg.grid.s_max,
                                           params, rng)
    from dataclasses import replace
    stab = replace(params, alpha=0.0, t_min=cfg.replay.stabilize_ms,
                   t_max=max(cfg.replay.stabilize_ms, params.t_max))
    run_to_stationary(state, stab, kernel, shifts, act)
    stateio.write_state(state, run.file("state_stabilized.gcnf", "state-dump"))

    events = replay(state, params, kernel, shifts, act, traj,
                    probe_cell=(cfg.replay.probe_x, cfg.replay.probe_y),
                    threshold=cfg.replay.threshold)
    stateio.write_events_csv(run.file("events.csv", "events"), events)
    frac = len(events) / len(traj.t)
    print(f"{len(events)} events over {len(traj.t)} samples (fraction {frac:.3f})")
    return EXIT_OK


def cmd_particles(cfg: RunConfig, run: RunDir, args) -> int:
    act = make_activation(cfg)
    p = cfg.particles
    params = microscopic.ParticleParams(tau=cfg.solver.tau, sigma=cfg.solver.sigma,
                                        B=cfg.solver.B)
    if p.n == 1:
        big = sample_kernel(TorusGrid(cfg.grid.n), cfg.kernel.A, cfg.kernel.a,
                            cfg.kernel.b)
        ens = microscopic.ParticleEnsemble(p.M, cfg.seed, W0=big.W0)
        kernel = shifts = None
    else:
        grid = TorusGrid(p.n)
        kernel = sample_kernel(grid, cfg.kernel.A, cfg.kernel.a, cfg.kernel.b)
        shifts = ShiftSet(grid, min(cfg.shift.z_cells, grid.n - 1))
        ens = microscopic.ParticleEnsemble(p.M, cfg.seed, grid=grid)
    record_every = max(1, int(np.ceil(p.T / p.dt / 5000)))
    times, means = microscopic.run_particles(ens, params, kernel, shifts, act,
                                             p.dt, p.T, record_every=record_every)
    stateio.write_csv(run.file("particle_means.csv", "particle-means"),
                      ["t_ms", "mean"], zip(times.tolist(), means.tolist()))
    dens = microscopic.empirical_density(ens, p.bins, cfg.grid.s_max).mean(axis=1)
    centers = (np.arange(p.bins) + 0.5) * cfg.grid.s_max / p.bins
    stateio.write_csv(run.file("particle_histogram.csv", "particle-histogram"),
                      ["s", "f_beta1", "f_beta2", "f_beta3", "f_beta4"],
                      [(c, *dens[:, i]) for i, c in enumerate(centers)])
    print(f"final mean activity {means[-1] if len(means) else float(ens.s.mean()):.6g}")
    return EXIT_OK


def cmd_refine(cfg: RunConfig, run: RunDir, args) -> int:
    act = make_activation(cfg)
    _, _, _, _, params = build_model(cfg)
    rows = refinement_study(cfg.refine.n_list, cfg.refine.t_eval, params, act,
                            {"A": cfg.kernel.A, "a": cfg.kernel.a, "b": cfg.kernel.b},
                            z=cfg.refine.z, s_max=cfg.grid.s_max, seed=cfg.seed)
    stateio.write_refinement_csv(run.file("refinement.csv", "refinement"), rows)
    for r in rows:
        print(f"n={r.n} L1={r.l1:.4g} L2={r.l2:.4g} OOC_L1={r.ooc_l1:.3g} "
              f"OOC_L2={r.ooc_l2:.3g}")
    return EXIT_OK


def cmd_relax(cfg: RunConfig, run: RunDir, args) -> int:
    slopes_mean, slopes_l1, curve = relaxation_study(
        cfg.relax.runs, seed=cfg.seed, sigma=cfg.solver.sigma, W0=cfg.relax.W0,
        B=cfg.solver.B, epsilon=cfg.activation.epsilon, ns=cfg.relax.n_s,
        s_bound=cfg.relax.s_bound, t_end=cfg.relax.t_end)
    stateio.write_csv(run.file("relaxation.csv", "relaxation"),
                      ["run", "slope_mean_diff", "slope_l1"],
                      [(i, a, b) for i, (a, b) in enumerate(zip(slopes_mean, slopes_l1))])
    ts, e_mean, e_l1 = curve
    stateio.write_csv(run.file("relaxation_curve.csv", "relaxation-curve"),
                      ["t_ms", "mean_err", "l1_err"],
                      zip(ts.tolist(), e_mean.tolist(), e_l1.tolist()))
    print(f"mean slopes: {np.mean(slopes_mean):.4g} (mean difference), "
          f"{np.mean(slopes_l1):.4g} (L1)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

_FLAG_MAP = {
    "sigma": "solver.sigma",
    "alpha": "solver.alpha",
    "t_min": "solver.t_min",
    "t_max": "solver.t_max",
    "n": "grid.n",
    "n_s": "grid.n_s",
    "direction": "sweep.direction",
    "sigma_lo": "sweep.sigma_lo",
    "sigma_hi": "sweep.sigma_hi",
    "points": "sweep.points",
    "init": "sweep.init",
    "M": "particles.M",
    "particles_n": "particles.n",
    "dt": "particles.dt",
    "T": "particles.T",
    "t_eval": "refine.t_eval",
    "runs": "relax.runs",
}


def _add_common(sp):
    sp.add_argument("--config", help="TOML config file")
    sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override a config entry (TOML literal value)")
    sp.add_argument("--output-dir", help="artifact directory")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gridfield",
                                 description="noisy grid-cell neural-field engine")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("stationary", help="homogeneous stationary states over a sigma range")
    _add_common(sp)
    for flag in ("--sigma-lo", "--sigma-hi", "--points"):
        sp.add_argument(flag, type=float if "sigma" in flag else int)

    sp = sub.add_parser("stability", help="dispersion table and critical sigma")
    _add_common(sp)
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--sigma-lo", type=float)
    sp.add_argument("--sigma-hi", type=float)
    sp.add_argument("--k-max", type=int, dest="k_max_flag")
    sp.add_argument("--dump-kernel", action="store_true",
                    help="export the sampled kernel as CSV")

    sp = sub.add_parser("simulate", help="evolve the 4-population system to stationarity")
    _add_common(sp)
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--init")
    sp.add_argument("--n", type=int)
    sp.add_argument("--n-s", type=int, dest="n_s")
    sp.add_argument("--t-min", type=float, dest="t_min")
    sp.add_argument("--t-max", type=float, dest="t_max")
    sp.add_argument("--dump-every", type=float, default=0.0,
                    help="dump cadence in ms (0 = final state only)")
    sp.add_argument("--slice-s", type=float, default=None,
                    help="also export the f(x, y, s*) slice as CSV")

    sp = sub.add_parser("bifurcate", help="continuation sweep over sigma")
    _add_common(sp)
    sp.add_argument("--direction")
    sp.add_argument("--sigma-lo", type=float)
    sp.add_argument("--sigma-hi", type=float)
    sp.add_argument("--points", type=int)
    sp.add_argument("--init")
    sp.add_argument("--n", type=int)
    sp.add_argument("--n-s", type=int, dest="n_s")
    sp.add_argument("--dump-states", action="store_true")
    sp.add_argument("--full-scale", action="store_true",
                    help="production 64^3 grid and >= 100 sigma points")

    sp = sub.add_parser("replay", help="trajectory replay with firing events")
    _add_common(sp)
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--trajectory", help="CSV of t_ms,x_cm,y_cm (default: synthetic)")
    sp.add_argument("--n", type=int)
    sp.add_argument("--n-s", type=int, dest="n_s")

    sp = sub.add_parser("particles", help="reflected particle-system oracle")
    _add_common(sp)
    sp.add_argument("--particles-n", type=int, help="sheet cells per dim (1 = all-to-all)")
    sp.add_argument("--M", type=int)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--T", type=float)
    sp.add_argument("--sigma", type=float)

    sp = sub.add_parser("refine", help="grid refinement study")
    _add_common(sp)
    sp.add_argument("--t-eval", type=float, dest="t_eval")
    sp.add_argument("--n-list", help="comma-separated grid sizes")
    sp.add_argument("--sigma", type=float)

    sp = sub.add_parser("relax", help="relaxation-rate study of the 1-D problem")
    _add_common(sp)
    sp.add_argument("--runs", type=int)
    sp.add_argument("--sigma", type=float)
    return ap


_COMMANDS = {
    "stationary": cmd_stationary,
    "stability": cmd_stability,
    "simulate": cmd_simulate,
    "bifurcate": cmd_bifurcate,
    "replay": cmd_replay,
    "particles": cmd_particles,
    "refine": cmd_refine,
    "relax": cmd_relax,
}


def _config_from_args(args) -> RunConfig:
    overrides = [parse_override(s) for s in args.set]
    for dest, path in _FLAG_MAP.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides.append((path, value))
    if getattr(args, "n_list", None):
        overrides.append(("refine.n_list", [int(v) for v in args.n_list.split(",")]))
    if args.output_dir is not None:
        overrides.append(("output_dir", args.output_dir))
    if args.seed is not None:
        overrides.append(("seed", args.seed))
    if args.threads is not None:
        overrides.append(("threads", args.threads))
    if getattr(args, "k_max_flag", None) is not None:
        overrides.append(("k_max", args.k_max_flag))
    cfg = parse_config(args.config, overrides)
    if getattr(args, "full_scale", False):
        cfg.grid.n = max(cfg.grid.n, 64)
        cfg.grid.n_s = max(cfg.grid.n_s, 64)
        cfg.sweep.points = max(cfg.sweep.points, 100)
    return cfg


def main(argv=None) -> int:
    # the TBB probe warns on older TBB; the workqueue layer is always safe
    os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    threads = cfg.threads or int(os.environ.get("GRIDFIELD_THREADS", "0"))
    if threads > 0:
        import numba
        numba.set_num_threads(threads)

    run = RunDir(cfg.output_dir)
    with open(run.file("config.echo.toml", "config-echo"), "w") as fh:
        fh.write(echo_config(cfg))
    try:
        return _COMMANDS[args.command](cfg, run, args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NoCrossingError, MultipleCrossingError, ConsistencyError) as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    except (SolverError, SpectralError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    finally:
        run.write_manifest()


if __name__ == "__main__":
    sys.exit(main())
