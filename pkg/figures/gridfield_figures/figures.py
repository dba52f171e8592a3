"""Figure renderers, one per figure id.

Each renderer reads artifacts from an input directory by their conventional
names, draws one deterministic image (Agg backend, fixed DPI) and writes a
sidecar of exactly the plotted values next to it.
"""

from __future__ import annotations

import glob
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import InputError, Sidecar, column, read_csv, read_state

DPI = 150

BRANCH_HEADER = "sigma,max_mean,min_mean,pattern,stop_reason,final_time"
EVENTS_HEADER = "t_ms,x_cm,y_cm,rate"
TRAJ_HEADER = "t_ms,x_cm,y_cm"
DISPERSION_HEADER = "k1,k2,What,shift,F"
RELAX_HEADER = "t_ms,mean_err,l1_err"
REFINE_HEADER = "n,L1,L2,OOC_L1,OOC_L2"
SUMMARY_HEADER = "sigma_c"


def _save(fig, out):
    tmp = f"{out}.tmp.png"
    fig.savefig(tmp, dpi=DPI)
    plt.close(fig)
    os.replace(tmp, out)


def _fft_sorted(field):
    """Reorder an FFT-ordered square field to ascending coordinates."""
    return np.fft.fftshift(field)


def _coords(n):
    return np.fft.fftshift(np.fft.fftfreq(n, d=1.0 / n)) / n


def _state_slice(f, s_value, ns_domain, beta):
    ns = f.shape[3]
    ds = ns_domain / ns
    j = min(int(s_value / ds), ns - 1)
    return f[beta, :, :, j], j


def render_density_slice(indir, out, state="state_final.gcnf", s_value=0.0,
                         beta=0, s_max=1.3):
    """Heatmap of f^beta(x, y, s*) from a GCNF1 dump."""
    f, t = read_state(os.path.join(indir, state))
    sl, j = _state_slice(f, s_value, s_max, beta)
    n = sl.shape[0]
    x = _coords(n)
    fig, ax = plt.subplots(figsize=(5, 4.4))
    im = ax.pcolormesh(x, x, _fft_sorted(sl).T, shading="nearest", cmap="viridis")
    ax.plot([0.0], [0.0], "o", color="lime", markersize=5)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(f"density slice s-cell {j}, beta {beta + 1}, t={t:.0f} ms")
    fig.colorbar(im, ax=ax)
    _save(fig, out)
    side = Sidecar()
    rows = [(x[i], x[k], _fft_sorted(sl)[i, k]) for i in range(n) for k in range(n)]
    side.section(f"{state}:beta={beta}:s_cell={j}", "x,y,f", rows)
    side.write(out)


def render_firing_map(indir, out):
    """Trajectory path with firing events, enclosure to scale."""
    traj_lines, traj_rows = read_csv(os.path.join(indir, "trajectory.csv"), TRAJ_HEADER)
    ev_lines, ev_rows = read_csv(os.path.join(indir, "events.csv"), EVENTS_HEADER)
    fig, ax = plt.subplots(figsize=(4.6, 4.6))
    ax.plot(column(traj_rows, 1), column(traj_rows, 2), color="0.6", linewidth=0.4)
    if ev_rows:
        ax.plot(column(ev_rows, 1), column(ev_rows, 2), ".", color="red",
                markersize=2.5)
    radius = np.hypot(column(traj_rows, 1), column(traj_rows, 2)).max()
    circle = plt.Circle((0, 0), radius, fill=False, color="black", linewidth=0.8)
    ax.add_patch(circle)
    ax.set_aspect("equal")
    ax.set_xlabel("x (cm)")
    ax.set_ylabel("y (cm)")
    ax.set_title(f"firing field ({len(ev_rows)} events)")
    _save(fig, out)
    side = Sidecar()
    side.echo_file("trajectory.csv", traj_lines)
    side.echo_file("events.csv", ev_lines)
    side.write(out)


def render_relaxation(indir, out):
    """Error-vs-time decay curves of the 1-D relaxation run, log scale."""
    lines, rows = read_csv(os.path.join(indir, "relaxation_curve.csv"), RELAX_HEADER)
    t = column(rows, 0)
    fig, ax = plt.subplots(figsize=(5.2, 4))
    ax.semilogy(t, np.maximum(column(rows, 1), 1e-300), label="|mean - mean_inf|")
    ax.semilogy(t, np.maximum(column(rows, 2), 1e-300), label="L1 difference")
    ax.set_xlabel("t (ms)")
    ax.set_ylabel("error")
    ax.set_title("relaxation to the stationary state")
    ax.legend()
    _save(fig, out)
    side = Sidecar()
    side.echo_file("relaxation_curve.csv", lines)
    side.write(out)


def render_dispersion(indir, out):
    """Contour map of F(k) over the mode lattice with its maxima marked."""
    lines, rows = read_csv(os.path.join(indir, "dispersion.csv"), DISPERSION_HEADER)
    k1 = column(rows, 0)
    k2 = column(rows, 1)
    F = column(rows, 4)
    size = int(np.sqrt(len(F)))
    grid = F.reshape(size, size)
    kmax = int(k1.max())
    ks = np.arange(-kmax, kmax + 1)
    fig, ax = plt.subplots(figsize=(5.4, 4.4))
    im = ax.contourf(ks, ks, grid.T, levels=24, cmap="viridis")
    top = F.max()
    sel = F >= top - 1e-9 * abs(top)
    ax.plot(k1[sel], k2[sel], "o", color="black", markersize=4)
    ax.set_xlabel("k1")
    ax.set_ylabel("k2")
    ax.set_title("dispersion quantity F(k)")
    fig.colorbar(im, ax=ax)
    _save(fig, out)
    side = Sidecar()
    side.echo_file("dispersion.csv", lines)
    side.write(out)


def _dominant_mode_sets(k1, k2, F):
    """Panel combinations: strongest mode, axis pair, full dominant set."""
    top = F.max()
    sel = np.flatnonzero(F >= top * (1 - 1e-6))
    dominant = [(int(k1[i]), int(k2[i])) for i in sel]
    quadrant = sorted({m for m in dominant if m[0] >= 0 and m[1] >= 0})
    first = quadrant[0] if quadrant else dominant[0]
    axis_pair = [first, (first[1], first[0])]
    full = []
    for m in dominant:
        if all(m[0] * d[1] - m[1] * d[0] != 0 for d in full):
            full.append(m)
    return [[first], axis_pair, full[:3] if len(full) >= 3 else full]


def render_mode_patterns(indir, out, n=64):
    """Cosine sums of the dominant F(k) modes, one panel per combination."""
    lines, rows = read_csv(os.path.join(indir, "dispersion.csv"), DISPERSION_HEADER)
    k1 = column(rows, 0)
    k2 = column(rows, 1)
    F = column(rows, 4)
    mode_sets = _dominant_mode_sets(k1, k2, F)
    x = (np.arange(n) + 0.5) / n - 0.5
    fig, axes = plt.subplots(1, len(mode_sets), figsize=(4 * len(mode_sets), 3.6))
    axes = np.atleast_1d(axes)
    side = Sidecar()
    side.echo_file("dispersion.csv", lines)
    for ax, modes in zip(axes, mode_sets):
        field = np.zeros((n, n))
        for m1, m2 in modes:
            field += np.cos(2 * np.pi * (m1 * x[:, None] + m2 * x[None, :]))
        ax.pcolormesh(x, x, field.T, shading="nearest", cmap="viridis")
        ax.set_title(" + ".join(f"2pi({m1},{m2})" for m1, m2 in modes), fontsize=8)
        ax.set_aspect("equal")
        side.section(f"mode_sum:{modes}", "x,y,value",
                     [(x[i], x[j], field[i, j]) for i in range(0, n, n // 8)
                      for j in range(0, n, n // 8)])
    _save(fig, out)
    side.write(out)


def render_bifurcation(indir, out):
    """Branch diagram: l2r and r2l sweeps with the sigma_c threshold marker."""
    side = Sidecar()
    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    styles = {"l2r": ("-", "o"), "r2l": ("--", "s")}
    found = []
    for direction, (ls, marker) in styles.items():
        path = os.path.join(indir, f"branch_{direction}.csv")
        if not os.path.exists(path):
            continue
        lines, rows = read_csv(path, BRANCH_HEADER)
        side.echo_file(f"branch_{direction}.csv", lines)
        sigma = column(rows, 0)
        order = np.argsort(sigma)
        ax.plot(sigma[order], column(rows, 1)[order], ls, marker=marker,
                markersize=3, label=f"max <f> ({direction})")
        ax.plot(sigma[order], column(rows, 2)[order], ls, marker=marker,
                markersize=3, alpha=0.6, label=f"min <f> ({direction})")
        found.append(direction)
    if not found:
        raise InputError(f"no branch_l2r.csv or branch_r2l.csv in {indir}")
    sum_path = os.path.join(indir, "stability_summary.csv")
    if os.path.exists(sum_path):
        lines, rows = read_csv(sum_path, SUMMARY_HEADER)
        side.echo_file("stability_summary.csv", lines)
        sigma_c = float(rows[0][0])
        ax.axvline(sigma_c, color="blue", linewidth=0.8)
        ax.plot([sigma_c], [ax.get_ylim()[0]], "o", color="blue", clip_on=False,
                label="sigma_c (noisy threshold)")
    ax.set_xlabel("sigma")
    ax.set_ylabel("spatial extremes of <f>")
    ax.set_title("bifurcation branches " + "/".join(found))
    ax.legend(fontsize=7)
    _save(fig, out)
    side.write(out)


def render_pattern_gallery(indir, out, s_value=0.0, beta=0, s_max=1.3):
    """One panel per state dump: f^beta(x, y, s*) for every state_*.gcnf."""
    paths = sorted(glob.glob(os.path.join(indir, "state_*.gcnf")))
    if not paths:
        raise InputError(f"no state_*.gcnf dumps in {indir}")
    fig, axes = plt.subplots(1, len(paths), figsize=(3.6 * len(paths), 3.4))
    axes = np.atleast_1d(axes)
    side = Sidecar()
    for ax, path in zip(axes, paths):
        f, t = read_state(path)
        sl, j = _state_slice(f, s_value, s_max, beta)
        n = sl.shape[0]
        x = _coords(n)
        ax.pcolormesh(x, x, _fft_sorted(sl).T, shading="nearest", cmap="viridis")
        ax.set_title(os.path.basename(path), fontsize=7)
        ax.set_aspect("equal")
        side.section(f"{os.path.basename(path)}:beta={beta}:s_cell={j}", "x,y,f",
                     [(x[i], x[k], _fft_sorted(sl)[i, k])
                      for i in range(n) for k in range(n)])
    _save(fig, out)
    side.write(out)


def render_refinement(indir, out):
    """L1/L2 error panels of the grid refinement study, log-log."""
    lines, rows = read_csv(os.path.join(indir, "refinement.csv"), REFINE_HEADER)
    n = column(rows, 0)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.2, 3.6))
    ax1.loglog(n, column(rows, 1), "o-", label="L1")
    ax1.loglog(n, column(rows, 2), "s-", label="L2")
    ax1.set_xlabel("n")
    ax1.set_ylabel("error vs finest grid")
    ax1.legend()
    ooc1 = column(rows, 3)
    ooc2 = column(rows, 4)
    mask = ~np.isnan(ooc1)
    ax2.plot(n[mask], ooc1[mask], "o-", label="OOC L1")
    ax2.plot(n[mask], ooc2[mask], "s-", label="OOC L2")
    ax2.set_xlabel("n")
    ax2.set_ylabel("order of convergence")
    ax2.legend()
    fig.suptitle("grid refinement")
    _save(fig, out)
    side = Sidecar()
    side.echo_file("refinement.csv", lines)
    side.write(out)


RENDERERS = {
    "density-slice": render_density_slice,
    "firing-map": render_firing_map,
    "relaxation": render_relaxation,
    "dispersion": render_dispersion,
    "mode-patterns": render_mode_patterns,
    "bifurcation": render_bifurcation,
    "pattern-gallery": render_pattern_gallery,
    "refinement": render_refinement,
}
