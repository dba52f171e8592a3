"""Animal trajectories in a circular enclosure: synthetic generation and I/O.

Positions are in cm, times in ms; velocities derived from the samples are in
cm/ms. Synthetic paths use a random-walk heading with an Ornstein-Uhlenbeck
speed, reflected at the enclosure wall, as a stand-in for recorded data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Trajectory:
    """Timestamped positions inside a circular enclosure."""

    t: np.ndarray        # ms, strictly increasing
    x: np.ndarray        # cm
    y: np.ndarray        # cm
    radius: float        # cm
    _seg_v: np.ndarray = field(init=False, repr=False)
    _seg_theta: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if not (len(self.t) == len(self.x) == len(self.y)):
            raise ValueError("t, x, y must have equal length")
        if len(self.t) < 2:
            raise ValueError("trajectory needs at least two samples")
        if not np.all(np.diff(self.t) > 0):
            raise ValueError("timestamps must be strictly increasing")
        r = np.hypot(self.x, self.y)
        if r.max() > self.radius * (1 + 1e-9):
            raise ValueError(
                f"point at r={r.max():.3f} cm outside the enclosure radius {self.radius}"
            )
        dt = np.diff(self.t)
        dxs = np.diff(self.x)
        dys = np.diff(self.y)
        self._seg_v = np.hypot(dxs, dys) / dt
        self._seg_theta = np.arctan2(dys, dxs)

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def max_gap(self) -> float:
        return float(np.diff(self.t).max())

    def _segment(self, t: float) -> int:
        if t < self.t[0] or t > self.t[-1]:
            raise ValueError(f"t={t} outside trajectory span [{self.t[0]}, {self.t[-1]}]")
        return min(int(np.searchsorted(self.t, t, side="right") - 1), len(self.t) - 2)

    def velocity_at(self, t: float) -> tuple[float, float]:
        """(speed cm/ms, heading rad) from finite differences of the positions."""
        i = self._segment(t)
        return float(self._seg_v[i]), float(self._seg_theta[i])

    def position_at(self, t: float) -> tuple[float, float]:
        """Linear interpolation between samples."""
        i = self._segment(t)
        lam = (t - self.t[i]) / (self.t[i + 1] - self.t[i])
        return (float(self.x[i] + lam * (self.x[i + 1] - self.x[i])),
                float(self.y[i] + lam * (self.y[i + 1] - self.y[i])))


def synth_trajectory(duration_ms: float, radius_cm: float, seed: int,
                     sample_dt_ms: float = 20.0, mean_speed: float = 0.02,
                     speed_relax_ms: float = 1000.0, speed_std: float = 0.008,
                     heading_diffusion: float = 5e-4) -> Trajectory:
    """Smooth random path inside the disc, sampled every sample_dt_ms.

    mean_speed and speed_std are in cm/ms (0.02 cm/ms = 20 cm/s);
    heading_diffusion is in rad^2/ms.
    """
    if not duration_ms > 0:
        raise ValueError("duration must be positive")
    rng = np.random.default_rng(seed)
    nsteps = int(np.ceil(duration_ms / sample_dt_ms))
    t = np.arange(nsteps + 1) * sample_dt_ms
    xs = np.empty(nsteps + 1)
    ys = np.empty(nsteps + 1)
    xs[0] = ys[0] = 0.0
    theta = rng.uniform(-np.pi, np.pi)
    speed = mean_speed
    for k in range(nsteps):
        theta += np.sqrt(2.0 * heading_diffusion * sample_dt_ms) * rng.standard_normal()
        speed += (-(speed - mean_speed) / speed_relax_ms * sample_dt_ms
                  + speed_std * np.sqrt(2.0 * sample_dt_ms / speed_relax_ms)
                  * rng.standard_normal())
        speed = max(speed, 0.2 * mean_speed)
        nx = xs[k] + speed * sample_dt_ms * np.cos(theta)
        ny = ys[k] + speed * sample_dt_ms * np.sin(theta)
        if np.hypot(nx, ny) > 0.97 * radius_cm:
            # bounce the heading off the wall normal and retry inward
            phi = np.arctan2(ny, nx)
            theta = np.pi + 2.0 * phi - theta
            nx = xs[k] + speed * sample_dt_ms * np.cos(theta)
            ny = ys[k] + speed * sample_dt_ms * np.sin(theta)
            rr = np.hypot(nx, ny)
            if rr > 0.99 * radius_cm:
                nx *= 0.99 * radius_cm / rr
                ny *= 0.99 * radius_cm / rr
        xs[k + 1] = nx
        ys[k + 1] = ny
    return Trajectory(t=t, x=xs, y=ys, radius=radius_cm)


def save_trajectory_csv(traj: Trajectory, path):
    with open(path, "w") as fh:
        fh.write("t_ms,x_cm,y_cm\n")
        for t, x, y in zip(traj.t, traj.x, traj.y):
            fh.write(f"{t:.17g},{x:.17g},{y:.17g}\n")


def load_trajectory_csv(path, radius: float | None = None) -> Trajectory:
    data = np.genfromtxt(path, delimiter=",", names=True)
    t, x, y = data["t_ms"], data["x_cm"], data["y_cm"]
    if radius is None:
        radius = float(np.hypot(x, y).max())
    return Trajectory(t=t, x=x, y=y, radius=radius)
