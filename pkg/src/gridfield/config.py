"""Run configuration: strict TOML parsing, defaults, overrides and echo.

Unknown keys are rejected with their full path so parameter names cannot
drift silently. Defaults mirror the production setup: tau = 10 ms, B = 3,
64 x 64 x 64 grid, s on [0, 1.3].
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields

if sys.version_info >= (3, 11):
    import tomllib as toml
else:
    import tomli as toml


class ConfigError(ValueError):
    """Invalid, out-of-range or unknown configuration entry."""


@dataclass
class GridCfg:
    n: int = 64
    n_s: int = 64
    s_max: float = 1.3


@dataclass
class KernelCfg:
    A: float = 0.005 * 128**2
    a: float = 10.0
    b: float = 50.0


@dataclass
class ShiftCfg:
    z_cells: int = 1


@dataclass
class ActivationCfg:
    kind: str = "smooth_eps"
    epsilon: float = 0.01
    gain: float = 15.0


@dataclass
class SolverCfg:
    tau: float = 10.0
    sigma: float = 0.015
    B: float = 3.0
    alpha: float = 0.0
    cfl: float = 0.9
    t_min: float = 2000.0
    t_max: float = 6000.0
    stop_tol: float = 1e-8


@dataclass
class SweepCfg:
    direction: str = "l2r"
    sigma_lo: float = 0.005
    sigma_hi: float = 0.05
    points: int = 20
    init: str = "random_deltas"
    perturb_amplitude: float = 0.02


@dataclass
class ReplayCfg:
    radius_cm: float = 80.0
    duration_ms: float = 300000.0
    sample_dt_ms: float = 20.0
    threshold: float = 0.0
    probe_x: int = 0
    probe_y: int = 0
    stabilize_ms: float = 2000.0


@dataclass
class ParticlesCfg:
    n: int = 1          # sheet cells per dim; 1 = homogeneous all-to-all
    M: int = 10000
    dt: float = 0.1
    T: float = 500.0
    bins: int = 64


@dataclass
class RefineCfg:
    n_list: list = field(default_factory=lambda: [32, 64, 128])
    t_eval: float = 50.0
    z: float = 1.0 / 32.0


@dataclass
class RelaxCfg:
    runs: int = 20
    n_s: int = 512
    s_bound: float = 3.0
    W0: float = -20.6711
    t_end: float = 300.0


@dataclass
class RunConfig:
    seed: int = 0
    output_dir: str = "out"
    threads: int = 0    # 0 = numba default
    k_max: int = 10
    grid: GridCfg = field(default_factory=GridCfg)
    kernel: KernelCfg = field(default_factory=KernelCfg)
    shift: ShiftCfg = field(default_factory=ShiftCfg)
    activation: ActivationCfg = field(default_factory=ActivationCfg)
    solver: SolverCfg = field(default_factory=SolverCfg)
    sweep: SweepCfg = field(default_factory=SweepCfg)
    replay: ReplayCfg = field(default_factory=ReplayCfg)
    particles: ParticlesCfg = field(default_factory=ParticlesCfg)
    refine: RefineCfg = field(default_factory=RefineCfg)
    relax: RelaxCfg = field(default_factory=RelaxCfg)


_RANGES = {
    "seed": (lambda v: v >= 0, ">= 0"),
    "threads": (lambda v: v >= 0, ">= 0"),
    "k_max": (lambda v: v >= 1, ">= 1"),
    "grid.n": (lambda v: v >= 4 and v % 2 == 0, "even and >= 4"),
    "grid.n_s": (lambda v: v >= 8, ">= 8"),
    "grid.s_max": (lambda v: v > 0, "> 0"),
    "kernel.A": (lambda v: v > 0, "> 0"),
    "kernel.b": (lambda v: v > 0, "> 0"),
    "shift.z_cells": (lambda v: v >= 0, ">= 0"),
    "activation.kind": (lambda v: v in ("relu", "smooth_eps", "smooth_sqrt", "sigmoid"),
                        "one of relu|smooth_eps|smooth_sqrt|sigmoid"),
    "activation.epsilon": (lambda v: v > 0, "> 0"),
    "activation.gain": (lambda v: v > 0, "> 0"),
    "solver.tau": (lambda v: v > 0, "> 0"),
    "solver.sigma": (lambda v: v >= 0, ">= 0"),
    "solver.alpha": (lambda v: v >= 0, ">= 0"),
    "solver.cfl": (lambda v: 0 < v <= 1, "in (0, 1]"),
    "solver.t_min": (lambda v: v >= 0, ">= 0"),
    "solver.t_max": (lambda v: v > 0, "> 0"),
    "solver.stop_tol": (lambda v: v >= 0, ">= 0"),
    "sweep.direction": (lambda v: v in ("l2r", "r2l"), "l2r or r2l"),
    "sweep.sigma_lo": (lambda v: v > 0, "> 0"),
    "sweep.sigma_hi": (lambda v: v > 0, "> 0"),
    "sweep.points": (lambda v: v >= 3, ">= 3"),
    "sweep.init": (lambda v: v in ("random_deltas", "perturbed_homogeneous", "stripe_seeded"),
                   "a known initialization"),
    "sweep.perturb_amplitude": (lambda v: 0 < v < 1, "in (0, 1)"),
    "replay.radius_cm": (lambda v: v > 0, "> 0"),
    "replay.duration_ms": (lambda v: v > 0, "> 0"),
    "replay.sample_dt_ms": (lambda v: 0 < v <= 100, "in (0, 100]"),
    "replay.stabilize_ms": (lambda v: v >= 0, ">= 0"),
    "particles.n": (lambda v: v == 1 or (v >= 4 and v % 2 == 0), "1 or even >= 4"),
    "particles.M": (lambda v: v >= 1, ">= 1"),
    "particles.dt": (lambda v: v > 0, "> 0"),
    "particles.T": (lambda v: v > 0, "> 0"),
    "particles.bins": (lambda v: v >= 1, ">= 1"),
    "refine.t_eval": (lambda v: v > 0, "> 0"),
    "refine.z": (lambda v: v > 0, "> 0"),
    "relax.runs": (lambda v: v >= 1, ">= 1"),
    "relax.n_s": (lambda v: v >= 8, ">= 8"),
    "relax.s_bound": (lambda v: v > 0, "> 0"),
    "relax.t_end": (lambda v: v > 0, "> 0"),
}

_SECTIONS = {f.name: f for f in fields(RunConfig) if f.name not in ("seed", "output_dir", "threads", "k_max")}


def _coerce(path: str, value, target):
    if isinstance(target, bool) or isinstance(value, bool):
        raise ConfigError(f"{path}: booleans are not used in this schema")
    if isinstance(target, int):
        if isinstance(value, int):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise ConfigError(f"{path}: expected integer, got {value!r}")
    if isinstance(target, float):
        if isinstance(value, (int, float)):
            return float(value)
        raise ConfigError(f"{path}: expected number, got {value!r}")
    if isinstance(target, str):
        if isinstance(value, str):
            return value
        raise ConfigError(f"{path}: expected string, got {value!r}")
    if isinstance(target, list):
        if isinstance(value, list) and all(isinstance(v, int) for v in value):
            return list(value)
        raise ConfigError(f"{path}: expected list of integers, got {value!r}")
    raise ConfigError(f"{path}: unsupported value {value!r}")


def _check_range(path: str, value):
    rule = _RANGES.get(path)
    if rule is not None and not rule[0](value):
        raise ConfigError(f"{path}: value {value!r} out of range (must be {rule[1]})")


def _apply(cfg: RunConfig, path: str, value):
    parts = path.split(".")
    if len(parts) == 1:
        name = parts[0]
        if name not in ("seed", "output_dir", "threads", "k_max"):
            raise ConfigError(f"unknown key {name!r}")
        setattr(cfg, name, _coerce(name, value, getattr(cfg, name)))
        _check_range(name, getattr(cfg, name))
        return
    if len(parts) != 2 or parts[0] not in _SECTIONS:
        raise ConfigError(f"unknown key {path!r}")
    section = getattr(cfg, parts[0])
    if parts[1] not in {f.name for f in fields(section)}:
        raise ConfigError(f"unknown key {path!r}")
    setattr(section, parts[1], _coerce(path, value, getattr(section, parts[1])))
    _check_range(path, getattr(section, parts[1]))


def _validate(cfg: RunConfig):
    if cfg.solver.t_max < cfg.solver.t_min:
        raise ConfigError("solver.t_max: must be >= solver.t_min")
    if cfg.sweep.sigma_hi <= cfg.sweep.sigma_lo:
        raise ConfigError("sweep.sigma_hi: must be > sweep.sigma_lo")
    if cfg.shift.z_cells >= cfg.grid.n:
        raise ConfigError("shift.z_cells: must be < grid.n")
    for n in cfg.refine.n_list:
        if n < 4 or n % 2:
            raise ConfigError(f"refine.n_list: grid size {n} must be even and >= 4")


def parse_config(path=None, overrides=()) -> RunConfig:
    """Config from an optional TOML file plus dotted-path overrides."""
    cfg = RunConfig()
    if path is not None:
        with open(path, "rb") as fh:
            try:
                data = toml.load(fh)
            except toml.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        for key, value in data.items():
            if isinstance(value, dict):
                for sub, v in value.items():
                    _apply(cfg, f"{key}.{sub}", v)
            else:
                _apply(cfg, key, value)
    for key, value in overrides:
        _apply(cfg, key, value)
    _validate(cfg)
    return cfg


def parse_override(text: str) -> tuple[str, object]:
    """'section.key=value' with the value parsed as a TOML literal."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = toml.loads(f"v = {raw.strip()}")["v"]
    except toml.TOMLDecodeError as exc:
        raise ConfigError(f"override {text!r}: bad value ({exc})") from exc
    return key.strip(), value


def _toml_scalar(v) -> str:
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, float):
        return f"{v:.17g}" if v != int(v) or abs(v) >= 1e16 else f"{v:.1f}"
    if isinstance(v, list):
        return "[" + ", ".join(_toml_scalar(x) for x in v) + "]"
    return str(v)


def echo_config(cfg: RunConfig) -> str:
    """The effective configuration as TOML text (written before any compute)."""
    lines = []
    for name in ("seed", "output_dir", "threads", "k_max"):
        lines.append(f"{name} = {_toml_scalar(getattr(cfg, name))}")
    for name in _SECTIONS:
        lines.append("")
        lines.append(f"[{name}]")
        for key, value in asdict(getattr(cfg, name)).items():
            lines.append(f"{key} = {_toml_scalar(value)}")
    return "\n".join(lines) + "\n"
