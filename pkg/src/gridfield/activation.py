"""Firing-rate modulation functions and their derivatives.

Four variants: the positive part (relu), two smooth regularisations of it
(smooth_eps, smooth_sqrt) and a logistic sigmoid. All evaluate elementwise on
scalars or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

KINDS = ("relu", "smooth_eps", "smooth_sqrt", "sigmoid")

# Universal dip of the smooth_eps derivative: min Phi_eps' = (1 - sqrt(2)*4/3^1.5)/2
# ~= -0.04434 at x = -sqrt(2*eps), for every eps > 0. The floor sits just below it;
# the solver-side admissibility check (Phi'*W0 < 1) is the binding condition.
DEFAULT_SLOPE_FLOOR = -0.05


@dataclass(frozen=True)
class Activation:
    """Modulation function Phi selected by kind.

    kind        one of relu | smooth_eps | smooth_sqrt | sigmoid
    epsilon     regularisation parameter (smooth kinds)
    gain        logistic steepness (sigmoid)
    slope_floor minimum admissible derivative over the construction check range
    """

    kind: str
    epsilon: float = 0.0
    gain: float = 0.0
    slope_floor: float = field(default=DEFAULT_SLOPE_FLOOR, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if self.kind in ("smooth_eps", "smooth_sqrt") and not self.epsilon > 0:
            raise ValueError(f"{self.kind} requires epsilon > 0, got {self.epsilon}")
        if self.kind == "sigmoid" and not self.gain > 0:
            raise ValueError(f"sigmoid requires gain > 0, got {self.gain}")
        if self.kind == "smooth_eps":
            # numerical slope check over the scale-invariant dip region
            r = 10.0 * np.sqrt(self.epsilon)
            x = np.linspace(-r, r, 4001)
            dmin = derivative(self, x).min()
            if dmin < self.slope_floor:
                raise ValueError(
                    f"smooth_eps derivative dips to {dmin:.4g} on [{-r:.3g},{r:.3g}], "
                    f"below the slope floor {self.slope_floor:.4g}"
                )


def evaluate(a: Activation, x):
    """Phi(x) for the selected variant."""
    x = np.asarray(x, dtype=float)
    if a.kind == "relu":
        out = np.maximum(x, 0.0)
    elif a.kind == "smooth_eps":
        out = 0.5 * x * (1.0 + x / np.sqrt(x * x + a.epsilon))
    elif a.kind == "smooth_sqrt":
        out = 0.5 * (x + np.sqrt(x * x + a.epsilon))
    else:  # sigmoid
        out = expit(a.gain * x)
    return out if out.ndim else float(out)


def derivative(a: Activation, x):
    """Analytic Phi'(x); relu uses the midpoint convention 0.5 at x=0."""
    x = np.asarray(x, dtype=float)
    if a.kind == "relu":
        out = np.where(x > 0, 1.0, np.where(x < 0, 0.0, 0.5))
    elif a.kind == "smooth_eps":
        # d/dx [0.5x + 0.5 x^2 (x^2+eps)^{-1/2}]
        out = 0.5 + 0.5 * x * (x * x + 2.0 * a.epsilon) / (x * x + a.epsilon) ** 1.5
    elif a.kind == "smooth_sqrt":
        out = 0.5 * (1.0 + x / np.sqrt(x * x + a.epsilon))
    else:  # sigmoid
        y = expit(a.gain * x)
        out = a.gain * y * (1.0 - y)
    return out if out.ndim else float(out)
