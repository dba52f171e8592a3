"""Spatially homogeneous stationary states of the noisy neural-field system.

The stationary density is a Gaussian with variance sigma centered at the
stationary firing rate Phi0, truncated to s >= 0:

    f_inf(s) = (1/Z) exp(-(s - Phi0)^2 / (2 sigma)),
    Z = sqrt(pi sigma / 2) * (1 + erf(Phi0 / sqrt(2 sigma))),

with Phi0 = Phi(W0 * m + B) determined by the scalar consistency equation
m = Phi0 + sigma * f_inf(0) for the mean m = <f_inf>.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf, erfc, erfcx

from .activation import Activation, derivative, evaluate


class ConsistencyError(RuntimeError):
    """Bracketing or admissibility failure in the stationary solve."""


def _eta(phi0: float, sigma: float) -> float:
    return phi0 / np.sqrt(2.0 * sigma)


def boundary_ratio(eta: float) -> float:
    """exp(-eta^2) / (1 + erf(eta)), evaluated without cancellation for eta << 0."""
    return 1.0 / erfcx(-eta)


def normalization(phi0: float, sigma: float) -> float:
    """Mass normalisation Z; 1 + erf written as erfc(-.) to stay exact in the far tail."""
    return np.sqrt(np.pi * sigma / 2.0) * erfc(-_eta(phi0, sigma))


def boundary_density(phi0: float, sigma: float) -> float:
    """f_inf(0) = exp(-Phi0^2 / (2 sigma)) / Z."""
    return boundary_ratio(_eta(phi0, sigma)) / np.sqrt(np.pi * sigma / 2.0)


def g_eta(eta) -> float:
    """The derivative factor g(eta) entering dG/dm; sup over eta is 1."""
    r = boundary_ratio(np.asarray(eta, dtype=float))
    out = 1.0 - (2.0 / np.sqrt(np.pi)) * r * (r / np.sqrt(np.pi) + eta)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class HomogeneousState:
    """Solved stationary state at one noise strength."""

    sigma: float
    phi0: float
    mean: float
    Z: float
    m_inf: float
    w0: float
    b: float
    activation: Activation


def density_at(state: HomogeneousState, s):
    """Truncated-Gaussian density value(s) at s >= 0."""
    s = np.asarray(s, dtype=float)
    out = np.exp(-((s - state.phi0) ** 2) / (2.0 * state.sigma)) / state.Z
    return out if out.ndim else float(out)


def cdf(state: HomogeneousState, s):
    """Cumulative distribution of f_inf on [0, inf)."""
    s = np.asarray(s, dtype=float)
    e0 = erf(_eta(state.phi0, state.sigma))
    out = (erf((s - state.phi0) / np.sqrt(2.0 * state.sigma)) + e0) / (1.0 + e0)
    return np.clip(out, 0.0, 1.0)


def consistency_residual(m: float, sigma: float, activation: Activation,
                         W0: float, B: float) -> float:
    """G(m, sigma) = Phi(W0 m + B) + sigma f_inf(0) - m with Z recomputed from m."""
    phi0 = evaluate(activation, W0 * m + B)
    return phi0 + sigma * boundary_density(phi0, sigma) - m


def _m_inf_closed(phi0: float, sigma: float) -> float:
    """Second centered moment of the truncated Gaussian via its boundary value."""
    f0 = boundary_density(phi0, sigma)
    return sigma * (1.0 - phi0 * f0 - sigma * f0 * f0)


def solve_stationary(activation: Activation, W0: float, B: float, sigma: float,
                     tol: float = 1e-13) -> HomogeneousState:
    """Unique root of the consistency equation, bisection then one Newton polish."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if W0 > 0:
        raise ValueError(f"W0 must be <= 0, got {W0}")
    # the noise term sigma f_inf(0) is bounded by sqrt(2 sigma/pi) for Phi0 >= 0
    # and grows for Phi0 < 0; expand the bracket geometrically if needed
    hi = evaluate(activation, B) + np.sqrt(2.0 * sigma / np.pi) + 1e-9
    g_hi = consistency_residual(hi, sigma, activation, W0, B)
    for _ in range(64):
        if g_hi < 0:
            break
        hi *= 2.0
        g_hi = consistency_residual(hi, sigma, activation, W0, B)

    # admissibility (uniqueness): Phi'(W0 m + B) * W0 < 1 on the scanned range;
    # dense sampling so narrow derivative dips (smooth_eps) are resolved
    m_scan = np.linspace(0.0, hi, 8193)
    slope = derivative(activation, W0 * m_scan + B) * W0
    if slope.max() >= 1.0:
        raise ConsistencyError(
            f"activation violates the admissibility bound: max Phi'*W0 = {slope.max():.4g} >= 1"
        )

    g_lo = consistency_residual(0.0, sigma, activation, W0, B)
    if not (g_lo > 0 and g_hi < 0):
        raise ConsistencyError(
            f"consistency bracket failed: G(0)={g_lo:.4g}, G({hi:.4g})={g_hi:.4g}"
        )
    lo_m, hi_m = 0.0, hi
    for _ in range(200):
        if hi_m - lo_m <= 1e-14 * max(1.0, hi_m):
            break
        mid = 0.5 * (lo_m + hi_m)
        if consistency_residual(mid, sigma, activation, W0, B) > 0:
            lo_m = mid
        else:
            hi_m = mid
    else:
        raise ConsistencyError("bisection stalled on the consistency equation")
    m = 0.5 * (lo_m + hi_m)

    # one Newton polish with the analytic slope dG/dm = -1 + Phi' W0 g(eta)
    phi0 = evaluate(activation, W0 * m + B)
    dg = -1.0 + derivative(activation, W0 * m + B) * W0 * g_eta(_eta(phi0, sigma))
    if dg < 0:
        m = m - consistency_residual(m, sigma, activation, W0, B) / dg
        m = min(max(m, 0.0), hi)

    res = consistency_residual(m, sigma, activation, W0, B)
    if abs(res) > tol:
        raise ConsistencyError(f"|G| = {abs(res):.3e} above tolerance {tol:.1e} after polish")
    phi0 = evaluate(activation, W0 * m + B)
    return HomogeneousState(
        sigma=sigma, phi0=phi0, mean=m, Z=normalization(phi0, sigma),
        m_inf=_m_inf_closed(phi0, sigma), w0=W0, b=B, activation=activation,
    )


def m_infinity(state: HomogeneousState) -> float:
    """M_inf = int (s - <f_inf>)^2 f_inf ds, closed form."""
    return _m_inf_closed(state.phi0, state.sigma)


def phi0_prime(state: HomogeneousState) -> float:
    """Phi'(W0 <f_inf> + B) at the solved operating point."""
    return derivative(state.activation, state.w0 * state.mean + state.b)


def project_to_grid(activation: Activation, W0: float, B: float, sigma: float,
                    s_centers: np.ndarray, ds: float) -> tuple[np.ndarray, float, float]:
    """Discrete stationary profile on a cell-centered s grid.

    Returns (profile, mean, phi0) where the profile is the sampled Gaussian
    shape renormalised to unit discrete mass and phi0 solves the consistency
    equation under the grid's midpoint quadrature. This is the exact fixed
    point of the finite-volume stepper on that grid; raw sampling of the
    continuum state differs from it at O(ds^2) through the mean feedback.
    """

    def profile_for(phi0: float) -> np.ndarray:
        p = np.exp(-((s_centers - phi0) ** 2) / (2.0 * sigma))
        return p / (p.sum() * ds)

    def residual(m: float) -> float:
        phi0 = evaluate(activation, W0 * m + B)
        return float((s_centers * profile_for(phi0)).sum() * ds) - m

    hi = evaluate(activation, B) + np.sqrt(2.0 * sigma / np.pi) + 1e-9
    for _ in range(64):
        if residual(hi) < 0:
            break
        hi *= 2.0
    if not (residual(0.0) > 0 and residual(hi) < 0):
        raise ConsistencyError("discrete consistency bracket failed")
    lo_m, hi_m = 0.0, hi
    for _ in range(200):
        mid = 0.5 * (lo_m + hi_m)
        if residual(mid) > 0:
            lo_m = mid
        else:
            hi_m = mid
        if hi_m - lo_m <= 1e-15 * max(1.0, hi_m):
            break
    m = 0.5 * (lo_m + hi_m)
    phi0 = evaluate(activation, W0 * m + B)
    return profile_for(phi0), m, phi0
