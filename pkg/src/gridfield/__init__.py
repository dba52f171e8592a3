"""Noisy grid-cell neural-field engine.

Homogeneous stationary states, linear-stability thresholds in the noise
strength, time evolution of the 4-population Fokker-Planck system on a
periodic neural sheet, bifurcation-branch continuation, a reflected particle
oracle, and trajectory replay producing single-cell firing fields.
"""

from .activation import Activation, derivative, evaluate
from .connectivity import (Kernel, ShiftSet, TorusGrid, convolve_means,
                           sample_kernel, shift_factor, spectral_transform)
from .fokker_planck import (FieldState, Homogeneous1D, SolverParams, delta_columns,
                            external_input, firing_argument, from_homogeneous,
                            mean_activity, mean_combined, perturb_means, perturbed_homogeneous,
                            run_to_stationary, run_to_time, step, stripe_seeded)
from .homogeneous import (HomogeneousState, consistency_residual, density_at,
                          g_eta, m_infinity, project_to_grid, solve_stationary)
from .microscopic import ParticleEnsemble, ParticleParams, empirical_density, particle_step
from .stability import (DispersionTable, critical_sigma, dispersion,
                        dispersion_from_phi0p, dominant_modes, linearized_growth_rate,
                        mode_pattern, zero_noise_mean, zero_noise_stable)
from .trajectory import Trajectory, synth_trajectory

__version__ = "0.1.0"
