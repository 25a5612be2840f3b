"""Pseudo-spectral simulator for nematic liquid-crystal flow on the periodic torus."""
from .spectral import (TorusGrid, SpectralField, VectorField, gradient, divergence, laplacian,
                       jacobian, leray_project, dealiased_product, inner, norm, random_field)
from .model import (PhysParams, State, penalty_f, potential_F, energy, dirichlet_energy_E,
                    elastic_stress, momentum_rhs, director_rhs, dissipation, quantity_A)
from .diagnostics import (DiagRecord, FitResult, energy_increase, energy_law_residual, detect_steady, fit_decay,
                          estimate_lojasiewicz, lojasiewicz_fit, twin_divergence)
from .integrator import (SchemeConfig, Trajectory, NonFinite, Degenerate, Stepper, step,
                         split_mean_velocity, run)

__version__ = "0.1.0"
