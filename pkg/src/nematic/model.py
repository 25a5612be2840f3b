"""Simplified Ericksen-Leslie system with shape-dependent kinematic transport.

    v_t + (v.grad)v - nu lap v + grad P = -div sigma,     div v = 0,
    d_t + (v.grad)d - alpha (grad v) d + (1-alpha)(grad v)^T d = gamma (lap d - f(d)),

    sigma = lambda [grad d (.) grad d + alpha h (x) d - (1-alpha) d (x) h],
    h     = lap d - f(d),       f(d) = (|d|^2 - 1) d / eta^2.

Conventions: (grad v)_ij = dv_i/dx_j, (div sigma)_i = d_j sigma_ij and
(grad d (.) grad d)_ij = d_i d . d_j d.  With these the stress exactly
cancels the transport terms in the energy balance

    dE/dt = -nu ||grad v||^2 - lambda gamma ||h||^2,
    E     = ||v||^2/2 + lambda ||grad d||^2/2 + lambda int F(d).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import SpectralField, TorusGrid, VectorField, leray_coeffs, norm_squared

__all__ = [
    "PhysParams",
    "State",
    "penalty_f",
    "potential_F",
    "energy",
    "dirichlet_energy_E",
    "elastic_stress",
    "momentum_rhs",
    "director_rhs",
    "dissipation",
    "quantity_A",
    "NonlinearTerms",
    "evaluate_terms",
]


@dataclass(frozen=True)
class PhysParams:
    """Material constants: viscosity, elastic coupling, relaxation, shape, penalty width."""

    nu: float = 1.0
    lam: float = 1.0
    gamma: float = 1.0
    alpha: float = 0.5
    eta: float = 1.0

    def __post_init__(self):
        for name in ("nu", "lam", "gamma", "alpha", "eta"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, float(value))
        if self.nu <= 0:
            raise ValueError(f"nu must be > 0, got {self.nu}")
        if self.lam <= 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")


@dataclass(frozen=True)
class State:
    """Velocity and director at time t, sharing one grid."""

    v: VectorField
    d: VectorField
    t: float = 0.0
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.v.grid != self.d.grid:
            raise ValueError("v and d must share one grid")
        if self.t < 0:
            raise ValueError(f"time must be >= 0, got {self.t}")

    @property
    def grid(self) -> TorusGrid:
        return self.v.grid

    def replace(self, **changes) -> "State":
        kw = dict(v=self.v, d=self.d, t=self.t)
        kw.update(changes)
        return State(**kw)


# -- pointwise penalty ----------------------------------------------------------

def _padded(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    return grid.inverse(coeffs, grid.padded_resolution)


def _penalty_samples(d: np.ndarray, eta: float) -> np.ndarray:
    return (np.sum(d * d, axis=0) - 1.0) * d / eta ** 2


def _potential_samples(d: np.ndarray, eta: float) -> np.ndarray:
    return (np.sum(d * d, axis=0) - 1.0) ** 2 / (4.0 * eta ** 2)


def penalty_f(d: VectorField, eta: float = 1.0) -> VectorField:
    """f(d) = (|d|^2 - 1) d / eta^2, evaluated on the padded grid."""
    g = d.grid
    return VectorField(g, g.forward(_penalty_samples(_padded(g, d.coeffs), eta)))


def potential_F(d: VectorField, eta: float = 1.0) -> SpectralField:
    """F(d) = (|d|^2 - 1)^2 / (4 eta^2); f is its gradient."""
    g = d.grid
    return SpectralField(g, g.forward(_potential_samples(_padded(g, d.coeffs), eta)))


def _mean_potential(grid: TorusGrid, d_coeffs: np.ndarray, eta: float) -> float:
    return float(np.mean(_potential_samples(_padded(grid, d_coeffs), eta)))


def dirichlet_energy_E(d: VectorField, eta: float = 1.0) -> float:
    """E(d) = ||grad d||^2 / 2 + int F(d), the static part of the energy."""
    g = d.grid
    grad_sq = float(np.sum(g.parseval_weights * g.k_squared * np.abs(d.coeffs) ** 2))
    return 0.5 * grad_sq + _mean_potential(g, d.coeffs, eta)


def energy(state: State, params: PhysParams) -> float:
    """Lyapunov functional ||v||^2/2 + lambda E(d)."""
    kinetic = 0.5 * norm_squared(state.grid, state.v.coeffs)
    return kinetic + params.lam * dirichlet_energy_E(state.d, params.eta)


# -- the full nonlinear evaluation --------------------------------------------

@dataclass
class NonlinearTerms:
    """Everything one right-hand-side evaluation produces, as coefficient arrays.

    ``explicit_v`` is the Leray-projected momentum forcing without viscosity;
    ``explicit_d`` is the director forcing without gamma lap d.  ``h`` is the
    band-limited molecular field lap d - f(d) used in both the stress and the
    dissipation.
    """

    explicit_v: np.ndarray
    explicit_d: np.ndarray
    f: np.ndarray
    h: np.ndarray
    mean_potential: float
    stress: np.ndarray | None = None


def evaluate_terms(grid: TorusGrid, v: np.ndarray, d: np.ndarray, params: PhysParams,
                   frame_velocity=None, keep_stress: bool = False,
                   couple: bool = True) -> NonlinearTerms:
    """Evaluate the explicit parts of both equations at (v, d).

    Products are formed on the padded grid and truncated.  Advection is taken
    in divergence form, so the k = 0 mode of the momentum forcing is exactly
    zero and the mean velocity cannot drift.

    ``frame_velocity`` adds -(m.grad) to both equations: the mean-removed
    system obtained by writing v = v_tilde + m.  ``couple=False`` drops the
    director entirely (stress and director forcing), leaving Navier-Stokes.
    """
    m = grid.padded_resolution
    dim = grid.dim
    ik = 1j * grid.derivative_wavenumbers
    lam, alpha, eta, gamma = params.lam, params.alpha, params.eta, params.gamma

    vs = grid.inverse(v, m)
    flux = np.einsum("i...,j...->ij...", vs, vs)
    if couple:
        ds = grid.inverse(d, m)
        grad_d = grid.inverse(d[:, None] * ik[None], m)            # (i, j) = d_j d_i
        grad_v = grid.inverse(v[:, None] * ik[None], m)            # (i, j) = d_j v_i
        f_hat = grid.forward(_penalty_samples(ds, eta))
        h_hat = -grid.k_squared * d - f_hat
        hs = grid.inverse(h_hat, m)
        stress = lam * (np.einsum("mi...,mj...->ij...", grad_d, grad_d)
                        + alpha * np.einsum("i...,j...->ij...", hs, ds)
                        - (1.0 - alpha) * np.einsum("i...,j...->ij...", ds, hs))
        flux = flux + stress
        transport = (-np.einsum("j...,ij...->i...", vs, grad_d)
                     + alpha * np.einsum("ij...,j...->i...", grad_v, ds)
                     - (1.0 - alpha) * np.einsum("ji...,j...->i...", grad_v, ds))
        explicit_d = grid.forward(transport) - gamma * f_hat
        mean_pot = float(np.mean(_potential_samples(ds, eta)))
    else:
        ds = grid.inverse(d, m)
        stress = None
        f_hat = grid.forward(_penalty_samples(ds, eta))
        h_hat = -grid.k_squared * d - f_hat
        explicit_d = np.zeros_like(d)
        mean_pot = float(np.mean(_potential_samples(ds, eta)))

    flux_hat = grid.forward(flux)
    forcing = -np.sum(flux_hat * ik[None], axis=1)
    if frame_velocity is not None:
        mdotk = sum(float(frame_velocity[i]) * ik[i] for i in range(dim))
        forcing = forcing - mdotk * v
        if couple:
            explicit_d = explicit_d - mdotk * d
    explicit_v = leray_coeffs(grid, forcing)
    return NonlinearTerms(
        explicit_v=explicit_v,
        explicit_d=explicit_d,
        f=f_hat,
        h=h_hat,
        mean_potential=mean_pot,
        stress=grid.forward(stress) if (keep_stress and stress is not None) else None,
    )


# -- public operators -----------------------------------------------------------

def elastic_stress(d: VectorField, params: PhysParams) -> SpectralField:
    """sigma = lambda [grad d (.) grad d + alpha h (x) d - (1 - alpha) d (x) h], h = lap d - f(d)."""
    g = d.grid
    zero = np.zeros_like(d.coeffs)
    terms = evaluate_terms(g, zero, d.coeffs, params, keep_stress=True)
    return SpectralField(g, terms.stress)


def momentum_rhs(state: State, params: PhysParams) -> VectorField:
    """P[-(v.grad)v + nu lap v - div sigma]; the pressure is never formed."""
    g = state.grid
    terms = evaluate_terms(g, state.v.coeffs, state.d.coeffs, params)
    return VectorField(g, terms.explicit_v - params.nu * g.k_squared * state.v.coeffs)


def director_rhs(state: State, params: PhysParams) -> VectorField:
    """-(v.grad)d + alpha (grad v) d - (1 - alpha)(grad v)^T d + gamma (lap d - f(d))."""
    g = state.grid
    terms = evaluate_terms(g, state.v.coeffs, state.d.coeffs, params)
    return VectorField(g, terms.explicit_d - params.gamma * g.k_squared * state.d.coeffs)


def _molecular_field(d: VectorField, eta: float) -> np.ndarray:
    g = d.grid
    return -g.k_squared * d.coeffs - penalty_f(d, eta).coeffs


def _grad_sq(grid: TorusGrid, coeffs: np.ndarray) -> float:
    return float(np.sum(grid.parseval_weights * grid.k_squared * np.abs(coeffs) ** 2))


def dissipation(state: State, params: PhysParams) -> float:
    """nu ||grad v||^2 + lambda gamma ||lap d - f(d)||^2, the energy decay rate."""
    g = state.grid
    h = _molecular_field(state.d, params.eta)
    return params.nu * _grad_sq(g, state.v.coeffs) + params.lam * params.gamma * norm_squared(g, h)


def quantity_A(state: State, params: PhysParams) -> float:
    """||grad v||^2 + lambda ||lap d - f(d)||^2."""
    g = state.grid
    h = _molecular_field(state.d, params.eta)
    return _grad_sq(g, state.v.coeffs) + params.lam * norm_squared(g, h)
