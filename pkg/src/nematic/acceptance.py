"""Executable acceptance suites.

Each suite runs one acceptance criterion end to end and returns a list of
:class:`Check` results; ``nematic verify NAME`` and ``tests/test_acceptance.py``
both call into :data:`SUITES`.  Oracles are analytic wherever possible:
exact Navier-Stokes decay, the closed-form logistic relaxation, synthetic
scalar gradient flows, and finite differences for the operators.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .diagnostics import (DiagRecord, detect_steady, energy_increase, estimate_lojasiewicz,
                          fit_decay, twin_divergence)
from .integrator import SchemeConfig, Trajectory, run
from .io import perturbed_constant_director, random_smooth, taylor_green
from .model import (PhysParams, State, director_rhs, elastic_stress, momentum_rhs, penalty_f,
                    potential_F)
from .spectral import (SpectralField, TorusGrid, VectorField, dealiased_product, divergence,
                       gradient, inner, jacobian, laplacian, leray_project, norm, random_field)

__all__ = ["Check", "SUITES", "run_suite", "relaxation_radius"]


@dataclass(frozen=True)
class Check:
    criterion: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.criterion}: {self.name} -- {self.detail}"


def relaxation_radius(r0: float, t, eta: float = 1.0, gamma: float = 1.0):
    """Closed-form solution of r' = -gamma (r^2 - 1) r / eta^2 with r(0) = r0 > 0."""
    t = np.asarray(t, dtype=float)
    return 1.0 / np.sqrt(1.0 + (r0 ** -2 - 1.0) * np.exp(-2.0 * gamma * t / eta ** 2))


# -- 1 -------------------------------------------------------------------------

def taylor_green_suite(alphas=(0.0, 0.5, 1.0)) -> list[Check]:
    """Exact decay exp(-8 pi^2 nu t) of the Taylor-Green vortex with a frozen unit director.

    SBDF2 is used: first-order Euler cannot reach relative 1e-4 at dt = 1e-3.
    """
    grid = TorusGrid(2, 64)
    initial = taylor_green(grid, 1.0)
    nu = 0.05
    scheme = SchemeConfig("imex_bdf2", dt=1e-3, t_end=1.0, frozen_director=True)
    checks = []
    start = time.perf_counter()
    for alpha in alphas:
        traj = run(initial, PhysParams(nu=nu, alpha=alpha), scheme, diag_every=10)
        t = traj.times
        exact = traj.records[0].l2_v * np.exp(-8.0 * math.pi ** 2 * nu * t)
        err = float(np.max(np.abs(traj.series("l2_v") - exact) / exact))
        ok = traj.error is None and err <= 1e-4
        checks.append(Check(1, f"Taylor-Green decay alpha={alpha:g}", ok,
                            f"max relative error {err:.3e} (tol 1e-4)"))
    elapsed = time.perf_counter() - start
    checks.append(Check(1, "Taylor-Green runtime", elapsed < 30.0,
                        f"{elapsed:.1f} s for {len(alphas)} runs (limit 30 s)"))
    return checks


# -- 2 -------------------------------------------------------------------------

def _energy_run(alpha: float, dt: float, t_end: float = 0.1) -> Trajectory:
    grid = TorusGrid(2, 32, 2)
    initial = perturbed_constant_director(grid, seed=7, amplitude=0.1)
    return run(initial, PhysParams(nu=1.0, alpha=alpha), SchemeConfig("imex_euler", dt, t_end),
               diag_every=10)


def energy_law_suite(alphas=(0.0, 0.5, 1.0), dts=(5e-4, 2.5e-4)) -> list[Check]:
    """dt-halving study of the trapezoidal energy-law defect for IMEX-Euler."""
    checks = []
    for alpha in alphas:
        coarse, fine = (_energy_run(alpha, dt) for dt in dts)
        r_coarse = coarse.step_residual[-1]
        r_fine = fine.step_residual[-1]
        ratio = r_coarse / r_fine
        checks.append(Check(2, f"energy-law residual order alpha={alpha:g}", 1.7 <= ratio <= 2.3,
                            f"residual at t={coarse.step_times[-1]:g}: {r_coarse:.3e} -> "
                            f"{r_fine:.3e}, ratio {ratio:.3f} (want [1.7, 2.3])"))
        rise = max(energy_increase(coarse), energy_increase(fine))
        checks.append(Check(2, f"energy non-increasing alpha={alpha:g}",
                            rise <= 1e-10 and coarse.error is None and fine.error is None,
                            f"largest relative per-step increase {rise:.3e} (tol 1e-10)"))
    return checks


# -- 3 -------------------------------------------------------------------------

def mean_velocity_suite(steps: int = 10_000) -> list[Check]:
    grid = TorusGrid(2, 32)
    m = (0.3, -0.2)
    initial = random_smooth(grid, seed=11, amplitude=0.1, mean_v=m)
    dt = 1e-3
    traj = run(initial, PhysParams(nu=1.0), SchemeConfig("imex_euler", dt, steps * dt),
               diag_every=1)
    mean = np.array([r.mean_v for r in traj.records])
    dev = float(np.max(np.abs(mean - np.array(m))))
    final = traj.records[-1]
    start = traj.records[0].h1_v_tilde
    return [
        Check(3, "mean velocity conserved", traj.error is None and len(traj.records) == steps + 1
              and dev <= 1e-12,
              f"{len(traj.records) - 1} steps, max |m_v(t) - m_v(0)| = {dev:.3e} (tol 1e-12)"),
        Check(3, "v converges to the mean flow", final.h1_v_tilde < 1e-6,
              f"||v - m_v||_H1 from {start:.3e} to {final.h1_v_tilde:.3e} (tol 1e-6)"),
    ]


# -- 4 -------------------------------------------------------------------------

def convergence_suite(alphas=(0.0, 0.5, 1.0), tol_A=1e-8, tol_resid=1e-6) -> list[Check]:
    grid = TorusGrid(2, 64, 2)
    initial = perturbed_constant_director(grid, seed=3, amplitude=0.1)
    scheme = SchemeConfig("imex_euler", dt=5e-3, t_end=50.0)
    checks = []
    for alpha in alphas:
        start = time.perf_counter()
        traj = run(initial, PhysParams(nu=1.0, alpha=alpha), scheme, diag_every=5,
                   stop_when=lambda r: r.A < tol_A and r.resid_d < tol_resid)
        elapsed = time.perf_counter() - start
        steady = detect_steady(traj, tol_A, tol_resid)
        if steady is None:
            checks.append(Check(4, f"convergence alpha={alpha:g}", False,
                                f"no steady state by t={traj.times[-1]:g} (error={traj.error})"))
            continue
        modulus = np.sqrt(np.sum(steady.d_infinity.samples ** 2, axis=0))
        dev = float(np.max(np.abs(modulus - 1.0)))
        rec = steady.record
        ok = rec.t <= 50.0 and dev < 1e-4 and elapsed < 120.0
        checks.append(Check(4, f"convergence alpha={alpha:g}", ok,
                            f"steady at t={rec.t:g}: A={rec.A:.2e}, resid={rec.resid_d:.2e}, "
                            f"max||d_inf|-1|={dev:.2e} (tol 1e-4), {elapsed:.1f} s (limit 120 s)"))
    return checks


# -- 5 -------------------------------------------------------------------------

def relaxation_suite(radii=(0.5, 2.0)) -> list[Check]:
    """Spatially constant director relaxing to the unit sphere (SBDF2, dt = 1e-3)."""
    grid = TorusGrid(2, 8)
    checks = []
    for r0 in radii:
        d = VectorField.constant(grid, [r0, 0.0])
        initial = State(VectorField.zeros(grid, (2,)), d)
        traj = run(initial, PhysParams(), SchemeConfig("imex_bdf2", 1e-3, 1.0))
        r_num = float(np.abs(traj.final.d.mean[0]))
        r_exact = float(relaxation_radius(r0, 1.0))
        err = abs(r_num - r_exact)
        checks.append(Check(5, f"logistic relaxation r0={r0:g}", err < 1e-5,
                            f"|d(1)| = {r_num:.10f}, exact {r_exact:.10f}, error {err:.2e} (tol 1e-5)"))
    return checks


# -- 6 -------------------------------------------------------------------------

def _synthetic_trajectory(t, E, residual) -> Trajectory:
    traj = Trajectory()
    for ti, ei, ri in zip(t, E, residual):
        traj.append(DiagRecord(t=float(ti), E=float(ei), D=float(ri) ** 2, A=float(ri) ** 2,
                               l2_v=0.0, h1_v=0.0, h2_d=0.0, resid_d=float(ri),
                               resid_d_dual=float(ri), mean_v=(0.0, 0.0), energy_residual=0.0,
                               max_div_v=0.0))
    return traj


def lojasiewicz_suite() -> list[Check]:
    """Scalar gradient flows x' = -E'(x) with known Lojasiewicz exponents."""
    t = np.linspace(0.0, 50.0, 200)
    x0 = 1.0
    # E = x^4: x(t) = x0 / sqrt(1 + 8 x0^2 t), |E'| = 4|x|^3
    x = x0 / np.sqrt(1.0 + 8.0 * x0 ** 2 * t)
    quartic = estimate_lojasiewicz(_synthetic_trajectory(t, x ** 4, 4.0 * np.abs(x) ** 3), 0.0)
    # E = x^2: x(t) = x0 exp(-2t), |E'| = 2|x|
    t2 = np.linspace(0.0, 8.0, 200)
    x = x0 * np.exp(-2.0 * t2)
    quadratic = estimate_lojasiewicz(_synthetic_trajectory(t2, x ** 2, 2.0 * np.abs(x)), 0.0)

    ts = np.linspace(0.0, 10.0, 100)
    power = fit_decay(ts, 5.0 * (1.0 + ts) ** -3)
    expo = fit_decay(ts, 2.0 * np.exp(-4.0 * ts))
    return [
        Check(6, "theta for E = x^4", abs(quartic.theta - 0.25) <= 0.02,
              f"theta = {quartic.theta:.6f} (want 0.25 +- 0.02)"),
        Check(6, "theta for E = x^2", abs(quadratic.theta - 0.5) <= 1e-12 and quadratic.exponential,
              f"theta = {quadratic.theta:.6f}, exponential flag {quadratic.exponential}"),
        Check(6, "power-law exponent", power.model == "power_law" and abs(power.rate + 3.0) <= 1e-6
              and abs(power.theta - 3.0 / 7.0) <= 1e-6,
              f"model {power.model}, exponent {power.rate:.10f}, theta {power.theta:.8f}"),
        Check(6, "exponential rate", expo.model == "exponential" and abs(expo.rate + 4.0) <= 1e-6,
              f"model {expo.model}, rate {expo.rate:.10f}"),
    ]


# -- 7 -------------------------------------------------------------------------

def continuous_dependence_suite(delta0: float = 1e-16) -> list[Check]:
    grid = TorusGrid(2, 32)
    base = perturbed_constant_director(grid, seed=5, amplitude=0.1)
    # divergence-free single-mode kick: eps (0, sin 2 pi x1) has squared L2 norm eps^2/2
    eps = math.sqrt(2.0 * delta0)
    kick = VectorField.from_function(grid, lambda x, y: [0.0 * x, eps * np.sin(2 * np.pi * x)])
    twin = base.replace(v=base.v + kick)
    params = PhysParams(nu=1.0)
    scheme = SchemeConfig("imex_euler", 1e-3, 1.0)
    a = run(base, params, scheme, diag_every=10, snapshot_every=10)
    b = run(twin, params, scheme, diag_every=10, snapshot_every=10)
    div = twin_divergence(a, b)
    d0 = div.delta[0]
    bound_ok = bool(np.all(div.delta <= 2.0 * np.exp(div.C * div.times) * d0 * (1 + 1e-12)))
    logd = np.log(div.delta)
    slope, intercept = np.polyfit(div.times, logd, 1)
    affine = intercept + slope * div.times
    excess = float(np.max(logd - (affine + 0.1 * np.abs(affine))))
    worst_at = float(div.times[np.argmax(logd - affine)])
    growth = float(np.max(np.diff(logd) / np.diff(div.times)))
    return [
        Check(7, "initial separation", abs(d0 - delta0) <= 1e-3 * delta0,
              f"delta(0) = {d0:.4e} (want {delta0:g})"),
        Check(7, "exponential bound with finite C", math.isfinite(div.C) and bound_ok,
              f"C = {div.C:.4g}, delta(1) = {div.delta[-1]:.3e}"),
        Check(7, "no super-exponential growth", excess <= 0.0,
              f"max(log delta - (affine + 10%)) = {excess:.3g} (worst at t={worst_at:g}); "
              f"fitted slope {slope:.4g}, largest local growth rate of log delta {growth:.3g}"),
    ]


# -- 8 -------------------------------------------------------------------------

def _rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


FD_RESOLUTION = 1024


def _fd4(samples: np.ndarray, axis: int) -> np.ndarray:
    """Fourth-order centred difference along ``axis`` of periodic unit-torus samples."""
    h = 1.0 / samples.shape[axis]
    r = lambda s: np.roll(samples, s, axis=axis)
    return (-r(-2) + 8 * r(-1) - 8 * r(1) + r(2)) / (12 * h)


def _coarse(grid: TorusGrid, fine: np.ndarray) -> np.ndarray:
    """Restrict fine samples to the grid points of ``grid``."""
    step = fine.shape[-1] // grid.resolution
    return fine[(Ellipsis,) + (slice(None, None, step),) * grid.dim]


def _pointwise_stress(grid: TorusGrid, d: VectorField, params: PhysParams, m: int) -> np.ndarray:
    """Assemble sigma sample by sample on an m-point grid from exact derivatives of d."""
    ds = grid.inverse(d.coeffs, m)
    grad_d = np.stack([gradient(d[i]).coeffs for i in range(grid.dim)])
    gd = grid.inverse(grad_d, m)                     # gd[i, j] = d_j d_i
    lap = grid.inverse(np.stack([laplacian(d[i]).coeffs for i in range(grid.dim)]), m)
    h = lap - (np.sum(ds * ds, axis=0) - 1.0) * ds / params.eta ** 2
    a = params.alpha
    sigma = np.empty((grid.dim, grid.dim) + ds.shape[1:])
    for i in range(grid.dim):
        for j in range(grid.dim):
            sigma[i, j] = (np.sum(gd[:, i] * gd[:, j], axis=0)
                           + a * h[i] * ds[j] - (1 - a) * ds[i] * h[j])
    return params.lam * sigma


def operator_suite(seed: int = 2024) -> list[Check]:
    rng = np.random.default_rng(seed)
    grid = TorusGrid(2, 64, 2)
    checks = []

    # finite differences act on the band-limited interpolant sampled finely,
    # compared at the grid points; the stencil error is then ~1e-8
    f = random_field(grid, rng, kmax=4)
    g = gradient(f)
    fine = grid.inverse(f.coeffs, FD_RESOLUTION)
    fd = _coarse(grid, np.stack([_fd4(fine, ax) for ax in range(2)]))
    checks.append(Check(8, "gradient vs 4th-order finite differences", _rel(g.samples, fd) < 1e-6,
                        f"relative {_rel(g.samples, fd):.2e} (tol 1e-6)"))
    e = _rel(divergence(g).coeffs, laplacian(f).coeffs)
    checks.append(Check(8, "div grad = laplacian", e < 1e-12, f"relative {e:.2e}"))

    V = random_field(grid, rng, components=(2,), kmax=4)
    ibp = abs(inner(g, V) + inner(f, divergence(V))) / (norm(g) * norm(V))
    checks.append(Check(8, "discrete integration by parts", ibp < 1e-12, f"relative {ibp:.2e}"))

    P = leray_project(V)
    k = grid.derivative_wavenumbers
    kdot = float(np.max(np.abs(np.sum(k * P.coeffs, axis=0)))) / float(np.max(np.abs(V.coeffs)))
    idem = _rel(leray_project(P).coeffs, P.coeffs)
    checks.append(Check(8, "Leray projection", kdot < 1e-12 and idem < 1e-12,
                        f"max|k.v| / |v| = {kdot:.2e}, idempotence {idem:.2e}"))

    norms = [norm(f, kind) for kind in ("H1dual", "L2", "H1", "H2")]
    checks.append(Check(8, "norm ordering H1dual <= L2 <= H1 <= H2",
                        all(a <= b for a, b in zip(norms, norms[1:])) and norms[0] * norms[2] >= norms[1] ** 2,
                        ", ".join(f"{x:.4g}" for x in norms)))

    d = VectorField.constant(grid, [1.0, 0.0]) + random_field(grid, rng, components=(2,), kmax=3, amplitude=0.2, mean=False)
    v = leray_project(random_field(grid, rng, components=(2,), kmax=3, amplitude=0.5))
    # omega/A decomposition of the kinematic transport
    for alpha in (0.0, 0.3, 0.5, 1.0):
        params = PhysParams(alpha=alpha)
        transport = (director_rhs(State(v, d), params) - director_rhs(State(v * 0.0, d), params)).coeffs
        J = jacobian(v)
        gd = gradient(d)
        Jc, JTc = J.coeffs, np.swapaxes(J.coeffs, 0, 1)
        Sym = SpectralField(grid, 0.5 * (Jc + JTc))
        Omg = SpectralField(grid, 0.5 * (Jc - JTc))
        rhs = np.zeros_like(d.coeffs)
        for i in range(2):
            for j in range(2):
                rhs[i] += (-dealiased_product([v[j], gd[i, j]]).coeffs
                           + dealiased_product([Omg[i, j], d[j]]).coeffs
                           + (2 * alpha - 1) * dealiased_product([Sym[i, j], d[j]]).coeffs)
        e = _rel(transport, rhs)
        checks.append(Check(8, f"transport = omega d + (2 alpha - 1) A d, alpha={alpha:g}", e < 1e-12,
                            f"relative {e:.2e} (tol 1e-12)"))

    # f = grad F along a pointwise perturbation, central differences of int F
    delta = random_field(grid, rng, components=(2,), kmax=3)
    eps = 1e-5
    dF = (potential_F(d + delta * eps).mean - potential_F(d - delta * eps).mean) / (2 * eps)
    pairing = inner(penalty_f(d), delta)
    e = abs(dF - pairing) / abs(pairing)
    checks.append(Check(8, "f = grad F (finite differences)", e < 1e-6, f"relative {e:.2e} (tol 1e-6)"))

    # divergence of the stress against finite differences of a pointwise-assembled tensor
    params = PhysParams(alpha=0.3)
    sigma = elastic_stress(d, params)
    spectral_div = np.stack([sum(gradient(sigma[i, j]).samples[j] for j in range(2)) for i in range(2)])
    assembled = _pointwise_stress(grid, d, params, FD_RESOLUTION)
    fd_div = _coarse(grid, np.stack([sum(_fd4(assembled[i, j], j) for j in range(2))
                                     for i in range(2)]))
    e = _rel(fd_div, spectral_div)
    checks.append(Check(8, "stress divergence vs finite differences", e < 1e-5, f"relative {e:.2e} (tol 1e-5)"))

    # Taylor-Green: advection is a pure gradient, so the momentum RHS is nu lap v
    tg = taylor_green(grid, 1.0)
    params = PhysParams(nu=0.05)
    mr = momentum_rhs(tg, params)
    lap = np.stack([laplacian(tg.v[i]).coeffs for i in range(2)]) * params.nu
    e = _rel(mr.coeffs, lap)
    checks.append(Check(8, "Taylor-Green momentum RHS = nu lap v", e < 1e-12, f"relative {e:.2e}"))
    return checks


# -- 9 -------------------------------------------------------------------------

def smoke_3d_suite(t_end: float = 0.5, transient: float = 0.1) -> list[Check]:
    """Large-viscosity 3D run: a qualitative stability check, not a threshold test."""
    grid = TorusGrid(3, 16)
    initial = perturbed_constant_director(grid, seed=1, amplitude=0.05)
    traj = run(initial, PhysParams(nu=5.0), SchemeConfig("imex_euler", 1e-3, t_end), diag_every=5)
    rise = energy_increase(traj)
    t = traj.times
    A = traj.series("A")
    late = A[t >= transient]
    steps = np.diff(late) / late[:-1]
    worst = float(np.max(steps)) if steps.size else 0.0
    return [
        Check(9, "3D run finite", traj.error is None and abs(t[-1] - t_end) < 1e-12,
              f"reached t={t[-1]:g}, error={traj.error}"),
        Check(9, "3D energy non-increasing", rise <= 1e-10, f"largest relative increase {rise:.2e}"),
        Check(9, "3D A(t) monotone after transient", worst <= 1e-10,
              f"A: {A[0]:.3e} -> {A[-1]:.3e}; largest relative rise for t >= {transient:g}: {worst:.2e}"),
    ]


SUITES = {
    "taylor-green": taylor_green_suite,
    "energy-law": energy_law_suite,
    "mean-velocity": mean_velocity_suite,
    "convergence": convergence_suite,
    "relaxation": relaxation_suite,
    "lojasiewicz": lojasiewicz_suite,
    "continuous-dependence": continuous_dependence_suite,
    "operators": operator_suite,
    "smoke-3d": smoke_3d_suite,
}


def run_suite(name: str) -> list[Check]:
    try:
        suite = SUITES[name]
    except KeyError:
        raise KeyError(f"unknown suite {name!r}; expected one of {sorted(SUITES)}") from None
    return suite()
