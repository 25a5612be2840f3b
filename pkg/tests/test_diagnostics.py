import numpy as np
import pytest

from nematic.diagnostics import (DegenerateWindow, DiagRecord, InsufficientData,
                                 MismatchedTrajectories, detect_steady, distance_to_limit,
                                 energy_increase, energy_law_residual, energy_limit,
                                 estimate_lojasiewicz, fit_decay, lojasiewicz_fit,
                                 twin_divergence)
from nematic.integrator import SchemeConfig, Trajectory, run, step
from nematic.io import random_smooth, taylor_green
from nematic.model import PhysParams, State
from nematic.spectral import TorusGrid, VectorField


def equilibrium(grid, mean=(0.0, 0.0)):
    return State(VectorField.constant(grid, list(mean)), VectorField.constant(grid, [1.0, 0.0]))


def synthetic(t, E, resid):
    traj = Trajectory()
    for ti, ei, ri in zip(t, E, resid):
        traj.append(DiagRecord(t=float(ti), E=float(ei), D=0.0, A=0.0, l2_v=0.0, h1_v=0.0,
                               h2_d=0.0, resid_d=float(ri), resid_d_dual=float(ri),
                               mean_v=(0.0, 0.0), energy_residual=0.0, max_div_v=0.0))
    return traj


# -- energy law ---------------------------------------------------------------------

def test_energy_residual_vanishes_at_equilibrium():
    s = equilibrium(TorusGrid(2, 16))
    assert energy_law_residual(s, s, PhysParams(), 1e-3) == 0.0


def test_energy_residual_of_uniform_flow():
    g = TorusGrid(2, 16)
    s = equilibrium(g, (1.0, -0.5))
    out = step(s, PhysParams(), SchemeConfig(dt=1e-2))
    assert energy_law_residual(s, out, PhysParams(), 1e-2) <= 1e-13


def test_energy_residual_is_first_order_for_euler():
    g = TorusGrid(2, 32)
    params = PhysParams(nu=1.0)
    s0 = random_smooth(g, seed=2, amplitude=0.1)
    res = []
    for dt in (1e-4, 5e-5, 2.5e-5):
        res.append(energy_law_residual(s0, step(s0, params, SchemeConfig(dt=dt)), params, dt))
    ratios = [res[0] / res[1], res[1] / res[2]]
    assert all(1.7 < r < 2.3 for r in ratios), ratios


def test_records_respect_the_integrated_energy_law():
    g = TorusGrid(2, 16)
    params = PhysParams(nu=1.0)
    traj = run(random_smooth(g, seed=4, amplitude=0.2), params,
               SchemeConfig(dt=1e-3, t_end=0.2))
    t, E, D = traj.times, traj.series("E"), traj.series("D")
    dissipated = float(np.sum(0.5 * (D[1:] + D[:-1]) * np.diff(t)))
    budget = E[0] - E[-1]
    defect = float(np.sum(traj.step_residual)) * 1e-3
    assert abs(dissipated - budget) <= defect + 1e-12
    assert energy_increase(traj) <= 1e-12


def test_dual_residual_is_bounded_by_l2_residual():
    g = TorusGrid(2, 16)
    traj = run(random_smooth(g, seed=1, amplitude=0.3), PhysParams(nu=1.0),
               SchemeConfig(dt=1e-3, t_end=0.05))
    assert np.all(traj.series("resid_d_dual") <= traj.series("resid_d") * (1 + 1e-12))


def test_mean_velocity_is_conserved():
    g = TorusGrid(2, 16)
    traj = run(random_smooth(g, seed=9, amplitude=0.2, mean_v=(0.3, -0.2)), PhysParams(nu=1.0),
               SchemeConfig(dt=1e-3, t_end=0.1))
    means = np.array([r.mean_v for r in traj.records])
    assert np.max(np.abs(means - [0.3, -0.2])) <= 1e-14


# -- steady states ------------------------------------------------------------------

def test_equilibrium_is_steady_immediately():
    g = TorusGrid(2, 8)
    s = equilibrium(g)
    found = detect_steady(run(s, PhysParams(), SchemeConfig(dt=1e-2, t_end=0.05)))
    assert found is not None
    assert found.t == 0.0
    assert np.allclose(found.d_infinity.coeffs, s.d.coeffs)


def test_frozen_taylor_green_keeps_its_director():
    g = TorusGrid(2, 16)
    s = taylor_green(g, amplitude=1.0)
    traj = run(s, PhysParams(nu=1.0), SchemeConfig(dt=1e-2, t_end=2.0, frozen_director=True),
               snapshot_every=10)
    found = detect_steady(traj)
    assert found is not None
    assert np.array_equal(found.d_infinity.coeffs, s.d.coeffs)


def test_detect_steady_returns_none_when_not_reached():
    g = TorusGrid(2, 16)
    traj = run(taylor_green(g), PhysParams(nu=0.05),
               SchemeConfig(dt=1e-2, t_end=0.1, frozen_director=True))
    assert detect_steady(traj) is None


def test_distance_to_limit_vanishes_at_rest():
    g = TorusGrid(2, 8)
    s = equilibrium(g)
    traj = run(s, PhysParams(), SchemeConfig(dt=1e-2, t_end=0.05))
    _, dist = distance_to_limit(traj, s.d)
    assert np.all(dist == 0.0)


# -- decay fits ---------------------------------------------------------------------

def test_fit_recovers_power_law():
    t = np.linspace(0, 100, 200)
    fit = fit_decay(t, 3.0 * (1 + t) ** -1.5)
    assert fit.model == "power_law"
    assert fit.rate == pytest.approx(-1.5, abs=1e-9)
    assert fit.amplitude == pytest.approx(3.0, rel=1e-9)
    assert fit.theta == pytest.approx(1.5 / 4.0)


def test_fit_recovers_exponential():
    t = np.linspace(0, 10, 100)
    fit = fit_decay(t, 2.0 * np.exp(-0.7 * t))
    assert fit.model == "exponential"
    assert fit.rate == pytest.approx(-0.7, abs=1e-9)
    assert fit.exponential


def test_fit_of_constant_series():
    fit = fit_decay(np.arange(20.0), np.full(20, 0.25))
    assert fit.model == "constant"
    assert fit.rate == 0.0


@pytest.mark.parametrize("n", [0, 3, 7])
def test_fit_requires_enough_samples(n):
    with pytest.raises(InsufficientData):
        fit_decay(np.arange(n, dtype=float), np.ones(n))


def test_fit_ignores_values_below_floor():
    with pytest.raises(InsufficientData):
        fit_decay(np.arange(20.0), np.full(20, 1e-15))


# -- Lojasiewicz exponent -------------------------------------------------------------

def test_quartic_potential_gives_theta_one_quarter():
    # E = x^4 / 4 and |E'| = |x|^3 = (4E)^{3/4}: slope 3/4, theta 1/4
    x = np.geomspace(1.0, 1e-3, 50)
    fit = lojasiewicz_fit(x ** 4 / 4, np.abs(x) ** 3)
    assert fit.theta == pytest.approx(0.25, abs=1e-9)
    assert not fit.exponential


def test_quadratic_potential_is_flagged_exponential():
    x = np.geomspace(1.0, 1e-4, 50)
    fit = lojasiewicz_fit(x ** 2 / 2, np.abs(x))
    assert fit.theta == pytest.approx(0.5, abs=1e-9)
    assert fit.exponential


def test_theta_is_clamped():
    x = np.geomspace(1.0, 1e-3, 30)
    assert lojasiewicz_fit(x, x ** 0.2).theta == 0.5
    assert lojasiewicz_fit(x, x ** 1.5).theta == 0.0


def test_lojasiewicz_at_equilibrium_is_degenerate():
    with pytest.raises(DegenerateWindow):
        lojasiewicz_fit(np.zeros(20), np.zeros(20))


def test_estimate_from_trajectory_with_known_limit():
    # the gap stays far above the cancellation level of E - E_inf
    x = np.geomspace(1.0, 1e-2, 40)
    traj = synthetic(np.arange(40.0), 5.0 + x ** 4 / 4, np.abs(x) ** 3)
    assert estimate_lojasiewicz(traj, E_infinity=5.0).theta == pytest.approx(0.25, abs=1e-6)


def test_energy_limit_from_exponential_dissipation():
    # E = 1 + e^{-2t}, D = -dE/dt = 2 e^{-2t}
    t = np.linspace(0, 5, 200)
    assert energy_limit(t, 1 + np.exp(-2 * t), 2 * np.exp(-2 * t)) == pytest.approx(1.0, abs=1e-9)


def test_energy_limit_from_power_law_dissipation():
    # E = 1 + (1+t)^{-2}, D = 2 (1+t)^{-3}
    t = np.linspace(0, 50, 400)
    E = 1 + (1 + t) ** -2.0
    D = 2 * (1 + t) ** -3.0
    assert energy_limit(t, E, D) == pytest.approx(1.0, abs=1e-9)


# -- twin runs ----------------------------------------------------------------------

def twin_runs(sa, sb, params=PhysParams(nu=1.0), t_end=0.05):
    cfg = SchemeConfig(dt=1e-3, t_end=t_end)
    return run(sa, params, cfg, snapshot_every=10), run(sb, params, cfg, snapshot_every=10)


def test_identical_twins_do_not_diverge():
    s = random_smooth(TorusGrid(2, 16), seed=3, amplitude=0.2)
    tw = twin_divergence(*twin_runs(s, s))
    assert np.all(tw.delta == 0.0)
    assert tw.C == 0.0


def test_mean_velocity_offset_persists():
    g = TorusGrid(2, 16)
    s = equilibrium(g)
    shifted = equilibrium(g, (1e-3, 0.0))
    tw = twin_divergence(*twin_runs(s, shifted))
    assert np.allclose(tw.delta, 1e-6, rtol=1e-12, atol=0)
    assert tw.C == 0.0


def test_twin_divergence_rejects_mismatched_runs():
    s = random_smooth(TorusGrid(2, 8), seed=0)
    a, _ = twin_runs(s, s)
    b = run(s, PhysParams(nu=2.0), SchemeConfig(dt=1e-3, t_end=0.05), snapshot_every=10)
    with pytest.raises(MismatchedTrajectories):
        twin_divergence(a, b)
    c = run(s, PhysParams(nu=1.0), SchemeConfig(dt=1e-3, t_end=0.05), snapshot_every=5)
    with pytest.raises(MismatchedTrajectories):
        twin_divergence(a, c)
    d = run(random_smooth(TorusGrid(2, 16), seed=0), PhysParams(nu=1.0),
            SchemeConfig(dt=1e-3, t_end=0.05), snapshot_every=10)
    with pytest.raises(MismatchedTrajectories):
        twin_divergence(a, d)
