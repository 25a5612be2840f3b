"""Monitored quantities and post-hoc analysis of trajectories.

Per-sample records (energy, dissipation, residuals, norms), the discrete
energy-law defect, steady-state detection, decay-rate fits, Lojasiewicz
exponent estimates and twin-run divergence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import PhysParams, State, dissipation, energy
from .spectral import TorusGrid, VectorField, norm_squared

__all__ = [
    "DiagRecord",
    "FitResult",
    "SteadyState",
    "TwinDivergence",
    "InsufficientData",
    "DegenerateWindow",
    "MismatchedTrajectories",
    "SERIES_FIELDS",
    "make_record",
    "energy_law_residual",
    "detect_steady",
    "fit_decay",
    "lojasiewicz_fit",
    "estimate_lojasiewicz",
    "energy_limit",
    "extrapolate_energy_limit",
    "distance_to_limit",
    "twin_divergence",
    "energy_increase",
]

SERIES_FIELDS = ("t", "E", "D", "A", "l2_v", "h1_v", "h2_d", "resid_d", "resid_d_dual",
                 "mean_v", "energy_residual", "max_div_v")

# Fit windows keep the last WINDOW_FRACTION of the usable samples.
WINDOW_FRACTION = 0.6
MIN_SAMPLES = 8
Y_FLOOR = 1e-13
ENERGY_GAP_FLOOR = 1e-14
THETA_FLAG_TOL = 0.02


class InsufficientData(ValueError):
    """Too few usable samples for a fit."""


class DegenerateWindow(ValueError):
    """The energy gap E - E_inf vanishes on the whole window."""


class MismatchedTrajectories(ValueError):
    """Two trajectories do not share grid and sample times."""


@dataclass(frozen=True)
class DiagRecord:
    t: float
    E: float
    D: float
    A: float
    l2_v: float
    h1_v: float
    h2_d: float
    resid_d: float
    resid_d_dual: float
    mean_v: tuple[float, ...]
    energy_residual: float
    max_div_v: float
    h1_v_tilde: float = float("nan")


def make_record(grid: TorusGrid, params: PhysParams, t: float, v: np.ndarray, d: np.ndarray,
                terms, energy_residual: float | None = None, previous=None, dt=None,
                full: bool = True, frame_velocity=None) -> DiagRecord:
    """Build a DiagRecord from coefficient arrays and an evaluated NonlinearTerms.

    ``previous`` = (E, D) of the preceding step gives the trapezoidal defect.
    ``full=False`` skips the real-space divergence check.
    """
    w = grid.parseval_weights
    ksq = grid.k_squared
    pv = np.abs(v) ** 2
    pd = np.abs(d) ** 2
    l2v_sq = float(np.sum(w * pv))
    gradv_sq = float(np.sum(w * ksq * pv))
    gradd_sq = float(np.sum(w * ksq * pd))
    h_sq = norm_squared(grid, terms.h)
    E = 0.5 * l2v_sq + params.lam * (0.5 * gradd_sq + terms.mean_potential)
    D = params.nu * gradv_sq + params.lam * params.gamma * h_sq
    A = gradv_sq + params.lam * h_sq
    zero = (slice(None),) + (0,) * grid.dim
    mean = tuple(float(x) for x in v[zero].real)
    if frame_velocity is not None:
        mean = tuple(m + float(u) for m, u in zip(mean, frame_velocity))
    mean_sq = float(np.sum(np.abs(v[zero]) ** 2))
    if energy_residual is None:
        if previous is None or dt is None:
            energy_residual = 0.0
        else:
            E0, D0 = previous
            energy_residual = abs((E - E0) / dt + 0.5 * (D0 + D))
    if full:
        ik = 1j * grid.derivative_wavenumbers
        div = grid.inverse(np.sum(ik * v, axis=0))
        max_div = float(np.max(np.abs(div)))
    else:
        max_div = float("nan")
    return DiagRecord(
        t=float(t),
        E=E,
        D=D,
        A=A,
        l2_v=math.sqrt(l2v_sq),
        h1_v=math.sqrt(l2v_sq + gradv_sq),
        h2_d=math.sqrt(norm_squared(grid, d, "H2")),
        resid_d=math.sqrt(h_sq),
        resid_d_dual=math.sqrt(norm_squared(grid, terms.h, "H1dual")),
        mean_v=mean,
        energy_residual=float(energy_residual),
        max_div_v=max_div,
        h1_v_tilde=math.sqrt(max(l2v_sq - mean_sq, 0.0) + gradv_sq),
    )


def energy_law_residual(state_n: State, state_np1: State, params: PhysParams, dt: float) -> float:
    """|(E^{n+1} - E^n)/dt + (D^n + D^{n+1})/2|, the trapezoidal energy-law defect."""
    e0, e1 = energy(state_n, params), energy(state_np1, params)
    d0, d1 = dissipation(state_n, params), dissipation(state_np1, params)
    return abs((e1 - e0) / dt + 0.5 * (d0 + d1))


def energy_increase(traj) -> float:
    """Largest per-step relative energy increase (E^{n+1} - E^n)/(1 + E^n); <= 0 if monotone."""
    e = np.asarray(traj.step_energy)
    if e.size < 2:
        return 0.0
    return float(np.max((e[1:] - e[:-1]) / (1.0 + np.abs(e[:-1]))))


# -- steady states ------------------------------------------------------------

@dataclass(frozen=True)
class SteadyState:
    t: float
    d_infinity: VectorField
    record: DiagRecord


def detect_steady(traj, tol_A: float = 1e-8, tol_resid: float = 1e-6) -> SteadyState | None:
    """First sample with A < tol_A and ||-lap d + f(d)|| < tol_resid.

    A contains only grad v, so a uniform mean flow does not prevent detection:
    the test is effectively on v - m_v, as appropriate for nonzero-mean runs.
    The returned director is the first snapshot taken at or after that time.
    """
    for rec in traj.records:
        if rec.A < tol_A and rec.resid_d < tol_resid:
            for snap in traj.snapshots:
                if snap.t >= rec.t - 1e-12:
                    return SteadyState(rec.t, snap.d, rec)
            return None
    return None


# -- fitting ------------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    """A decay fit.  ``rate`` is the power-law exponent or the exponential rate.

    For power laws ``theta`` is the Lojasiewicz exponent implied by the decay
    (1 + t)^{-p}: theta = p / (1 + 2p).  ``exponential`` marks fits that sit at
    the theta = 1/2 end, i.e. faster than any power.
    """

    model: str
    rate: float
    amplitude: float
    r_squared: float
    window: tuple[float, float]
    theta: float | None = None
    exponential: bool = False
    alternatives: dict = field(default_factory=dict, compare=False)


def _linfit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Least squares y = a + b x; returns (a, b, r^2)."""
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    syy = float(np.sum((y - ym) ** 2))
    b = float(np.sum((x - xm) * (y - ym))) / sxx
    a = ym - b * xm
    if syy == 0.0:
        return a, b, 1.0
    ss_res = float(np.sum((y - a - b * x) ** 2))
    return a, b, min(max(1.0 - ss_res / syy, 0.0), 1.0)


def _window(n: int) -> slice:
    size = max(int(math.ceil(WINDOW_FRACTION * n)), MIN_SAMPLES)
    return slice(max(n - size, 0), n)


def fit_decay(t, y) -> FitResult:
    """Fit log y against log(1 + t) (power law) and against t (exponential).

    The fit uses the last 60 % of samples with y > 1e-13 and returns the
    model with the larger r^2.  A flat series is reported as ``constant``.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < MIN_SAMPLES:
        raise InsufficientData(f"need at least {MIN_SAMPLES} samples, got {t.size}")
    keep = np.isfinite(y) & (y > Y_FLOOR)
    t, y = t[keep], y[keep]
    if t.size < MIN_SAMPLES:
        raise InsufficientData(f"only {t.size} samples above {Y_FLOOR}")
    sl = _window(t.size)
    t, ly = t[sl], np.log(y[sl])
    window = (float(t[0]), float(t[-1]))
    if np.ptp(ly) <= 1e-12 * max(1.0, float(np.max(np.abs(ly)))):
        return FitResult("constant", 0.0, float(np.exp(ly.mean())), 1.0, window)

    a_p, b_p, r_p = _linfit(np.log1p(t), ly)
    a_e, b_e, r_e = _linfit(t, ly)
    power = FitResult("power_law", b_p, math.exp(a_p), r_p, window,
                      theta=_theta_from_power(-b_p))
    expo = FitResult("exponential", b_e, math.exp(a_e), r_e, window, theta=0.5,
                     exponential=b_e < 0)
    alts = {"power_law": power, "exponential": expo}
    best = power if r_p > r_e else expo
    return FitResult(best.model, best.rate, best.amplitude, best.r_squared, window,
                     best.theta, best.exponential, alts)


def _theta_from_power(p: float) -> float | None:
    if p <= 0:
        return None
    return p / (1.0 + 2.0 * p)


def lojasiewicz_fit(energy_values, residual_values, E_infinity: float = 0.0) -> FitResult:
    """Regress log(residual) on log(E - E_inf); slope s estimates 1 - theta.

    theta = 1 - s is clamped to [0, 1/2]; fits reaching 1/2 (within 0.02) are
    flagged ``exponential``.
    """
    e = np.asarray(energy_values, dtype=float) - E_infinity
    r = np.asarray(residual_values, dtype=float)
    if e.size != r.size:
        raise ValueError("energy and residual series differ in length")
    if e.size < MIN_SAMPLES:
        raise InsufficientData(f"need at least {MIN_SAMPLES} samples, got {e.size}")
    keep = (e > ENERGY_GAP_FLOOR) & (r > 0) & np.isfinite(e) & np.isfinite(r)
    if not np.any(keep):
        raise DegenerateWindow("E - E_inf is below 1e-14 throughout")
    e, r = e[keep], r[keep]
    if e.size < MIN_SAMPLES:
        raise InsufficientData(f"only {e.size} samples with E - E_inf > {ENERGY_GAP_FLOOR}")
    sl = _window(e.size)
    le, lr = np.log(e[sl]), np.log(r[sl])
    if np.ptp(le) == 0.0:
        raise DegenerateWindow("energy gap is constant on the window")
    a, s, r2 = _linfit(le, lr)
    raw = 1.0 - s
    theta = min(max(raw, 0.0), 0.5)
    return FitResult("power_law", s, math.exp(a), r2, (float(e[sl][0]), float(e[sl][-1])),
                     theta=theta, exponential=raw >= 0.5 - THETA_FLAG_TOL,
                     alternatives={"theta_raw": raw})


def energy_limit(t, E, D) -> float:
    """Estimate E_inf = E(T) - int_T^inf D dt from the tail of the dissipation.

    Falls back to E(T) if the tail cannot be fitted.
    """
    t, E, D = (np.asarray(a, dtype=float) for a in (t, E, D))
    E_T, D_T, T = float(E[-1]), float(D[-1]), float(t[-1])
    try:
        fit = fit_decay(t, D)
    except InsufficientData:
        return E_T
    if fit.model == "exponential" and fit.rate < 0:
        return E_T - D_T / -fit.rate
    if fit.model == "power_law" and fit.rate < -1:
        return E_T - D_T * (1.0 + T) / (-fit.rate - 1.0)
    return E_T


def extrapolate_energy_limit(traj) -> float:
    """:func:`energy_limit` applied to a trajectory's records."""
    return energy_limit(traj.series("t"), traj.series("E"), traj.series("D"))


def estimate_lojasiewicz(traj, E_infinity: float | None = None) -> FitResult:
    """Lojasiewicz exponent from a trajectory's energy and dual-norm residual."""
    if E_infinity is None:
        E_infinity = extrapolate_energy_limit(traj)
    return lojasiewicz_fit(traj.series("E"), traj.series("resid_d_dual"), E_infinity)


def distance_to_limit(traj, d_infinity: VectorField) -> tuple[np.ndarray, np.ndarray]:
    """Series ||v||_{H1} + ||d - d_inf||_{H2} over the trajectory's snapshots."""
    g = d_infinity.grid
    ts, ys = [], []
    for s in traj.snapshots:
        ts.append(s.t)
        ys.append(math.sqrt(norm_squared(g, s.v.coeffs, "H1"))
                  + math.sqrt(norm_squared(g, s.d.coeffs - d_infinity.coeffs, "H2")))
    return np.array(ts), np.array(ys)


# -- continuous dependence ------------------------------------------------------

@dataclass(frozen=True)
class TwinDivergence:
    """delta(t) = ||v_a - v_b||^2 + ||d_a - d_b||_{H1}^2 and the smallest C with
    delta(t) <= 2 exp(C t) delta(0) on the window."""

    times: np.ndarray
    delta: np.ndarray
    C: float


def twin_divergence(traj_a, traj_b) -> TwinDivergence:
    sa, sb = traj_a.snapshots, traj_b.snapshots
    if len(sa) != len(sb) or not sa:
        raise MismatchedTrajectories("trajectories hold different numbers of snapshots")
    if sa[0].grid != sb[0].grid:
        raise MismatchedTrajectories("trajectories live on different grids")
    pa, pb = getattr(traj_a, "params", None), getattr(traj_b, "params", None)
    if pa is not None and pb is not None and pa != pb:
        raise MismatchedTrajectories("trajectories were run with different parameters")
    g = sa[0].grid
    times, delta = [], []
    for a, b in zip(sa, sb):
        if abs(a.t - b.t) > 1e-12 * max(1.0, abs(a.t)):
            raise MismatchedTrajectories(f"snapshot times differ: {a.t} vs {b.t}")
        times.append(a.t)
        delta.append(norm_squared(g, a.v.coeffs - b.v.coeffs)
                     + norm_squared(g, a.d.coeffs - b.d.coeffs, "H1"))
    times = np.array(times)
    delta = np.array(delta)
    d0 = delta[0]
    C = 0.0
    if d0 > 0:
        later = times > times[0]
        if np.any(later):
            growth = np.log(np.maximum(delta[later], 1e-300) / (2.0 * d0)) / (times[later] - times[0])
            C = max(0.0, float(np.max(growth)))
    elif np.any(delta > 0):
        C = math.inf
    return TwinDivergence(times, delta, C)
