"""Time stepping for the nematic flow system.

Stiff terms nu lap v and gamma lap d are implicit and diagonal in Fourier
space; everything else (advection, stress divergence, kinematic transport,
the penalty f) is explicit.  Two schemes are available:

* ``imex_euler``: first-order semi-implicit Euler.
* ``imex_bdf2``:  second-order SBDF2 (BDF2 for the linear part, linear
  extrapolation 2N^n - N^{n-1} of the explicit part), started with one
  IMEX-Euler step.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import DiagRecord, make_record
from .model import NonlinearTerms, PhysParams, State, evaluate_terms
from .spectral import TorusGrid, VectorField, leray_coeffs

__all__ = [
    "SCHEMES",
    "SchemeConfig",
    "Trajectory",
    "NonFinite",
    "Degenerate",
    "Stepper",
    "step",
    "split_mean_velocity",
    "run",
]

log = logging.getLogger(__name__)

SCHEMES = ("imex_euler", "imex_bdf2")


class NonFinite(FloatingPointError):
    """A coefficient became NaN or Inf: the step size is too large."""


class Degenerate(ValueError):
    """The grid is too coarse to run on."""


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str = "imex_euler"
    dt: float = 1e-3
    t_end: float = 1.0
    cfl_warn_threshold: float = 0.5
    frozen_director: bool = False
    stabilization: float = 0.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        if not self.stabilization >= 0:
            raise ValueError(f"stabilization must be >= 0, got {self.stabilization}")


@dataclass
class Trajectory:
    """Sampled diagnostics (and optional state snapshots) of one run.

    ``step_energy`` and ``step_residual`` hold E and the energy-law defect
    at every accepted step, not only at the sampling cadence.
    """

    records: list[DiagRecord] = field(default_factory=list)
    snapshots: list[State] = field(default_factory=list)
    step_times: list[float] = field(default_factory=list)
    step_energy: list[float] = field(default_factory=list)
    step_residual: list[float] = field(default_factory=list)
    error: str | None = None
    grid: TorusGrid | None = None
    params: PhysParams | None = None
    previous: State | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def final(self) -> State | None:
        """The last snapshot; ``previous`` holds the state one step before it."""
        return self.snapshots[-1] if self.snapshots else None

    def append(self, record: DiagRecord):
        if self.records and record.t <= self.records[-1].t:
            raise ValueError("trajectory times must increase strictly")
        self.records.append(record)


def split_mean_velocity(v: VectorField) -> tuple[np.ndarray, VectorField]:
    """v = v_tilde + m_v with m_v the spatial mean (k = 0 mode)."""
    g = v.grid
    m = np.array(v.coeffs[(slice(None),) + (0,) * g.dim].real)
    c = np.array(v.coeffs)
    c[(slice(None),) + (0,) * g.dim] = 0.0
    return m, VectorField(g, c)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFinite("non-finite coefficient encountered; reduce dt")


class Stepper:
    """Advances coefficient arrays (v, d) and keeps the history SBDF2 needs.

    ``frame_velocity`` integrates the mean-removed system (v_tilde, d) in
    which the mean flow m enters only through -(m.grad) terms.

    With ``scheme.stabilization = S > 0`` both equations get the extra
    consistent term S lap (u^{n+1} - u*), u* being u^n (Euler) or the
    extrapolation 2u^n - u^{n-1} (SBDF2).  Explicit stress/transport coupling
    is unstable at high wavenumbers unless, for |d| near 1,
    nu gamma + S (nu + gamma) >= c lambda max(alpha, 1 - alpha)^2 with c = 1
    (Euler) or c = 3 + 2 sqrt(3) (SBDF2).  Stabilization is effective for
    Euler; SBDF2 gains little from it.
    """

    def __init__(self, grid: TorusGrid, params: PhysParams, scheme: SchemeConfig,
                 frame_velocity=None):
        self.grid = grid
        self.params = params
        self.scheme = scheme
        self.frame_velocity = None if frame_velocity is None else np.asarray(frame_velocity, float)
        self._prev = None   # (v, d, terms) at the previous level, for SBDF2
        ksq = grid.k_squared
        dt = scheme.dt
        S = scheme.stabilization
        self._sk = S * ksq
        self._euler_v = 1.0 / (1.0 + dt * (params.nu + S) * ksq)
        self._euler_d = 1.0 / (1.0 + dt * (params.gamma + S) * ksq)
        self._bdf_v = 1.0 / (3.0 + 2.0 * dt * (params.nu + S) * ksq)
        self._bdf_d = 1.0 / (3.0 + 2.0 * dt * (params.gamma + S) * ksq)

    def terms(self, v: np.ndarray, d: np.ndarray) -> NonlinearTerms:
        return evaluate_terms(self.grid, v, d, self.params, self.frame_velocity,
                              couple=not self.scheme.frozen_director)

    def reset(self):
        self._prev = None

    def prime(self, v_prev: np.ndarray, d_prev: np.ndarray):
        """Supply the level n-1 so that the next SBDF2 step needs no Euler start."""
        if self.scheme.scheme == "imex_bdf2":
            self._prev = (v_prev, d_prev, self.terms(v_prev, d_prev))

    def advance(self, v: np.ndarray, d: np.ndarray, terms: NonlinearTerms | None = None):
        """One step from (v, d); ``terms`` may be passed if already evaluated."""
        if terms is None:
            terms = self.terms(v, d)
        dt = self.scheme.dt
        frozen = self.scheme.frozen_director
        stab = self.scheme.stabilization > 0
        if self.scheme.scheme == "imex_bdf2" and self._prev is not None:
            v0, d0, t0 = self._prev
            nv = 2.0 * terms.explicit_v - t0.explicit_v
            if stab:
                nv = nv + self._sk * (2.0 * v - v0)
            v_new = (4.0 * v - v0 + 2.0 * dt * nv) * self._bdf_v
            if frozen:
                d_new = d
            else:
                nd = 2.0 * terms.explicit_d - t0.explicit_d
                if stab:
                    nd = nd + self._sk * (2.0 * d - d0)
                d_new = (4.0 * d - d0 + 2.0 * dt * nd) * self._bdf_d
        else:
            nv, nd = terms.explicit_v, terms.explicit_d
            if stab:
                nv = nv + self._sk * v
                nd = nd + self._sk * d
            v_new = (v + dt * nv) * self._euler_v
            d_new = d if frozen else (d + dt * nd) * self._euler_d
        v_new = leray_coeffs(self.grid, v_new)
        _check_finite(v_new, d_new)
        if self.scheme.scheme == "imex_bdf2":
            self._prev = (v, d, terms)
        return v_new, d_new


def step(state: State, params: PhysParams, scheme: SchemeConfig) -> State:
    """A single step from ``state``.

    Without history this is always an IMEX-Euler step (the SBDF2 starter);
    use :class:`Stepper` or :func:`run` for multi-step SBDF2.
    """
    stepper = Stepper(state.grid, params, scheme)
    v, d = stepper.advance(state.v.coeffs, state.d.coeffs)
    g = state.grid
    return State(VectorField(g, v), VectorField(g, d), state.t + scheme.dt)


# Linearising about a unit constant director, the explicit stress/transport
# coupling is damped at high wavenumbers iff
#     nu gamma + S (nu + gamma) >= c lambda max(alpha, 1 - alpha)^2
# with c = 1 for IMEX-Euler (exact) and c = 3 + 2 sqrt(3) for SBDF2 (exact
# for S = 0; with S > 0 the SBDF2 bound is only indicative).
_COUPLING_FACTOR = {"imex_euler": 1.0, "imex_bdf2": 3.0 + 2.0 * math.sqrt(3.0)}


def _cfl_check(grid: TorusGrid, v: np.ndarray, d: np.ndarray, params: PhysParams,
               scheme: SchemeConfig):
    vs = grid.inverse(v)
    umax = float(np.max(np.abs(vs))) if vs.size else 0.0
    cfl = umax * scheme.dt * grid.resolution
    if cfl > scheme.cfl_warn_threshold:
        log.warning("advective CFL number %.3g exceeds %.3g", cfl, scheme.cfl_warn_threshold)
    ds = grid.inverse(d)
    stiff = float(np.max(np.abs(np.sum(ds * ds, axis=0) - 1.0))) / params.eta ** 2
    if stiff * scheme.dt > scheme.cfl_warn_threshold:
        log.warning("explicit penalty stiffness dt*|(|d|^2-1)|/eta^2 = %.3g is large; "
                    "expect instability", stiff * scheme.dt)
    if not scheme.frozen_director:
        S = scheme.stabilization
        coupling = _COUPLING_FACTOR[scheme.scheme] * params.lam * max(params.alpha, 1.0 - params.alpha) ** 2
        damping = params.nu * params.gamma + S * (params.nu + params.gamma)
        if coupling > damping:
            log.warning("explicit stress/transport coupling (%.3g) exceeds viscous damping "
                        "(%.3g): high modes may grow; raise nu or scheme.stabilization",
                        coupling, damping)


def run(initial: State, params: PhysParams, scheme: SchemeConfig, diag_every: int = 1,
        snapshot_every: int | None = None, stop_when=None, frame_velocity=None,
        callback=None, history: State | None = None) -> Trajectory:
    """Advance ``initial`` to ``scheme.t_end`` and sample diagnostics.

    The initial velocity is Leray-projected (its mean is kept).  Records are
    taken every ``diag_every`` steps and at the final step; snapshots every
    ``snapshot_every`` steps plus the first and last state.  ``stop_when``,
    if given, is called with each new record and ends the run when it
    returns True.  A NonFinite step ends the run early with ``error`` set.

    Step counting is by integer index, t = (k0 + n) dt with k0 = t0 / dt when
    t0 is a multiple of dt, so restarts land on identical times.  ``history`` (the state at t0 - dt) lets an SBDF2 run
    continue without a fresh Euler start; ``traj.previous`` supplies it.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        return _run(initial, params, scheme, diag_every, snapshot_every, stop_when,
                    frame_velocity, callback, history)


def _run(initial, params, scheme, diag_every, snapshot_every, stop_when, frame_velocity,
         callback, history) -> Trajectory:
    grid = initial.grid
    if grid.resolution < 8:
        raise Degenerate("resolution must be at least 8")
    diag_every = max(int(diag_every), 1)
    dt = scheme.dt
    t0 = initial.t
    nsteps = max(int(round((scheme.t_end - t0) / dt)), 0)
    # when t0 sits on the dt lattice, times come from the global step index so
    # that a restarted run reproduces the uninterrupted run's times bit for bit
    k0 = round(t0 / dt)
    if abs(k0 * dt - t0) <= 1e-9 * dt:
        clock = lambda n: (k0 + n) * dt
    else:
        clock = lambda n: t0 + n * dt

    stepper = Stepper(grid, params, scheme, frame_velocity)
    v = leray_coeffs(grid, np.array(initial.v.coeffs))
    d = np.array(initial.d.coeffs)
    _cfl_check(grid, v, d, params, scheme)
    if history is not None:
        if history.grid != grid:
            raise ValueError("history state lives on a different grid")
        stepper.prime(leray_coeffs(grid, np.array(history.v.coeffs)), np.array(history.d.coeffs))

    traj = Trajectory(grid=grid, params=params)
    terms = stepper.terms(v, d)
    rec = make_record(grid, params, t0, v, d, terms, energy_residual=0.0,
                      frame_velocity=frame_velocity)
    traj.append(rec)
    traj.step_times.append(t0)
    traj.step_energy.append(rec.E)
    traj.step_residual.append(0.0)

    def _snap(t):
        traj.snapshots.append(State(VectorField(grid, v), VectorField(grid, d), t))

    _snap(t0)
    if stop_when is not None and stop_when(rec):
        return traj
    prev_E, prev_D = rec.E, rec.D
    for n in range(1, nsteps + 1):
        v_old, d_old, t_old = v, d, clock(n - 1) if n > 1 else t0
        try:
            v, d = stepper.advance(v, d, terms)
            terms = stepper.terms(v, d)
            _check_finite(terms.explicit_v, terms.explicit_d)
        except NonFinite as exc:
            traj.error = f"NonFinite at t={clock(n):.6g}: {exc}"
            log.error(traj.error)
            break
        t = clock(n)
        rec = make_record(grid, params, t, v, d, terms, frame_velocity=frame_velocity,
                          previous=(prev_E, prev_D), dt=dt,
                          full=(n % diag_every == 0 or n == nsteps))
        traj.step_times.append(t)
        traj.step_energy.append(rec.E)
        traj.step_residual.append(rec.energy_residual)
        prev_E, prev_D = rec.E, rec.D
        if not (math.isfinite(rec.E) and math.isfinite(rec.D)):
            traj.error = f"NonFinite energy at t={t:.6g}"
            log.error(traj.error)
            break
        stop = False
        if n % diag_every == 0 or n == nsteps:
            traj.append(rec)
            if callback is not None:
                callback(rec)
            stop = stop_when is not None and stop_when(rec)
        if (snapshot_every and n % snapshot_every == 0) or n == nsteps or stop:
            _snap(t)
            traj.previous = State(VectorField(grid, v_old), VectorField(grid, d_old), t_old)
        if stop:
            break
    return traj
