"""Implicit Euler for semi-explicit index-1 DAEs x' = f(x, y), 0 = g(x, y).

The nonlinear system of each step is solved by damped Newton over (x, y)
in scaled variables with a finite-difference Jacobian. The Jacobian blocks
are kept between iterations and steps and refreshed only when the
contraction rate degrades.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverSettings:
    dt_init: float = 1.0  # s
    dt_min: float = 1e-6  # s
    dt_max: float = 900.0  # s
    newton_tol: float = 1e-8
    newton_max_iter: int = 12
    jacobian_fd_epsilon: float = 1e-7
    steady_state_tol: float = 1e-9  # 1/s on the scaled f
    steady_state_window: int = 10
    max_sim_time: float = 50 * 3600.0  # s
    growth: float = 1.5
    negative_tol: float = 1e-9  # scaled concentrations projected to zero above -tol

    def validate(self) -> list[str]:
        errs = []
        for name in ("dt_init", "dt_min", "dt_max", "newton_tol", "jacobian_fd_epsilon",
                     "steady_state_tol", "negative_tol"):
            if not getattr(self, name) > 0:
                errs.append(f"solver.{name} must be positive")
        if not self.dt_min <= self.dt_init <= self.dt_max:
            errs.append("solver: need dt_min <= dt_init <= dt_max")
        if self.newton_max_iter < 1 or self.steady_state_window < 1:
            errs.append("solver: iteration counts must be >= 1")
        if self.max_sim_time < 0:
            errs.append("solver.max_sim_time must be >= 0")
        if not self.growth >= 1:
            errs.append("solver.growth must be >= 1")
        return errs


class StepFailure(RuntimeError):
    pass


class TimeStepUnderflow(RuntimeError):
    pass


class ScaledDAE:
    """Adapter mapping a model with ``evaluate(x, y) -> (f, g)`` to flat scaled vectors.

    The model may provide ``x_scale``, ``y_scale``, ``y_offset`` (arrays shaped
    like x and y), ``polish(x, y) -> y`` and ``nonnegative`` (mask over x).
    """

    def __init__(self, model, x_shape, y_shape):
        self.model = model
        self.x_shape = tuple(x_shape)
        self.y_shape = tuple(y_shape)
        self.nx = int(np.prod(x_shape))
        self.ny = int(np.prod(y_shape))
        self.sx = np.broadcast_to(getattr(model, "x_scale", 1.0), x_shape).ravel().astype(float)
        self.sy = np.broadcast_to(getattr(model, "y_scale", 1.0), y_shape).ravel().astype(float)
        self.oy = np.broadcast_to(getattr(model, "y_offset", 0.0), y_shape).ravel().astype(float)
        self.n_eval = 0

    def to_scaled(self, x, y):
        return np.concatenate([np.ravel(x) / self.sx, (np.ravel(y) - self.oy) / self.sy])

    def from_scaled(self, z):
        z = np.asarray(z)
        lead = z.shape[:-1]
        x = (z[..., : self.nx] * self.sx).reshape(lead + self.x_shape)
        y = (z[..., self.nx:] * self.sy + self.oy).reshape(lead + self.y_shape)
        return x, y

    def fg(self, z):
        """Scaled (f / sx, g) for one or a batch of scaled states."""
        x, y = self.from_scaled(z)
        f, g = self.model.evaluate(x, y)
        lead = np.shape(z)[:-1]
        self.n_eval += int(np.prod(lead)) if lead else 1
        return f.reshape(lead + (self.nx,)) / self.sx, g.reshape(lead + (self.ny,))

    def polish(self, z):
        if not hasattr(self.model, "polish"):
            return z
        x, y = self.from_scaled(z)
        y = self.model.polish(x, y)
        return self.to_scaled(x, y)


@dataclass
class _Jacobian:
    A: np.ndarray  # d(f/sx)/du
    B: np.ndarray  # d(f/sx)/dw
    C: np.ndarray  # dg/du
    D: np.ndarray  # dg/dw
    dt: float | None = None
    lu: tuple | None = None

    def factor(self, dt):
        if self.lu is None or self.dt != dt:
            nx = self.A.shape[0]
            top = np.hstack([np.eye(nx) - dt * self.A, -dt * self.B])
            bot = np.hstack([self.C, self.D])
            self.lu = lu_factor(np.vstack([top, bot]), check_finite=False)
            self.dt = dt
        return self.lu


@dataclass
class StepInfo:
    iterations: int
    residual: float
    jacobians: int


class ImplicitEuler:
    def __init__(self, dae: ScaledDAE, settings: SolverSettings | None = None):
        self.dae = dae
        self.s = SolverSettings() if settings is None else settings
        self.jac: _Jacobian | None = None
        self.stale = False
        self.n_jac = 0

    def residual(self, z, u_n, dt):
        f, g = self.dae.fg(z)
        nx = self.dae.nx
        return np.concatenate([z[:nx] - u_n - dt * f, g])

    def jacobian(self, z):
        eps = self.s.jacobian_fd_epsilon
        N = z.size
        h = eps * np.maximum(np.abs(z), 1.0)
        Z = np.repeat(z[None, :], N + 1, axis=0)
        Z[np.arange(1, N + 1), np.arange(N)] += h
        h = Z[np.arange(1, N + 1), np.arange(N)] - z  # exact representable steps
        f, g = self.dae.fg(Z)
        df = ((f[1:] - f[0]) / h[:, None]).T
        dg = ((g[1:] - g[0]) / h[:, None]).T
        nx = self.dae.nx
        self.n_jac += 1
        self.jac = _Jacobian(df[:, :nx], df[:, nx:], dg[:, :nx], dg[:, nx:])
        return self.jac

    def step(self, z_n, dt):
        """One implicit Euler step from the scaled state ``z_n``.

        The predictor is the previous state. Raises StepFailure when Newton
        does not converge.
        """
        s = self.s
        nx = self.dae.nx
        u_n = z_n[:nx].copy()
        z = z_n.copy()
        F = self.residual(z, u_n, dt)
        norm = np.max(np.abs(F))
        njac = 0
        need = self.jac is None or self.stale
        fresh = False
        it = 0
        while norm >= s.newton_tol:
            if it >= s.newton_max_iter:
                raise StepFailure(f"Newton did not converge in {it} iterations (|F| = {norm:.3e})")
            if need:
                self.jacobian(z)
                njac += 1
                need, fresh = False, True
            lu = self.jac.factor(dt)
            dz = lu_solve(lu, -F, check_finite=False)
            if not np.all(np.isfinite(dz)):
                raise StepFailure("singular Newton matrix")
            it += 1
            lam = 1.0
            accepted = False
            while lam >= 1.0 / 64:
                z_new = self.dae.polish(z + lam * dz)
                F_new = self.residual(z_new, u_n, dt)
                n_new = np.max(np.abs(F_new))
                if np.isfinite(n_new) and (n_new < (1.0 - 1e-4 * lam) * norm or n_new < s.newton_tol):
                    accepted = True
                    break
                lam *= 0.5
            if not accepted:
                if fresh:
                    raise StepFailure(f"line search failed (|F| = {norm:.3e})")
                need = True
                continue
            fresh = False
            if n_new > 0.5 * norm:
                need = True
            z, F, norm = z_new, F_new, n_new
        self.stale = it > 4
        return z, StepInfo(it, norm, njac)


@dataclass
class StepRecord:
    t: float
    dt: float
    iterations: int
    residual: float
    g_norm: float
    f_norm: float
    negative_mass: float


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    x: list = field(default_factory=list)
    y: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    steady_time: float | None = None
    wall_time: float = 0.0

    def add(self, t, x, y):
        self.times.append(float(t))
        self.x.append(np.array(x))
        self.y.append(np.array(y))

    def __len__(self):
        return len(self.times)


def _restore_algebraic(dae: ScaledDAE, ie: ImplicitEuler, z, tol):
    """Re-solve g(x, y) = 0 over y after x has been projected."""
    z = dae.polish(z)
    nx = dae.nx
    lu = None
    for _ in range(20):
        _, g = dae.fg(z)
        if np.max(np.abs(g)) < 0.1 * tol:
            break
        if lu is None:
            if ie.jac is None:
                ie.jacobian(z)
            lu = lu_factor(ie.jac.D, check_finite=False)
        z = z.copy()
        z[nx:] -= lu_solve(lu, g, check_finite=False)
        z = dae.polish(z)
    return z


def simulate(model, x0, y0, settings: SolverSettings | None = None, t_end: float | None = None,
             cadence: float | None = None, on_step=None, stop_at_steady: bool = False,
             fixed_dt: float | None = None, nonnegative=None) -> Trajectory:
    """March the DAE from a consistent (x0, y0).

    Snapshots are stored at the first accepted step at or after every
    multiple of ``cadence`` (every step when None), so the cadence never
    alters the step sequence. ``on_step(t, dt, x, y, x_sol, y_sol)`` is
    called after each accepted step, where (x_sol, y_sol) is the Newton
    solution before any projection. ``nonnegative`` masks the entries of x
    that are projected onto x >= 0.
    """
    s = SolverSettings() if settings is None else settings
    t_end = s.max_sim_time if t_end is None else float(t_end)
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    dae = ScaledDAE(model, x0.shape, y0.shape)
    ie = ImplicitEuler(dae, s)
    nx = dae.nx
    mask = None if nonnegative is None else np.broadcast_to(nonnegative, x0.shape).ravel()
    traj = Trajectory()
    traj.add(0.0, x0, y0)
    z = dae.to_scaled(x0, y0)
    t = 0.0
    dt = s.dt_init if fixed_dt is None else fixed_dt
    next_out = cadence if cadence else 0.0
    quiet = 0
    t_start = time.perf_counter()
    while t < t_end * (1 - 1e-12) and t_end > 0:
        h = min(dt, t_end - t)
        try:
            z_new, info = ie.step(z, h)
        except StepFailure as exc:
            if fixed_dt is not None:
                raise
            dt = 0.5 * h
            ie.jac = None
            log.debug("t=%.3f s: step %.3g s rejected (%s)", t, h, exc)
            if dt < s.dt_min:
                x, y = dae.from_scaled(z)
                raise TimeStepUnderflow(f"time step below {s.dt_min} s at t = {t:.3f} s: {exc}") from exc
            continue
        neg = 0.0
        z_sol = z_new
        if mask is not None:
            u = z_new[:nx]
            bad = mask & (u < 0)
            if np.any(bad):
                worst = -np.min(u[bad])
                if worst > s.negative_tol and fixed_dt is None:
                    dt = 0.5 * h
                    log.debug("t=%.3f s: negative concentration %.3e, step rejected", t, worst)
                    if dt < s.dt_min:
                        raise TimeStepUnderflow(f"negative concentrations persist at t = {t:.3f} s")
                    continue
                neg = float(np.sum(-u[bad]) * np.mean(dae.sx[:nx][bad]))
                z_new = z_new.copy()
                z_new[:nx][bad] = 0.0
                z_new = _restore_algebraic(dae, ie, z_new, s.newton_tol)
                log.debug("projected %d negative concentrations, defect %.3e", int(bad.sum()), neg)
        t += h
        z = z_new
        x, y = dae.from_scaled(z)
        f, g = dae.fg(z)
        f_norm = float(np.max(np.abs(f)))
        traj.steps.append(StepRecord(t, h, info.iterations, info.residual,
                                     float(np.max(np.abs(g))), f_norm, neg))
        if on_step is not None:
            on_step(t, h, x, y, *dae.from_scaled(z_sol))
        if cadence is None or t >= next_out * (1 - 1e-12):
            traj.add(t, x, y)
            if cadence:
                while next_out <= t * (1 + 1e-12):
                    next_out += cadence
        quiet = quiet + 1 if f_norm < s.steady_state_tol else 0
        if quiet >= s.steady_state_window and traj.steady_time is None:
            traj.steady_time = t
            if stop_at_steady:
                break
        if fixed_dt is None and info.iterations <= 3 and h == dt:
            dt = min(dt * s.growth, s.dt_max)
    if traj.times[-1] != t:
        traj.add(t, *dae.from_scaled(z))
    traj.wall_time = time.perf_counter() - t_start
    return traj


def consistent_initialization(model, x, y_guess, tol: float = 1e-12, max_iter: int = 30):
    """Solve g(x, y) = 0 for y with x frozen.

    Models exposing ``polish`` and ``consistent_pressure`` get their closed
    form solves first; a dense Newton on g over y then finishes the job.
    """
    x = np.asarray(x, dtype=float)
    y = np.array(y_guess, dtype=float)
    if hasattr(model, "polish"):
        y = model.polish(x, y)
    if hasattr(model, "consistent_pressure"):
        y[..., 3] = model.consistent_pressure(x, y)
        y = model.polish(x, y)
    dae = ScaledDAE(model, x.shape, y.shape)
    nx = dae.nx
    z = dae.to_scaled(x, y)
    for _ in range(max_iter):
        _, g = dae.fg(z)
        if np.max(np.abs(g)) < tol:
            return dae.from_scaled(z)[1]
        w = z[nx:]
        h = 1e-7 * np.maximum(np.abs(w), 1.0)
        Z = np.repeat(z[None, :], w.size + 1, axis=0)
        Z[np.arange(1, w.size + 1), nx + np.arange(w.size)] += h
        _, G = dae.fg(Z)
        J = ((G[1:] - G[0]) / h[:, None]).T
        z = z.copy()
        z[nx:] = w - np.linalg.solve(J, g)
        z = dae.polish(z)
    _, g = dae.fg(z)
    worst = int(np.argmax(np.abs(g)))
    if np.abs(g[worst]) >= max(tol, 1e-9):
        raise RuntimeError(f"consistent initialization failed: residual {g[worst]:.3e} at index {worst}")
    return dae.from_scaled(z)[1]
