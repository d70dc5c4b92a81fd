"""Classical verification of steady-state posteriors.

Each route draws parameter sets independently (no latin hypercube), solves
the deterministic problem per draw and bins the resulting steady states:

* ``histogram_analytic`` - closed-form coexistence state,
* ``histogram_newton``   - damped Newton on the steady-state residual,
* ``histogram_ode``      - fixed-step RK4 run until the right-hand side vanishes.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .densities import ParameterLaw, plain_sample
from .errors import (ContractError, DegeneratePosteriorError, IntegrationBlowUpError,
                     VerificationWarning)
from .model_rm import (_check_state, jacobian_entries, nontrivial_equilibria,
                       rm_steady_residual)
from .randeq import DensityGrid2D, GridSpec2D

SINGULAR_DET = 1e-14


@dataclass(frozen=True)
class NewtonConfig:
    start: tuple[float, float] = (0.3, 0.9)
    tol: float = 1e-12
    max_iters: int = 100
    damping_min: float = 1.0 / 1024

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(float(v) for v in self.start))
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0 < self.damping_min <= 1:
            raise ValueError("damping_min must lie in (0, 1]")


@dataclass(frozen=True)
class OdeConfig:
    initial: tuple[float, float] = (0.3, 0.9)
    dt: float = 0.01
    t_max: float = 2000.0
    steady_tol: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "initial", tuple(float(v) for v in self.initial))
        if not (self.dt > 0 and self.t_max > 0 and self.steady_tol > 0):
            raise ValueError("dt, t_max and steady_tol must be positive")
        if not self.dt < self.t_max:
            raise ValueError("dt must be smaller than t_max")

    @property
    def n_steps(self):
        return int(math.ceil(self.t_max / self.dt - 1e-9))


@dataclass
class NewtonResult:
    x: np.ndarray
    success: bool
    iterations: int
    message: str
    params: tuple[float, float, float]


@dataclass
class OdeResult:
    state: np.ndarray
    converged: bool
    t: float
    trajectory: np.ndarray | None = None


@dataclass
class HistogramReport:
    method: str
    n: int
    n_binned: int
    n_failed: int
    n_outside: int
    extra: dict = field(default_factory=dict)

    @property
    def failure_rate(self):
        return self.n_failed / self.n if self.n else 0.0

    def as_dict(self):
        return dict(method=self.method, n=self.n, n_binned=self.n_binned,
                    n_failed=self.n_failed, n_outside=self.n_outside,
                    failure_rate=self.failure_rate, **self.extra)


def newton_solve(params, cfg: NewtonConfig = NewtonConfig()) -> NewtonResult:
    """Damped Newton iteration for a steady state of the model.

    The step is halved until the residual norm decreases, down to
    ``cfg.damping_min`` (that step is then taken regardless).  Success means
    ``max |residual| <= cfg.tol``.
    """
    params = tuple(float(v) for v in params)
    x = np.array(cfg.start, dtype=float)
    f = rm_steady_residual(x, params)
    it = 0
    with np.errstate(all="ignore"):
        while True:
            if np.max(np.abs(f)) <= cfg.tol:
                return NewtonResult(x, True, it, "converged", params)
            if it >= cfg.max_iters or not np.all(np.isfinite(f)):
                return NewtonResult(x, False, it, "no convergence", params)
            j11, j12, j21, j22 = jacobian_entries(x, params)
            det = j11 * j22 - j12 * j21
            if abs(det) < SINGULAR_DET:
                return NewtonResult(x, False, it, "singular Jacobian", params)
            step = -np.array([j22 * f[0] - j12 * f[1], -j21 * f[0] + j11 * f[1]]) / det
            fn = f @ f
            lam = 1.0
            while True:
                xn = x + lam * step
                fnew = rm_steady_residual(xn, params)
                if fnew @ fnew < fn or lam <= cfg.damping_min:
                    break
                lam = max(0.5 * lam, cfg.damping_min)
            x, f = xn, fnew
            it += 1


def integrate_ode(params, cfg: OdeConfig = OdeConfig(), record: bool = False) -> OdeResult:
    """Classical RK4 with fixed step until ``max |rhs| <= steady_tol`` or ``t_max``."""
    k, m, c = (float(v) for v in params)
    x, y = _check_state(cfg.initial)
    dt = cfg.dt

    def rhs(x, y):
        pred = m * x * y / (1 + x)
        return x * (1 - x / k) - pred, -c * y + pred

    traj = [(x, y)] if record else None
    f1, f2 = rhs(x, y)
    if max(abs(f1), abs(f2)) <= cfg.steady_tol:
        return OdeResult(np.array([x, y]), True, 0.0, np.array(traj) if record else None)
    for step in range(1, cfg.n_steps + 1):
        b1, b2 = rhs(x + 0.5 * dt * f1, y + 0.5 * dt * f2)
        c1, c2 = rhs(x + 0.5 * dt * b1, y + 0.5 * dt * b2)
        d1, d2 = rhs(x + dt * c1, y + dt * c2)
        x = x + dt / 6.0 * (f1 + 2.0 * b1 + 2.0 * c1 + d1)
        y = y + dt / 6.0 * (f2 + 2.0 * b2 + 2.0 * c2 + d2)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise IntegrationBlowUpError(f"state became non-finite at t={step * dt} for params {params}")
        if record:
            traj.append((x, y))
        f1, f2 = rhs(x, y)
        if max(abs(f1), abs(f2)) <= cfg.steady_tol:
            return OdeResult(np.array([x, y]), True, step * dt, np.array(traj) if record else None)
    return OdeResult(np.array([x, y]), False, cfg.n_steps * dt, np.array(traj) if record else None)


def bin_points(points, grid: GridSpec2D):
    """Counts per cell (``(ny, nx)``) and the number of points outside the window."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    counts, _, _ = np.histogram2d(
        points[:, 1], points[:, 0], bins=(grid.ny, grid.nx),
        range=((grid.y_min, grid.y_max), (grid.x_min, grid.x_max)))
    return counts, len(points) - int(counts.sum())


def _histogram(points, grid, report):
    counts, outside = bin_points(points, grid)
    report.n_outside = outside
    report.n_binned = int(counts.sum())
    if report.n_binned == 0:
        raise DegeneratePosteriorError(f"{report.method}: no steady states inside the grid window")
    if report.failure_rate > 0.5:
        warnings.warn(f"{report.method}: {report.failure_rate:.1%} of solves failed",
                      VerificationWarning, stacklevel=3)
    values = counts / (report.n_binned * grid.cell_area)
    return DensityGrid2D(grid, values, True, {"method": report.method, "n": report.n})


def _draw(law, n, seed):
    if n <= 0:
        raise DegeneratePosteriorError("verification needs n >= 1 parameter draws")
    return plain_sample(law, n, seed).values


def histogram_analytic(law: ParameterLaw, n: int, seed: int, grid: GridSpec2D):
    """Bin the closed-form coexistence states of ``n`` independent draws."""
    params = _draw(law, n, seed)
    eq = nontrivial_equilibria(params)
    ok = np.all(np.isfinite(eq), axis=1)
    report = HistogramReport("analytic", n, 0, int(np.count_nonzero(~ok)), 0)
    return _histogram(eq[ok], grid, report), report


def histogram_newton(law: ParameterLaw, n: int, seed: int, cfg: NewtonConfig,
                     grid: GridSpec2D, threads: int = 1, backend: str | None = None):
    """Bin Newton roots of ``n`` independent draws; failures are excluded and counted."""
    params = _draw(law, n, seed)
    roots, status, iters = _kernels.get(backend).newton_batch(
        params, cfg.start[0], cfg.start[1], cfg.tol, cfg.max_iters, cfg.damping_min, threads)
    ok = status == _kernels.ST_OK
    report = HistogramReport("newton", n, 0, int(np.count_nonzero(~ok)), 0, {
        "singular": int(np.count_nonzero(status == _kernels.ST_SINGULAR)),
        "mean_iterations": float(iters[ok].mean()) if ok.any() else None,
    })
    return _histogram(roots[ok], grid, report), report


def histogram_ode(law: ParameterLaw, n: int, seed: int, cfg: OdeConfig, grid: GridSpec2D,
                  threads: int = 1, backend: str | None = None):
    """Bin the steady states reached by RK4 runs; only converged runs are binned."""
    if cfg.initial[0] < 0 or cfg.initial[1] < 0:
        raise ContractError("initial state must lie in the closed positive quadrant")
    params = _draw(law, n, seed)
    final, status, t_end = _kernels.get(backend).rk4_batch(
        params, cfg.initial[0], cfg.initial[1], cfg.dt, cfg.n_steps, cfg.steady_tol, threads)
    ok = status == _kernels.ST_OK
    blown = int(np.count_nonzero(status == _kernels.ST_BLOWUP))
    report = HistogramReport("ode", n, 0, int(np.count_nonzero(~ok)), 0, {
        "blow_ups": blown,
        "max_t_converged": float(t_end[ok].max()) if ok.any() else None,
    })
    return _histogram(final[ok], grid, report), report


def total_variation(a: DensityGrid2D, b: DensityGrid2D) -> float:
    """Half the L1 distance between two normalized grids on the same window."""
    if a.spec != b.spec:
        raise ContractError("total variation needs identical grid specs")
    if not (a.normalized and b.normalized):
        raise ContractError("total variation needs normalized grids")
    return float(0.5 * np.sum(np.abs(a.values - b.values)) * a.spec.cell_area)
