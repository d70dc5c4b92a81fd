"""Monte Carlo posterior of random equation systems ``M(x; A) = B`` on 2-D grids.

The unnormalized posterior at a point is the sample mean of the product of
zero-mean Gaussian noise densities evaluated at the residuals,

    value(x) = 1/N * sum_n prod_r f_r(M_r(x; s_n)),

with no prior factor.  Values are taken at cell centers, so normalizing is a
plain Riemann sum over the grid window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .densities import SampleMatrix
from .errors import ContractError, DegeneratePosteriorError, EvaluationError

MASS_FLOOR = 1e-300


@dataclass(frozen=True)
class NoiseSpec:
    """Standard deviations of the zero-mean Gaussian residual noise, one per equation."""

    stds: tuple[float, ...]

    def __post_init__(self):
        stds = tuple(float(s) for s in np.atleast_1d(self.stds))
        if not stds or any(not (s > 0 and math.isfinite(s)) for s in stds):
            raise ValueError(f"noise stds must be positive and finite, got {stds}")
        object.__setattr__(self, "stds", stds)

    @property
    def norm_const(self):
        """prod_r (2 pi sd_r^2)^(-1/2)"""
        return float(np.prod([1.0 / (math.sqrt(2.0 * math.pi) * s) for s in self.stds]))


def _centers(lo, hi, n):
    """Cell midpoints; on a window symmetric about 0 they are exact mirror images."""
    k = np.arange(n) + 0.5
    return ((n - k) * lo + k * hi) / n


@dataclass(frozen=True)
class GridSpec2D:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int

    def __post_init__(self):
        for name in ("x_min", "x_max", "y_min", "y_max"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"empty grid window {self}")
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grids need at least 2 cells per axis")

    @property
    def dx(self):
        return (self.x_max - self.x_min) / self.nx

    @property
    def dy(self):
        return (self.y_max - self.y_min) / self.ny

    @property
    def cell_area(self):
        # one rounding instead of two; exact for e.g. a unit square of 10 x 10 cells
        return (self.x_max - self.x_min) * (self.y_max - self.y_min) / (self.nx * self.ny)

    @property
    def x_centers(self):
        return _centers(self.x_min, self.x_max, self.nx)

    @property
    def y_centers(self):
        return _centers(self.y_min, self.y_max, self.ny)

    @property
    def shape(self):
        """Array shape of grid values: ``(ny, nx)``, rows are y."""
        return (self.ny, self.nx)

    def cell_of(self, x, y):
        """``(i, j)`` of the cell containing ``(x, y)``; None if outside."""
        i = math.floor((x - self.x_min) / self.dx)
        j = math.floor((y - self.y_min) / self.dy)
        if 0 <= i < self.nx and 0 <= j < self.ny:
            return i, j
        return None

    def center(self, i, j):
        return float(self.x_centers[i]), float(self.y_centers[j])

    def as_dict(self):
        return {k: getattr(self, k) for k in ("x_min", "x_max", "y_min", "y_max", "nx", "ny")}


@dataclass(frozen=True, eq=False)
class DensityGrid2D:
    """Non-negative values on a :class:`GridSpec2D`, stored as ``values[j, i]``."""

    spec: GridSpec2D
    values: np.ndarray
    normalized: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.spec.shape:
            raise ContractError(f"values shape {values.shape} != grid shape {self.spec.shape}")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ContractError("density values must be finite and non-negative")
        object.__setattr__(self, "values", values)

    @property
    def mass(self):
        return float(self.values.sum() * self.spec.cell_area)

    def argmax(self):
        """``(i, j)`` of the largest value (first in row-major order on ties)."""
        j, i = np.unravel_index(np.argmax(self.values), self.values.shape)
        return int(i), int(j)

    def argmax_point(self):
        return self.spec.center(*self.argmax())


@dataclass(frozen=True)
class ResidualSystem:
    """A residual map ``(point[D], params[K]) -> residual[R]``.

    ``func`` must broadcast over leading axes: points of shape ``(..., D)`` and
    params of shape ``(..., K)`` give residuals of shape ``(..., R)``.
    ``kernel``, if given, is a fast path with signature
    ``kernel(x_centers, y_centers, params, stds, threads, backend)`` returning
    the sample mean of ``exp(-|z|^2 / 2)`` on the grid as ``(ny, nx)``.
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    n_state: int
    n_params: int
    n_residuals: int
    kernel: Optional[Callable] = None
    context: tuple = ()
    name: str = "system"

    def __call__(self, point, params):
        return self.func(np.asarray(point, dtype=float), np.asarray(params, dtype=float))


def posterior_unnormalized(system: ResidualSystem, samples: SampleMatrix, noise: NoiseSpec,
                           grid: GridSpec2D, threads: int = 1, backend: str | None = None,
                           use_kernel: bool = True) -> DensityGrid2D:
    """Monte Carlo estimate of the (unnormalized) posterior at every cell center."""
    if system.n_state != 2:
        raise ContractError("only 2-D state grids are supported")
    if samples.cols != system.n_params:
        raise ContractError(f"samples have {samples.cols} columns, system needs {system.n_params}")
    if len(noise.stds) != system.n_residuals:
        raise ContractError(f"noise has {len(noise.stds)} stds, system has {system.n_residuals} residuals")

    xc, yc = grid.x_centers, grid.y_centers
    order = canonical_order(samples.values)
    params = np.ascontiguousarray(samples.values[order])
    try:
        if use_kernel and system.kernel is not None:
            mean_exp = system.kernel(xc, yc, params, noise.stds, threads, backend)
        else:
            mean_exp = _generic_mean_exp(system, params, noise.stds, xc, yc)
    except EvaluationError as exc:
        # report the caller's row, not the position after sorting
        row = int(order[exc.sample])
        raise EvaluationError(f"non-finite residual at cell {exc.cell}, sample row {row}",
                              cell=exc.cell, sample=row) from None
    values = mean_exp * noise.norm_const
    return DensityGrid2D(grid, values, normalized=False, meta={"n_samples": samples.rows})


def canonical_order(values):
    """Lexicographic row order; summing in it makes results ignore the input order."""
    return np.lexsort(values.T[::-1])


def _generic_mean_exp(system, params, stds, xc, yc, chunk=4_000_000):
    ns = params.shape[0]
    inv = 1.0 / np.asarray(stds)
    out = np.empty((len(yc), len(xc)))
    # split each row of cells so the (cells, samples, R) block stays bounded
    step = max(1, chunk // max(ns * len(stds), 1))
    cut = _kernels.get("python").TAIL_CUT
    with np.errstate(all="ignore"):
        for j, y in enumerate(yc):
            for i0 in range(0, len(xc), step):
                xs = xc[i0:i0 + step]
                pts = np.stack([xs, np.full_like(xs, y)], axis=-1)[:, None, :]
                res = system.func(pts, params[None, :, :])
                z = res * inv
                q = np.sum(z * z, axis=-1)
                if not np.all(np.isfinite(q)):
                    c, n = np.argwhere(~np.isfinite(q))[0]
                    raise EvaluationError(
                        f"non-finite residual at cell {(i0 + c, j)}, sample row {n}",
                        cell=(int(i0 + c), j), sample=int(n))
                out[j, i0:i0 + step] = np.where(q <= cut, np.exp(-0.5 * q), 0.0).sum(axis=1) / ns
    return out


def normalize(g: DensityGrid2D, mass_floor: float = MASS_FLOOR) -> DensityGrid2D:
    """Scale ``g`` to unit mass over its grid window."""
    if g.normalized:
        return g
    mass = g.mass
    if not mass > mass_floor:
        raise DegeneratePosteriorError("no solution mass on grid")
    meta = dict(g.meta, window=g.spec.as_dict(), raw_mass=mass)
    return DensityGrid2D(g.spec, g.values / mass, normalized=True, meta=meta)
