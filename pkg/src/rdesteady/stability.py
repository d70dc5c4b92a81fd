"""Eigenvalue posteriors and the stability probability kappa(x).

kappa(x) is the posterior mass of the Jacobian eigenvalues with negative real
part.  Two estimators are provided: the grid route integrates the eigenvalue
posterior over the left half of the sigma window; the direct route counts
negative real parts of the per-sample eigenvalues.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .densities import SampleMatrix
from .errors import ContractError
from .model_rm import eig_system, eigenvalues_from_trace_det, trace_det
from .randeq import DensityGrid2D, GridSpec2D, NoiseSpec, normalize, posterior_unnormalized

KAPPA_TOL = 1e-9

# odd counts put sigma2 = 0 on a row of cell centers
DEFAULT_SIGMA_GRID = GridSpec2D(-1.5, 1.5, -1.5, 1.5, 151, 151)


@dataclass(frozen=True, eq=False)
class KappaGrid:
    spec: GridSpec2D
    values: np.ndarray
    method: str = "direct"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.spec.shape:
            raise ContractError(f"kappa shape {values.shape} != grid shape {self.spec.shape}")
        if np.any(values < -KAPPA_TOL) or np.any(values > 1 + KAPPA_TOL):
            raise ContractError("kappa values outside [0, 1]")
        object.__setattr__(self, "values", values)

    def at(self, x, y):
        cell = self.spec.cell_of(x, y)
        if cell is None:
            raise ContractError(f"({x}, {y}) lies outside the kappa region")
        i, j = cell
        return float(self.values[j, i])

    def as_density_grid(self):
        """View as a (non-normalized) grid for CSV / heatmap output."""
        return DensityGrid2D(self.spec, np.clip(self.values, 0.0, 1.0), False,
                             dict(self.meta, quantity="kappa", method=self.method))


@dataclass(frozen=True)
class ProbePoint:
    location: tuple[float, float]
    label: str

    def __post_init__(self):
        loc = tuple(float(v) for v in self.location)
        if len(loc) != 2 or not all(np.isfinite(loc)):
            raise ValueError(f"probe location must be two finite numbers, got {self.location}")
        object.__setattr__(self, "location", loc)


def eig_posterior(location, samples: SampleMatrix, noise: NoiseSpec,
                  sigma_grid: GridSpec2D = DEFAULT_SIGMA_GRID, threads: int = 1,
                  backend: str | None = None) -> DensityGrid2D:
    """Normalized posterior of the eigenvalues ``sigma1 + i sigma2`` at ``location``."""
    if len(noise.stds) != 2:
        raise ContractError("eigenvalue noise needs exactly two stds")
    raw = posterior_unnormalized(eig_system(location), samples, noise, sigma_grid,
                                 threads=threads, backend=backend)
    g = normalize(raw)
    g.meta["location"] = list(map(float, location))
    return g


def sigma2_asymmetry(g: DensityGrid2D) -> float:
    """max |v(s1, s2) - v(s1, -s2)| for a grid symmetric about sigma2 = 0."""
    s = g.spec
    if abs(s.y_min + s.y_max) > 1e-12 * max(1.0, abs(s.y_min)):
        raise ContractError("sigma window is not symmetric about sigma2 = 0")
    return float(np.max(np.abs(g.values - g.values[::-1, :])))


def kappa_from_grid(eig_density: DensityGrid2D) -> float:
    """Mass of a normalized eigenvalue density on cells with center sigma1 < 0."""
    if not eig_density.normalized:
        raise ContractError("kappa_from_grid needs a normalized eigenvalue density")
    s = eig_density.spec
    neg = s.x_centers < 0
    kappa = float(eig_density.values[:, neg].sum() * s.cell_area)
    if kappa > 1 + KAPPA_TOL or kappa < -KAPPA_TOL:
        raise ContractError(f"kappa {kappa} outside [0, 1]")
    return min(max(kappa, 0.0), 1.0)


def eigen_real_parts(location, samples: SampleMatrix):
    """``(N, 2)`` real parts of the per-sample Jacobian eigenvalues at ``location``."""
    t, d = trace_det(location, samples.values)
    l1, l2 = eigenvalues_from_trace_det(t, d)
    return np.stack([l1.real, l2.real], axis=-1)


def kappa_direct(location, samples: SampleMatrix) -> float:
    """Fraction of the ``2N`` sampled eigenvalues with negative real part."""
    if samples.cols != 3:
        raise ContractError("kappa_direct needs (k, m, c) samples")
    re = eigen_real_parts(location, samples)
    # integer count, so row order cannot change the result
    return int(np.count_nonzero(re < 0)) / (2 * samples.rows)


def kappa_map(region: GridSpec2D, samples: SampleMatrix, method: str = "direct",
              noise: NoiseSpec | None = None, sigma_grid: GridSpec2D = DEFAULT_SIGMA_GRID,
              threads: int = 1, backend: str | None = None, progress=None) -> KappaGrid:
    """kappa at every cell center of ``region``.

    ``method="grid"`` evaluates the full eigenvalue posterior per cell;
    ``method="direct"`` counts sampled eigenvalue signs.
    """
    if method not in ("grid", "direct"):
        raise ValueError(f"unknown kappa method {method!r}")
    if method == "grid" and noise is None:
        raise ContractError("method='grid' needs eigenvalue noise stds")
    out = np.empty(region.shape)
    xc, yc = region.x_centers, region.y_centers
    for j, y in enumerate(yc):
        for i, x in enumerate(xc):
            if method == "direct":
                out[j, i] = kappa_direct((x, y), samples)
            else:
                g = eig_posterior((x, y), samples, noise, sigma_grid, threads, backend)
                out[j, i] = kappa_from_grid(g)
        if progress is not None:
            progress(j + 1, len(yc))
    meta = {"method": method, "n_samples": samples.rows}
    if method == "grid":
        meta.update(sigma_grid=sigma_grid.as_dict(), noise_stds=list(noise.stds))
    return KappaGrid(region, out, method, meta)
