"""Gaussian-mixture parameter laws and latin hypercube sampling."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import DomainError, SamplingError

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

MAX_REDRAWS = 1000


@dataclass(frozen=True)
class MixtureDensity1D:
    """Univariate Gaussian mixture ``sum_j w_j N(mu_j, sd_j^2)``.

    ``support_floor``, when set, is a strict lower bound enforced by the
    samplers (draws at or below it are redrawn); the density functions
    themselves are the untruncated mixture.
    """

    components: tuple[tuple[float, float, float], ...]
    support_floor: float | None = None

    def __post_init__(self):
        comps = tuple(tuple(float(v) for v in comp) for comp in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("mixture needs at least one component")
        for comp in comps:
            if len(comp) != 3:
                raise ValueError(f"component {comp} is not a (weight, mean, std) triple")
            w, mu, sd = comp
            if not (w > 0 and np.isfinite(w)):
                raise ValueError(f"component weight must be positive, got {w}")
            if not (sd > 0 and np.isfinite(sd)):
                raise ValueError(f"component std must be positive, got {sd}")
            if not np.isfinite(mu):
                raise ValueError(f"component mean must be finite, got {mu}")
        total = sum(c[0] for c in comps)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"mixture weights sum to {total!r}, not 1")

    @classmethod
    def normal(cls, mean, std, support_floor=None):
        return cls(((1.0, mean, std),), support_floor)

    @property
    def weights(self):
        return np.array([c[0] for c in self.components])

    @property
    def means(self):
        return np.array([c[1] for c in self.components])

    @property
    def stds(self):
        return np.array([c[2] for c in self.components])

    def bracket(self):
        """Interval outside which the mixture has negligible mass."""
        mu, sd = self.means, self.stds
        return float(np.min(mu - 10 * sd)), float(np.max(mu + 10 * sd))

    def pdf(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        z = (t - self.means) / self.stds
        return np.sum(self.weights * _INV_SQRT_2PI * np.exp(-0.5 * z * z) / self.stds, axis=-1)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        return np.sum(self.weights * ndtr((t - self.means) / self.stds), axis=-1)

    def ppf(self, p):
        """Inverse CDF by bisection on the ten-sigma bracket."""
        p = np.asarray(p, dtype=float)
        if np.any(~((p > 0) & (p < 1))):
            raise DomainError("inverse CDF needs probabilities strictly inside (0, 1)")
        lo_b, hi_b = self.bracket()
        lo = np.full(p.shape, lo_b)
        hi = np.full(p.shape, hi_b)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if np.all((mid == lo) | (mid == hi)):
                break
            below = self.cdf(mid) < p
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        # pick whichever bracket end is closer in probability
        t = np.where(np.abs(self.cdf(lo) - p) <= np.abs(self.cdf(hi) - p), lo, hi)
        return t if t.ndim else float(t)

    def rvs(self, n, rng):
        """Plain (non-stratified) draws, component by component."""
        comp = rng.choice(len(self.components), size=n, p=self.weights)
        out = self.means[comp] + self.stds[comp] * rng.standard_normal(n)
        if self.support_floor is not None:
            for i in np.flatnonzero(out <= self.support_floor):
                for _ in range(MAX_REDRAWS):
                    j = rng.choice(len(self.components), p=self.weights)
                    out[i] = self.means[j] + self.stds[j] * rng.standard_normal()
                    if out[i] > self.support_floor:
                        break
                else:
                    raise SamplingError(f"redraw budget exhausted for {self}")
        return out


def mixture_pdf(d: MixtureDensity1D, t):
    return d.pdf(t)


def mixture_cdf(d: MixtureDensity1D, t):
    return d.cdf(t)


def mixture_inverse_cdf(d: MixtureDensity1D, p):
    return d.ppf(p)


@dataclass(frozen=True)
class ParameterLaw:
    """Independent marginals; the joint density is their product."""

    marginals: tuple[MixtureDensity1D, ...]
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "marginals", tuple(self.marginals))
        if not self.marginals:
            raise ValueError("a parameter law needs at least one marginal")
        if self.names is not None:
            object.__setattr__(self, "names", tuple(self.names))
            if len(self.names) != len(self.marginals):
                raise ValueError("names and marginals differ in length")

    @property
    def dim(self):
        return len(self.marginals)


@dataclass(frozen=True, eq=False)
class SampleMatrix:
    """``rows x cols`` parameter draws plus the uniforms they came from."""

    values: np.ndarray
    uniforms: np.ndarray | None = field(default=None, repr=False)
    seed: int | None = None

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("sample values must be a 2-D array")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def rows(self):
        return self.values.shape[0]

    @property
    def cols(self):
        return self.values.shape[1]

    def stratification_ok(self):
        """Every column's uniforms occupy each stratum [i/n, (i+1)/n) once."""
        if self.uniforms is None:
            return False
        n = self.rows
        strata = np.floor(self.uniforms * n).astype(np.int64)
        return all(
            np.array_equal(np.sort(strata[:, j]), np.arange(n)) for j in range(self.cols)
        )

    def permuted(self, order):
        u = None if self.uniforms is None else self.uniforms[order]
        return SampleMatrix(self.values[order], u, self.seed)


def lhs_sample(law: ParameterLaw, n: int, seed: int) -> SampleMatrix:
    """Latin hypercube sample of ``law`` through the marginal inverse CDFs.

    Each column has its own child stream of ``SeedSequence(seed)``, so adding
    a parameter never changes the earlier columns.  Draws that do not exceed a
    marginal's ``support_floor`` are redrawn inside the same stratum.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    streams = np.random.SeedSequence(seed).spawn(law.dim)
    values = np.empty((n, law.dim))
    uniforms = np.empty((n, law.dim))
    for j, (marg, stream) in enumerate(zip(law.marginals, streams)):
        rng = np.random.default_rng(stream)
        strata = rng.permutation(n)
        u = (strata + rng.random(n)) / n
        # rounding can push (s + r) / n onto the next stratum boundary
        bad = (u <= 0.0) | (np.floor(u * n) != strata)
        for i in np.flatnonzero(bad):
            u[i] = _redraw_uniform(rng, strata[i], n, _in_stratum(strata[i], n), marg, j)
        v = np.asarray(marg.ppf(u), dtype=float)
        if marg.support_floor is not None:
            floor = marg.support_floor
            for i in np.flatnonzero(v <= floor):
                in_stratum = _in_stratum(strata[i], n)
                u[i] = _redraw_uniform(
                    rng, strata[i], n, lambda p: in_stratum(p) and marg.ppf(p) > floor,
                    marg, j)
                v[i] = marg.ppf(u[i])
        values[:, j] = v
        uniforms[:, j] = u
    return SampleMatrix(values, uniforms, seed)


def _in_stratum(stratum, n):
    return lambda p: 0.0 < p < 1.0 and np.floor(p * n) == stratum


def _redraw_uniform(rng, stratum, n, ok, marg, col):
    for _ in range(MAX_REDRAWS):
        p = (stratum + rng.random()) / n
        if ok(p):
            return p
    raise SamplingError(
        f"column {col}: no admissible draw in stratum {stratum}/{n} after "
        f"{MAX_REDRAWS} attempts for marginal {marg}")


def plain_sample(law: ParameterLaw, n: int, seed: int) -> SampleMatrix:
    """Independent (non-LHS) draws, used by the verification routines."""
    if n < 0:
        raise ValueError("n must be >= 0")
    # distinct entropy from lhs_sample so the two never share streams
    streams = np.random.SeedSequence([seed, 1]).spawn(law.dim)
    values = np.empty((n, law.dim))
    for j, (marg, stream) in enumerate(zip(law.marginals, streams)):
        values[:, j] = marg.rvs(n, np.random.default_rng(stream))
    return SampleMatrix(values, None, seed)
