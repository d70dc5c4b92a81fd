"""Normalized Rosenzweig-MacArthur predator-prey model (Holling type II).

    dx/ds = x (1 - x/k) - m x y / (1 + x)
    dy/ds = -c y + m x y / (1 + x)

Parameter vectors are ordered ``(k, m, c)``; states ``(x, y)`` are the
normalized prey and predator populations.  The array functions broadcast
over leading axes.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import DomainError, EvaluationError
from .randeq import ResidualSystem

MODEL_NAME = "rosenzweig-macarthur"


class RMParams(NamedTuple):
    k: float
    m: float
    c: float


class PopulationState(NamedTuple):
    x: float
    y: float


class ComplexEigenPair(NamedTuple):
    l1: complex
    l2: complex


def _check_params(p):
    k, m, c = (float(v) for v in p)
    if not (k > 0 and m > 0 and c > 0):
        raise DomainError(f"RM parameters must be positive, got k={k}, m={m}, c={c}")
    return RMParams(k, m, c)


def _check_state(s):
    x, y = (float(v) for v in s)
    if x == -1.0:
        raise DomainError("prey state x = -1 is a pole of the functional response")
    return x, y


def rm_steady_residual(point, params):
    """Steady-state residual ``(M1, M2)``; identical arithmetic to :func:`rm_rhs`."""
    point = np.asarray(point, dtype=float)
    params = np.asarray(params, dtype=float)
    x, y = point[..., 0], point[..., 1]
    k, m, c = params[..., 0], params[..., 1], params[..., 2]
    pred = m * x * y / (1 + x)
    return np.stack(np.broadcast_arrays(x * (1 - x / k) - pred, -c * y + pred), axis=-1)


def rm_rhs(s, p):
    """Right-hand side of the ODE at state ``s`` for parameters ``p``."""
    _check_state(s)
    return rm_steady_residual(s, p)


def rm_equilibria(p) -> list[PopulationState]:
    """Steady states: (0, 0), (k, 0) and, if it exists, the coexistence state."""
    k, m, c = _check_params(p)
    out = [PopulationState(0.0, 0.0), PopulationState(k, 0.0)]
    if m > c:
        x = c / (m - c)
        if k > x:
            y = (1 / m) * (1 + x) * (1 - c / (k * (m - c)))
            out.append(PopulationState(x, y))
    return out


def nontrivial_equilibria(params):
    """Vectorized coexistence state for a ``(N, 3)`` array; NaN rows where none exists."""
    params = np.asarray(params, dtype=float)
    k, m, c = params[..., 0], params[..., 1], params[..., 2]
    with np.errstate(all="ignore"):
        x = c / (m - c)
        y = (1 / m) * (1 + x) * (1 - c / (k * (m - c)))
    ok = (m > c) & (k > x)
    return np.where(ok[..., None], np.stack([x, y], axis=-1), np.nan)


def jacobian_entries(point, params):
    """``(j11, j12, j21, j22)`` of the ODE Jacobian, broadcasting."""
    point = np.asarray(point, dtype=float)
    params = np.asarray(params, dtype=float)
    x, y = point[..., 0], point[..., 1]
    k, m, c = params[..., 0], params[..., 1], params[..., 2]
    opx = 1 + x
    j11 = 1 - 2 * x / k - m * y / opx**2
    j12 = -m * x / opx
    j21 = m * y / opx**2
    j22 = -c + m * x / opx
    return j11, j12, j21, j22


def rm_jacobian(s, p):
    _check_state(s)
    j11, j12, j21, j22 = (float(v) for v in jacobian_entries(s, p))
    return np.array([[j11, j12], [j21, j22]])


def trace_det(location, params):
    """Trace and determinant of the Jacobian (the characteristic-polynomial coefficients)."""
    j11, j12, j21, j22 = jacobian_entries(location, params)
    return j11 + j22, j11 * j22 - j12 * j21


def eigenvalues_from_trace_det(trace, det):
    """Roots of ``l^2 - trace l + det``, cancellation-free.

    Real roots use ``q = (trace + sign(trace) sqrt(disc)) / 2`` and ``det / q``.
    Returns complex arrays ``(l1, l2)``; for complex pairs ``l1`` has the
    positive imaginary part.
    """
    trace = np.asarray(trace, dtype=float)
    det = np.asarray(det, dtype=float)
    disc = trace * trace - 4 * det
    real = disc >= 0
    root = np.sqrt(np.abs(disc))
    sgn = np.where(trace >= 0, 1.0, -1.0)
    q = 0.5 * (trace + sgn * root)
    with np.errstate(divide="ignore", invalid="ignore"):
        other = np.where(q != 0, det / np.where(q != 0, q, 1.0), 0.0)
    l1 = np.where(real, q + 0j, 0.5 * trace + 0.5j * root)
    l2 = np.where(real, other + 0j, 0.5 * trace - 0.5j * root)
    return l1, l2


def rm_eigenvalues(s, p) -> ComplexEigenPair:
    """Jacobian eigenvalues at ``s``.

    A triangular Jacobian (e.g. at (0, 0) or (k, 0)) returns its diagonal
    exactly; otherwise the stable quadratic formula is used.
    """
    _check_state(s)
    j11, j12, j21, j22 = (float(v) for v in jacobian_entries(s, p))
    if j12 == 0.0 or j21 == 0.0:
        return ComplexEigenPair(complex(j11), complex(j22))
    l1, l2 = eigenvalues_from_trace_det(j11 + j22, j11 * j22 - j12 * j21)
    return ComplexEigenPair(complex(l1), complex(l2))


def rm_charpoly_residual(sigma, location, params):
    """Real and imaginary parts of ``det(J - (s1 + i s2) I)``.

    ``M1 = s1^2 - s2^2 - T s1 + D`` and ``M2 = 2 s1 s2 - T s2`` with ``T``,
    ``D`` the Jacobian trace and determinant at ``location``.
    """
    sigma = np.asarray(sigma, dtype=float)
    s1, s2 = sigma[..., 0], sigma[..., 1]
    t, d = trace_det(location, params)
    return np.stack(np.broadcast_arrays(s1 * s1 - s2 * s2 - t * s1 + d, 2 * s1 * s2 - t * s2), axis=-1)


def _steady_kernel(xc, yc, params, stds, threads, backend):
    kern = _kernels.get(backend)
    # invalid parameters surface below as non-finite residuals, not warnings
    with np.errstate(all="ignore"):
        vals, bad = kern.steady_density(xc, yc, params, stds[0], stds[1], threads)
    rows = np.flatnonzero(bad >= 0)
    if rows.size:
        j = int(rows[0])
        i, n = int(bad[j] % len(xc)), int(bad[j] // len(xc))
        raise EvaluationError(f"non-finite residual at cell {(i, j)}, sample row {n}",
                              cell=(i, j), sample=n)
    return vals


def steady_system() -> ResidualSystem:
    """Steady-state residual as a random equation system (D=2, K=3, R=2)."""
    return ResidualSystem(rm_steady_residual, 2, 3, 2, kernel=_steady_kernel,
                          name="rm-steady")


def eig_system(location) -> ResidualSystem:
    """Characteristic-polynomial residual in ``sigma`` at a frozen state ``location``."""
    loc = tuple(float(v) for v in location)
    if loc[0] == -1.0:
        raise DomainError("location x = -1 is a pole of the functional response")

    def func(sigma, params):
        return rm_charpoly_residual(sigma, loc, params)

    def kernel(s1c, s2c, params, stds, threads, backend):
        with np.errstate(all="ignore"):
            t, d = trace_det(loc, params)
        finite = np.isfinite(t) & np.isfinite(d)
        if not finite.all():
            n = int(np.flatnonzero(~finite)[0])
            raise EvaluationError(f"non-finite residual at cell (0, 0), sample row {n}",
                                  cell=(0, 0), sample=n)
        return _kernels.get(backend).eig_density(
            s1c, s2c, np.ascontiguousarray(t), np.ascontiguousarray(d), stds[0], stds[1], threads)

    return ResidualSystem(func, 2, 3, 2, kernel=kernel, context=loc, name="rm-eig")
