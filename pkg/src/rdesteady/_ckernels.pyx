# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops.

Every kernel writes each output slot from exactly one loop iteration and sums
samples in ascending order, so results do not depend on ``nthreads``.
Terms whose squared standardized residual ``q`` exceeds ``TAIL_CUT`` are
dropped (``exp(-q/2) < 1e-50``); the fallback applies the same cut.
"""
import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport exp, sqrt, floor, ceil, fabs, isfinite, INFINITY

cnp.import_array()

cdef double EXP_CUT = 230.0
TAIL_CUT = EXP_CUT

# status codes shared with the fallback module
cdef enum:
    ST_OK = 0
    ST_MAXITER = 1
    ST_SINGULAR = 2
    ST_BLOWUP = 3

BACKEND = "compiled"


cdef inline void _rm_rhs(double x, double y, double k, double m, double c,
                         double* f1, double* f2) noexcept nogil:
    cdef double pred = m * x * y / (1.0 + x)
    f1[0] = x * (1.0 - x / k) - pred
    f2[0] = -c * y + pred


cdef Py_ssize_t _steady_row(const double[::1] xc, double y, const double[::1] inv_k,
                            const double[::1] mm, const double[::1] cc,
                            double inv1, double inv2, double[::1] out) noexcept nogil:
    cdef Py_ssize_t nx = xc.shape[0]
    cdef Py_ssize_t ns = inv_k.shape[0]
    cdef Py_ssize_t i, n
    cdef double x, w, pred, m1, m2, q, acc
    for i in range(nx):
        x = xc[i]
        w = x * y / (1.0 + x)
        acc = 0.0
        for n in range(ns):
            pred = mm[n] * w
            m1 = (x * (1.0 - x * inv_k[n]) - pred) * inv1
            q = m1 * m1
            if q > EXP_CUT:
                if not isfinite(q):
                    return i + nx * n
                continue
            m2 = (-cc[n] * y + pred) * inv2
            q = q + m2 * m2
            if q <= EXP_CUT:
                acc = acc + exp(-0.5 * q)
            elif not isfinite(q):
                return i + nx * n
        out[i] = acc / ns
    return -1


def steady_density(const double[::1] xc, const double[::1] yc,
                   const double[:, ::1] params, double sd1, double sd2,
                   int nthreads=1):
    """Mean over samples of exp(-|z|^2/2) for the steady-state residuals.

    Returns ``(values[ny, nx], bad)`` where ``bad[j]`` is -1 or the flat index
    ``i + nx * n`` of the first non-finite residual found on row ``j``.
    """
    cdef Py_ssize_t ny = yc.shape[0], nx = xc.shape[0], j
    out_arr = np.zeros((ny, nx), dtype=np.float64)
    bad_arr = np.full(ny, -1, dtype=np.int64)
    cdef double[:, ::1] out = out_arr
    cdef long long[::1] bad = bad_arr
    cdef double inv1 = 1.0 / sd1, inv2 = 1.0 / sd2
    cdef int nt = max(nthreads, 1)
    cdef double[::1] inv_k = 1.0 / np.ascontiguousarray(params[:, 0])
    cdef double[::1] mm = np.ascontiguousarray(params[:, 1])
    cdef double[::1] cc = np.ascontiguousarray(params[:, 2])
    for j in prange(ny, nogil=True, num_threads=nt, schedule="static"):
        bad[j] = _steady_row(xc, yc[j], inv_k, mm, cc, inv1, inv2, out[j])
    return out_arr, bad_arr


cdef inline Py_ssize_t _index(double v, Py_ssize_t nx) noexcept nogil:
    if v < -2.0:
        return -2
    if v > nx + 2.0:
        return nx + 2
    return <Py_ssize_t>v


cdef void _eig_row(const double[::1] s1c, double s2, const double[::1] trace,
                   const double[::1] det, double inv1, double inv2,
                   double rho2, double[::1] out) noexcept nogil:
    cdef Py_ssize_t nx = s1c.shape[0]
    cdef Py_ssize_t ns = trace.shape[0]
    cdef double s1_0 = s1c[0]
    cdef double h = (s1c[nx - 1] - s1c[0]) / (nx - 1)
    cdef Py_ssize_t i, n, i0, i1, i2, i3
    cdef double t, d, umax, umin, half, s1, m1, m2, q
    cdef double s2sq = s2 * s2, g, b, disc, vlo, vhi
    for n in range(ns):
        t = trace[n]
        d = det[n]
        half = 0.5 * t
        # with u = s1 - t/2 and g = t^2/4 - d:  |p(s)|^2 = (u^2 - g - s2^2)^2 + 4 s2^2 u^2,
        # so |p|^2 <= rho^2 is an interval in v = u^2
        g = half * half - d
        b = g - s2sq
        disc = rho2 - 4.0 * s2sq * g
        if disc < 0.0:
            continue
        disc = sqrt(disc)
        vhi = b + disc
        if vhi < 0.0:
            continue
        vlo = b - disc
        umax = sqrt(vhi)
        umin = sqrt(vlo) if vlo > 0.0 else 0.0
        i0 = _index(floor((half - umax - s1_0) / h) - 1.0, nx)
        i1 = _index(ceil((half - umin - s1_0) / h) + 1.0, nx)
        i2 = _index(floor((half + umin - s1_0) / h) - 1.0, nx)
        i3 = _index(ceil((half + umax - s1_0) / h) + 1.0, nx)
        if i2 <= i1:
            i1 = i3
            i2 = i3 + 1
        if i0 < 0:
            i0 = 0
        if i3 > nx - 1:
            i3 = nx - 1
        if i1 > nx - 1:
            i1 = nx - 1
        if i2 < 0:
            i2 = 0
        for i in range(i0, i1 + 1):
            s1 = s1c[i]
            m2 = (2.0 * s1 * s2 - t * s2) * inv2
            q = m2 * m2
            if q > EXP_CUT:
                continue
            m1 = (s1 * s1 - s2 * s2 - t * s1 + d) * inv1
            q = q + m1 * m1
            if q <= EXP_CUT:
                out[i] += exp(-0.5 * q)
        for i in range(i2, i3 + 1):
            s1 = s1c[i]
            m2 = (2.0 * s1 * s2 - t * s2) * inv2
            q = m2 * m2
            if q > EXP_CUT:
                continue
            m1 = (s1 * s1 - s2 * s2 - t * s1 + d) * inv1
            q = q + m1 * m1
            if q <= EXP_CUT:
                out[i] += exp(-0.5 * q)
    for i in range(nx):
        out[i] = out[i] / ns


def eig_density(const double[::1] s1c, const double[::1] s2c,
                const double[::1] trace, const double[::1] det,
                double sd1, double sd2, int nthreads=1):
    """Mean over samples of exp(-|z|^2/2) for the characteristic-polynomial residuals.

    ``trace`` and ``det`` hold the per-sample Jacobian trace and determinant
    at the probed location.  Only cells that can receive a non-zero term are
    visited; the result equals ``eig_density_brute`` bit for bit.
    """
    cdef Py_ssize_t ny = s2c.shape[0], nx = s1c.shape[0], j
    out_arr = np.zeros((ny, nx), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    # q <= EXP_CUT implies |p|^2 <= EXP_CUT * max(sd)^2; margin for rounding
    cdef double rho2 = EXP_CUT * max(sd1, sd2) ** 2 * (1.0 + 1e-6)
    cdef double inv1 = 1.0 / sd1, inv2 = 1.0 / sd2
    cdef int nt = max(nthreads, 1)
    for j in prange(ny, nogil=True, num_threads=nt, schedule="static"):
        _eig_row(s1c, s2c[j], trace, det, inv1, inv2, rho2, out[j])
    return out_arr


def eig_density_brute(const double[::1] s1c, const double[::1] s2c,
                      const double[::1] trace, const double[::1] det,
                      double sd1, double sd2, int nthreads=1):
    """Unpruned reference loop for ``eig_density`` (tests and benchmarks)."""
    cdef Py_ssize_t ny = s2c.shape[0], nx = s1c.shape[0], ns = trace.shape[0]
    cdef Py_ssize_t i, j, n
    out_arr = np.zeros((ny, nx), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double inv1 = 1.0 / sd1, inv2 = 1.0 / sd2
    cdef double s1, s2, t, d, m1, m2, q, acc
    cdef int nt = max(nthreads, 1)
    with nogil:
        for j in prange(ny, num_threads=nt, schedule="static"):
            s2 = s2c[j]
            for i in range(nx):
                s1 = s1c[i]
                acc = 0.0
                for n in range(ns):
                    t = trace[n]
                    d = det[n]
                    m2 = (2.0 * s1 * s2 - t * s2) * inv2
                    m1 = (s1 * s1 - s2 * s2 - t * s1 + d) * inv1
                    q = m2 * m2 + m1 * m1
                    if q <= EXP_CUT:
                        acc = acc + exp(-0.5 * q)
                out[j, i] = acc / ns
    return out_arr


cdef int _newton_one(double k, double m, double c, double x0, double y0,
                     double tol, int max_iters, double damping_min,
                     double* root, int* iters) noexcept nogil:
    cdef double x = x0, y = y0, f1, f2, g1, g2, fn, gn, opx
    cdef double j11, j12, j21, j22, dt, dx, dy, lam, xn, yn
    cdef int it = 0
    _rm_rhs(x, y, k, m, c, &f1, &f2)
    while True:
        if fabs(f1) <= tol and fabs(f2) <= tol:
            root[0] = x
            root[1] = y
            iters[0] = it
            return ST_OK
        if it >= max_iters or not (isfinite(f1) and isfinite(f2)):
            break
        opx = 1.0 + x
        j11 = 1.0 - 2.0 * x / k - m * y / (opx * opx)
        j12 = -m * x / opx
        j21 = m * y / (opx * opx)
        j22 = -c + m * x / opx
        dt = j11 * j22 - j12 * j21
        if fabs(dt) < 1e-14:
            root[0] = x
            root[1] = y
            iters[0] = it
            return ST_SINGULAR
        dx = -(j22 * f1 - j12 * f2) / dt
        dy = -(-j21 * f1 + j11 * f2) / dt
        fn = f1 * f1 + f2 * f2
        lam = 1.0
        while True:
            xn = x + lam * dx
            yn = y + lam * dy
            _rm_rhs(xn, yn, k, m, c, &g1, &g2)
            gn = g1 * g1 + g2 * g2
            if gn < fn or lam <= damping_min:
                break
            lam = 0.5 * lam
            if lam < damping_min:
                lam = damping_min
        x = xn
        y = yn
        f1 = g1
        f2 = g2
        it += 1
    root[0] = x
    root[1] = y
    iters[0] = it
    return ST_MAXITER


def newton_batch(const double[:, ::1] params, double x0, double y0, double tol,
                 int max_iters, double damping_min, int nthreads=1):
    """Damped Newton on the steady-state residual, one solve per parameter row."""
    cdef Py_ssize_t ns = params.shape[0], n
    roots_arr = np.empty((ns, 2), dtype=np.float64)
    status_arr = np.empty(ns, dtype=np.int8)
    iters_arr = np.empty(ns, dtype=np.int32)
    cdef double[:, ::1] roots = roots_arr
    cdef signed char[::1] status = status_arr
    cdef int[::1] iters = iters_arr
    cdef int nt = max(nthreads, 1)
    for n in prange(ns, nogil=True, num_threads=nt, schedule="static"):
        status[n] = <signed char>_newton_one(
            params[n, 0], params[n, 1], params[n, 2], x0, y0, tol, max_iters,
            damping_min, &roots[n, 0], &iters[n])
    return roots_arr, status_arr, iters_arr


cdef int _rk4_one(double k, double m, double c, double x0, double y0, double dt,
                  long nsteps, double steady_tol, double* state, double* t_end) noexcept nogil:
    cdef double x = x0, y = y0, f1, f2
    cdef double a1, a2, b1, b2, c1, c2, d1, d2
    cdef long step
    _rm_rhs(x, y, k, m, c, &f1, &f2)
    if fabs(f1) <= steady_tol and fabs(f2) <= steady_tol:
        state[0] = x
        state[1] = y
        t_end[0] = 0.0
        return ST_OK
    for step in range(1, nsteps + 1):
        a1 = f1
        a2 = f2
        _rm_rhs(x + 0.5 * dt * a1, y + 0.5 * dt * a2, k, m, c, &b1, &b2)
        _rm_rhs(x + 0.5 * dt * b1, y + 0.5 * dt * b2, k, m, c, &c1, &c2)
        _rm_rhs(x + dt * c1, y + dt * c2, k, m, c, &d1, &d2)
        x = x + dt / 6.0 * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
        y = y + dt / 6.0 * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
        if not (isfinite(x) and isfinite(y)):
            state[0] = x
            state[1] = y
            t_end[0] = step * dt
            return ST_BLOWUP
        _rm_rhs(x, y, k, m, c, &f1, &f2)
        if fabs(f1) <= steady_tol and fabs(f2) <= steady_tol:
            state[0] = x
            state[1] = y
            t_end[0] = step * dt
            return ST_OK
    state[0] = x
    state[1] = y
    t_end[0] = nsteps * dt
    return ST_MAXITER


def rk4_batch(const double[:, ::1] params, double x0, double y0, double dt,
              long nsteps, double steady_tol, int nthreads=1):
    """Fixed-step RK4 of the predator-prey ODE until steady, one run per row."""
    cdef Py_ssize_t ns = params.shape[0], n
    final_arr = np.empty((ns, 2), dtype=np.float64)
    status_arr = np.empty(ns, dtype=np.int8)
    t_arr = np.empty(ns, dtype=np.float64)
    cdef double[:, ::1] final = final_arr
    cdef signed char[::1] status = status_arr
    cdef double[::1] t_end = t_arr
    cdef int nt = max(nthreads, 1)
    for n in prange(ns, nogil=True, num_threads=nt, schedule="static"):
        status[n] = <signed char>_rk4_one(
            params[n, 0], params[n, 1], params[n, 2], x0, y0, dt, nsteps,
            steady_tol, &final[n, 0], &t_end[n])
    return final_arr, status_arr, t_arr
