"""Pure numpy implementations of the compiled kernels.

Same signatures and return conventions as ``_ckernels``; ``nthreads`` is
accepted and ignored.  Results agree with the compiled versions to rounding
(numpy's vectorized ``exp`` may differ from libm by an ulp).
"""
import numpy as np

BACKEND = "python"

# drop terms with exp(-q/2) < 1e-50, as the compiled kernels do
EXP_CUT = TAIL_CUT = 230.0

ST_OK = 0
ST_MAXITER = 1
ST_SINGULAR = 2
ST_BLOWUP = 3


def _rm_rhs(x, y, k, m, c):
    pred = m * x * y / (1.0 + x)
    return x * (1.0 - x / k) - pred, -c * y + pred


def steady_density(xc, yc, params, sd1, sd2, nthreads=1):
    xc = np.asarray(xc, dtype=np.float64)
    yc = np.asarray(yc, dtype=np.float64)
    inv_k = (1.0 / params[:, 0])[:, None]
    m = params[:, 1][:, None]
    c = params[:, 2][:, None]
    ns = params.shape[0]
    nx = xc.shape[0]
    out = np.zeros((yc.shape[0], nx))
    bad = np.full(yc.shape[0], -1, dtype=np.int64)
    inv1, inv2 = 1.0 / sd1, 1.0 / sd2
    x = xc[None, :]
    with np.errstate(all="ignore"):
        for j, y in enumerate(yc):
            pred = m * (x * y / (1.0 + x))
            m1 = (x * (1.0 - x * inv_k) - pred) * inv1
            m2 = (-c * y + pred) * inv2
            q = m1 * m1 + m2 * m2
            finite = np.isfinite(q)
            if not finite.all():
                n, i = np.argwhere(~finite)[0]
                bad[j] = i + nx * n
                continue
            terms = np.where(q <= EXP_CUT, np.exp(-0.5 * q), 0.0)
            out[j] = terms.sum(axis=0) / ns
    return out, bad


def eig_density(s1c, s2c, trace, det, sd1, sd2, nthreads=1):
    s1 = np.asarray(s1c, dtype=np.float64)[None, :]
    t = np.asarray(trace, dtype=np.float64)[:, None]
    d = np.asarray(det, dtype=np.float64)[:, None]
    ns = t.shape[0]
    out = np.zeros((len(s2c), s1.shape[1]))
    inv1, inv2 = 1.0 / sd1, 1.0 / sd2
    with np.errstate(all="ignore"):
        for j, s2 in enumerate(s2c):
            m2 = (2.0 * s1 * s2 - t * s2) * inv2
            m1 = (s1 * s1 - s2 * s2 - t * s1 + d) * inv1
            q = m2 * m2 + m1 * m1
            out[j] = np.where(q <= EXP_CUT, np.exp(-0.5 * q), 0.0).sum(axis=0) / ns
    return out


eig_density_brute = eig_density


def _newton_one(k, m, c, x, y, tol, max_iters, damping_min):
    f1, f2 = _rm_rhs(x, y, k, m, c)
    it = 0
    while True:
        if abs(f1) <= tol and abs(f2) <= tol:
            return ST_OK, x, y, it
        if it >= max_iters or not (np.isfinite(f1) and np.isfinite(f2)):
            return ST_MAXITER, x, y, it
        opx = 1.0 + x
        j11 = 1.0 - 2.0 * x / k - m * y / (opx * opx)
        j12 = -m * x / opx
        j21 = m * y / (opx * opx)
        j22 = -c + m * x / opx
        dt = j11 * j22 - j12 * j21
        if abs(dt) < 1e-14:
            return ST_SINGULAR, x, y, it
        dx = -(j22 * f1 - j12 * f2) / dt
        dy = -(-j21 * f1 + j11 * f2) / dt
        fn = f1 * f1 + f2 * f2
        lam = 1.0
        while True:
            xn = x + lam * dx
            yn = y + lam * dy
            g1, g2 = _rm_rhs(xn, yn, k, m, c)
            gn = g1 * g1 + g2 * g2
            if gn < fn or lam <= damping_min:
                break
            lam = max(0.5 * lam, damping_min)
        x, y, f1, f2 = xn, yn, g1, g2
        it += 1


def newton_batch(params, x0, y0, tol, max_iters, damping_min, nthreads=1):
    ns = params.shape[0]
    roots = np.empty((ns, 2))
    status = np.empty(ns, dtype=np.int8)
    iters = np.empty(ns, dtype=np.int32)
    with np.errstate(all="ignore"):
        for n, (k, m, c) in enumerate(params.tolist()):
            st, x, y, it = _newton_one(k, m, c, float(x0), float(y0), tol, max_iters, damping_min)
            status[n] = st
            roots[n] = x, y
            iters[n] = it
    return roots, status, iters


def rk4_batch(params, x0, y0, dt, nsteps, steady_tol, nthreads=1):
    ns = params.shape[0]
    k, m, c = params[:, 0].copy(), params[:, 1].copy(), params[:, 2].copy()
    final = np.empty((ns, 2))
    status = np.full(ns, ST_MAXITER, dtype=np.int8)
    t_end = np.full(ns, nsteps * dt)

    x = np.full(ns, float(x0))
    y = np.full(ns, float(y0))
    active = np.arange(ns)
    with np.errstate(all="ignore"):
        f1, f2 = _rm_rhs(x, y, k, m, c)
        done = (np.abs(f1) <= steady_tol) & (np.abs(f2) <= steady_tol)
        status[done] = ST_OK
        t_end[done] = 0.0
        final[:, 0], final[:, 1] = x, y
        keep = ~done
        active, x, y, f1, f2 = active[keep], x[keep], y[keep], f1[keep], f2[keep]
        kk, mm, cc = k[active], m[active], c[active]
        for step in range(1, nsteps + 1):
            if active.size == 0:
                break
            b1, b2 = _rm_rhs(x + 0.5 * dt * f1, y + 0.5 * dt * f2, kk, mm, cc)
            c1, c2 = _rm_rhs(x + 0.5 * dt * b1, y + 0.5 * dt * b2, kk, mm, cc)
            d1, d2 = _rm_rhs(x + dt * c1, y + dt * c2, kk, mm, cc)
            x = x + dt / 6.0 * (f1 + 2.0 * b1 + 2.0 * c1 + d1)
            y = y + dt / 6.0 * (f2 + 2.0 * b2 + 2.0 * c2 + d2)
            blown = ~(np.isfinite(x) & np.isfinite(y))
            f1, f2 = _rm_rhs(x, y, kk, mm, cc)
            conv = ~blown & (np.abs(f1) <= steady_tol) & (np.abs(f2) <= steady_tol)
            stop = blown | conv
            if stop.any():
                idx = active[stop]
                status[active[blown]] = ST_BLOWUP
                status[active[conv]] = ST_OK
                t_end[idx] = step * dt
                final[idx, 0] = x[stop]
                final[idx, 1] = y[stop]
                keep = ~stop
                active, x, y, f1, f2 = active[keep], x[keep], y[keep], f1[keep], f2[keep]
                kk, mm, cc = kk[keep], mm[keep], cc[keep]
        final[active, 0] = x
        final[active, 1] = y
    return final, status, t_end
