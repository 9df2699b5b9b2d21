# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementation of the hot kernels.

Semantics mirror py_backend exactly (same stencils, same stepping rules);
tests assert parity between the two backends.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, cos, hypot, pow, sin, sqrt

cnp.import_array()

FIELD_ZERO = 0
FIELD_CONSTANT = 1
FIELD_KILLING = 2
FIELD_SADDLE = 3
FIELD_RADIAL_POWER = 4
FIELD_RADIAL_LINEAR = 5

STOP_STEPS = 0
STOP_MAX_TIME = 1
STOP_AREA_FLOOR = 2

COMPILED = True

DEF TWO_PI = 6.283185307179586476925286766559


cdef inline void _field_eval(int kind, const double* fp, double x, double y,
                             double* vx, double* vy) noexcept nogil:
    cdef double w, s
    if kind == 0:
        vx[0] = 0.0; vy[0] = 0.0
    elif kind == 1:
        vx[0] = fp[0]; vy[0] = fp[1]
    elif kind == 2:
        vx[0] = fp[0] * y + fp[1]; vy[0] = -fp[0] * x + fp[2]
    elif kind == 3:
        vx[0] = x; vy[0] = -x * x
    elif kind == 4:
        w = pow(1.0 + x * x + y * y, 0.5 * fp[0])
        vx[0] = w * x; vy[0] = w * y
    else:
        s = fp[0] * x + fp[1] * y
        vx[0] = s * x; vy[0] = s * y


def field_values(int kind, params, xy):
    cdef const double[:, ::1] pts = np.ascontiguousarray(xy, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] fp = np.zeros(4, dtype=np.float64)
    cdef int i
    p = np.asarray(params, dtype=np.float64)
    for i in range(min(4, p.shape[0])):
        fp[i] = p[i]
    if kind < 0 or kind > 5:
        raise ValueError(f"unknown field kind {kind}")
    cdef Py_ssize_t n = pts.shape[0]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((n, 2), dtype=np.float64)
    cdef Py_ssize_t j
    for j in range(n):
        _field_eval(kind, &fp[0], pts[j, 0], pts[j, 1], &out[j, 0], &out[j, 1])
    return out


cdef void _metrics(const double[:, ::1] xy, double[:, ::1] tau, double[:, ::1] nu,
                   double[::1] k, double[::1] ds, double[::1] ell,
                   double* L, double* A, double* W) noexcept nogil:
    cdef Py_ssize_t n = xy.shape[0]
    cdef Py_ssize_t i, im, ip
    cdef double ex, ey, px, py, cross, dot, psi, chx, chy, chn
    cdef double sumL = 0.0, sumA = 0.0, sumP = 0.0
    for i in range(n):
        ip = i + 1 if i + 1 < n else 0
        ex = xy[ip, 0] - xy[i, 0]
        ey = xy[ip, 1] - xy[i, 1]
        ell[i] = hypot(ex, ey)
        sumL += ell[i]
    for i in range(n):
        im = i - 1 if i > 0 else n - 1
        ip = i + 1 if i + 1 < n else 0
        px = xy[i, 0] - xy[im, 0]
        py = xy[i, 1] - xy[im, 1]
        ex = xy[ip, 0] - xy[i, 0]
        ey = xy[ip, 1] - xy[i, 1]
        cross = px * ey - py * ex
        dot = px * ex + py * ey
        psi = atan2(cross, dot)
        ds[i] = 0.5 * (ell[im] + ell[i])
        k[i] = psi / ds[i]
        sumP += psi
        chx = xy[ip, 0] - xy[im, 0]
        chy = xy[ip, 1] - xy[im, 1]
        chn = hypot(chx, chy)
        tau[i, 0] = chx / chn
        tau[i, 1] = chy / chn
        nu[i, 0] = -tau[i, 1]
        nu[i, 1] = tau[i, 0]
        sumA += (xy[i, 0] * nu[i, 0] + xy[i, 1] * nu[i, 1]) * ds[i]
    L[0] = sumL
    A[0] = -0.5 * sumA
    W[0] = sumP / TWO_PI


def curve_metrics(xy):
    cdef const double[:, ::1] pts = np.ascontiguousarray(xy, dtype=np.float64)
    cdef Py_ssize_t n = pts.shape[0]
    cdef cnp.ndarray[double, ndim=2] tau = np.empty((n, 2), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] nu = np.empty((n, 2), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] k = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] ds = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] ell = np.empty(n, dtype=np.float64)
    cdef double L = 0.0, A = 0.0, W = 0.0
    _metrics(pts, tau, nu, k, ds, ell, &L, &A, &W)
    return tau, nu, k, ds, ell, float(L), float(A), float(W)


cdef void _resample(const double[:, ::1] xy, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t n = xy.shape[0]
    cdef Py_ssize_t m = out.shape[0]
    cdef Py_ssize_t i, ip, j
    cdef double L = 0.0, target, frac
    cdef double s0 = 0.0, s1
    # first pass: total length
    for i in range(n):
        ip = i + 1 if i + 1 < n else 0
        L += hypot(xy[ip, 0] - xy[i, 0], xy[ip, 1] - xy[i, 1])
    # two-pointer merge: segment i covers [s0, s1)
    i = 0
    ip = 1 if n > 1 else 0
    s1 = hypot(xy[ip, 0] - xy[i, 0], xy[ip, 1] - xy[i, 1])
    for j in range(m):
        target = j * (L / m)
        while s1 <= target and i < n - 1:
            i += 1
            ip = i + 1 if i + 1 < n else 0
            s0 = s1
            s1 = s0 + hypot(xy[ip, 0] - xy[i, 0], xy[ip, 1] - xy[i, 1])
        ip = i + 1 if i + 1 < n else 0
        frac = (target - s0) / (s1 - s0)
        out[j, 0] = xy[i, 0] + frac * (xy[ip, 0] - xy[i, 0])
        out[j, 1] = xy[i, 1] + frac * (xy[ip, 1] - xy[i, 1])


def resample_closed(xy, int n):
    cdef const double[:, ::1] pts = np.ascontiguousarray(xy, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] out = np.empty((n, 2), dtype=np.float64)
    _resample(pts, out)
    return out


cdef void _redistribute(const double[:, ::1] xy, double[:, ::1] out,
                        double[::1] ell, double[:, ::1] tang) noexcept nogil:
    cdef Py_ssize_t n = xy.shape[0]
    cdef Py_ssize_t m = out.shape[0]
    cdef Py_ssize_t i, im, ip, j
    cdef double L = 0.0, target, u, u2, u3, h
    cdef double s0 = 0.0, s1
    cdef double a00, a10, a01, a11
    for i in range(n):
        ip = i + 1 if i + 1 < n else 0
        ell[i] = hypot(xy[ip, 0] - xy[i, 0], xy[ip, 1] - xy[i, 1])
        L += ell[i]
    for i in range(n):
        im = i - 1 if i > 0 else n - 1
        ip = i + 1 if i + 1 < n else 0
        tang[i, 0] = (xy[ip, 0] - xy[im, 0]) / (ell[i] + ell[im])
        tang[i, 1] = (xy[ip, 1] - xy[im, 1]) / (ell[i] + ell[im])
    i = 0
    s1 = ell[0]
    for j in range(m):
        target = j * (L / m)
        while s1 <= target and i < n - 1:
            i += 1
            s0 = s1
            s1 = s0 + ell[i]
        ip = i + 1 if i + 1 < n else 0
        u = (target - s0) / (s1 - s0)
        h = ell[i]
        u2 = u * u
        u3 = u2 * u
        a00 = 2.0 * u3 - 3.0 * u2 + 1.0
        a10 = u3 - 2.0 * u2 + u
        a01 = -2.0 * u3 + 3.0 * u2
        a11 = u3 - u2
        out[j, 0] = (a00 * xy[i, 0] + a10 * h * tang[i, 0]
                     + a01 * xy[ip, 0] + a11 * h * tang[ip, 0])
        out[j, 1] = (a00 * xy[i, 1] + a10 * h * tang[i, 1]
                     + a01 * xy[ip, 1] + a11 * h * tang[ip, 1])


def redistribute_closed(xy, int n):
    cdef const double[:, ::1] pts = np.ascontiguousarray(xy, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] out = np.empty((n, 2), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] ell = np.empty(pts.shape[0], dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] tang = np.empty((pts.shape[0], 2), dtype=np.float64)
    _redistribute(pts, out, ell, tang)
    return out


def normal_speed_arrays(xy, nu, k, double sigma1, double sigma2, int kind, params):
    cdef const double[:, ::1] pts = np.ascontiguousarray(xy, dtype=np.float64)
    cdef const double[:, ::1] nn = np.ascontiguousarray(nu, dtype=np.float64)
    cdef const double[::1] kk = np.ascontiguousarray(k, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] fp = np.zeros(4, dtype=np.float64)
    p = np.asarray(params, dtype=np.float64)
    cdef int i
    for i in range(min(4, p.shape[0])):
        fp[i] = p[i]
    cdef Py_ssize_t n = pts.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t j
    cdef double vx, vy
    for j in range(n):
        _field_eval(kind, &fp[0], pts[j, 0], pts[j, 1], &vx, &vy)
        out[j] = sigma1 * kk[j] + sigma2 + vx * nn[j, 0] + vy * nn[j, 1]
    return out


def advance(xy, double t, Py_ssize_t nsteps, double sigma1, double sigma2,
            int kind, params, double dt_fixed, double c_cfl,
            Py_ssize_t resample_every, double max_time, double area_floor,
            double[:, ::1] series):
    cdef cnp.ndarray[double, ndim=2] cur = np.array(xy, dtype=np.float64, copy=True, order="C")
    cdef Py_ssize_t n = cur.shape[0]
    cdef cnp.ndarray[double, ndim=2] tau = np.empty((n, 2), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] nu = np.empty((n, 2), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] k = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] ds = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] ell = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] nxt = np.empty((n, 2), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] tng = np.empty((n, 2), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] fp = np.zeros(4, dtype=np.float64)
    p = np.asarray(params, dtype=np.float64)
    cdef int ii
    for ii in range(min(4, p.shape[0])):
        fp[ii] = p[ii]
    cdef double L, A, W, dt, kmin, kmax, Fmin, F, vx, vy, minell
    cdef Py_ssize_t steps = 0, j, i
    cdef int code = STOP_STEPS
    cdef double[:, ::1] cv = cur
    cdef double[:, ::1] nv = nxt
    for j in range(nsteps):
        _metrics(cv, tau, nu, k, ds, ell, &L, &A, &W)
        if A <= area_floor:
            code = STOP_AREA_FLOOR
            break
        if t >= max_time:
            code = STOP_MAX_TIME
            break
        minell = ell[0]
        kmin = k[0]
        kmax = k[0]
        for i in range(n):
            if ell[i] < minell:
                minell = ell[i]
            if k[i] < kmin:
                kmin = k[i]
            if k[i] > kmax:
                kmax = k[i]
        dt = dt_fixed if dt_fixed > 0.0 else c_cfl * minell * minell / sigma1
        if t + dt > max_time:
            dt = max_time - t
        Fmin = 0.0
        for i in range(n):
            _field_eval(kind, &fp[0], cv[i, 0], cv[i, 1], &vx, &vy)
            F = sigma1 * k[i] + sigma2 + vx * nu[i, 0] + vy * nu[i, 1]
            if i == 0 or F < Fmin:
                Fmin = F
            nv[i, 0] = cv[i, 0] + dt * F * nu[i, 0]
            nv[i, 1] = cv[i, 1] + dt * F * nu[i, 1]
        series[j, 0] = t
        series[j, 1] = L
        series[j, 2] = A
        series[j, 3] = W
        series[j, 4] = kmin
        series[j, 5] = kmax
        series[j, 6] = Fmin
        cur, nxt = nxt, cur
        cv = cur
        nv = nxt
        t += dt
        steps = j + 1
        if resample_every > 0 and steps % resample_every == 0:
            _redistribute(cv, nv, ell, tng)
            cur, nxt = nxt, cur
            cv = cur
            nv = nxt
    return np.array(cur, copy=True), float(t), int(steps), int(code)
