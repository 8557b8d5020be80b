# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_kernels_py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, ceil, fabs, isfinite, INFINITY

cnp.import_array()

BACKEND = "cython"


def rk4_path(s0, p, double dt, Py_ssize_t n, int euler=0):
    cdef double omega = p[0], tx = p[1], ty = p[2], tz = p[3]
    cdef double fx = p[4], fy = p[5], a = p[6], b = p[7], m = p[8], g = p[9]
    cdef double k = omega * omega
    cdef double mg = m * g
    cdef double cx = k * (ty + b * tz) / mg
    cdef double cy = k * (tx + a * tz) / mg
    cdef double h2 = 0.5 * dt
    cdef double dt6 = dt / 6.0
    out_arr = np.empty((n + 1, 6))
    cdef double[:, ::1] out = out_arr
    cdef double x = s0[0], y = s0[1], z = s0[2], xd = s0[3], yd = s0[4], zd = s0[5]
    cdef double ax1, ay1, az1, ax2, ay2, az2, ax3, ay3, az3, ax4, ay4, az4
    cdef double x2, y2, xd2, yd2, zd2, x3, y3, xd3, yd3, zd3, x4, y4, xd4, yd4, zd4
    cdef double nx, ny, nz, nxd, nyd, nzd
    cdef Py_ssize_t i
    out[0, 0] = x; out[0, 1] = y; out[0, 2] = z
    out[0, 3] = xd; out[0, 4] = yd; out[0, 5] = zd
    for i in range(n):
        ax1 = k * (x - fx) - cx
        ay1 = k * (y - fy) - cy
        az1 = a * ax1 + b * ay1
        if euler:
            nx = x + dt * xd; ny = y + dt * yd; nz = z + dt * zd
            nxd = xd + dt * ax1; nyd = yd + dt * ay1; nzd = zd + dt * az1
            x = nx; y = ny; z = nz; xd = nxd; yd = nyd; zd = nzd
        else:
            x2 = x + h2 * xd
            y2 = y + h2 * yd
            xd2 = xd + h2 * ax1
            yd2 = yd + h2 * ay1
            zd2 = zd + h2 * az1
            ax2 = k * (x2 - fx) - cx
            ay2 = k * (y2 - fy) - cy
            az2 = a * ax2 + b * ay2
            x3 = x + h2 * xd2
            y3 = y + h2 * yd2
            xd3 = xd + h2 * ax2
            yd3 = yd + h2 * ay2
            zd3 = zd + h2 * az2
            ax3 = k * (x3 - fx) - cx
            ay3 = k * (y3 - fy) - cy
            az3 = a * ax3 + b * ay3
            x4 = x + dt * xd3
            y4 = y + dt * yd3
            xd4 = xd + dt * ax3
            yd4 = yd + dt * ay3
            zd4 = zd + dt * az3
            ax4 = k * (x4 - fx) - cx
            ay4 = k * (y4 - fy) - cy
            az4 = a * ax4 + b * ay4
            x = x + dt6 * (xd + 2.0 * xd2 + 2.0 * xd3 + xd4)
            y = y + dt6 * (yd + 2.0 * yd2 + 2.0 * yd3 + yd4)
            z = z + dt6 * (zd + 2.0 * zd2 + 2.0 * zd3 + zd4)
            xd = xd + dt6 * (ax1 + 2.0 * ax2 + 2.0 * ax3 + ax4)
            yd = yd + dt6 * (ay1 + 2.0 * ay2 + 2.0 * ay3 + ay4)
            zd = zd + dt6 * (az1 + 2.0 * az2 + 2.0 * az3 + az4)
        out[i + 1, 0] = x; out[i + 1, 1] = y; out[i + 1, 2] = z
        out[i + 1, 3] = xd; out[i + 1, 4] = yd; out[i + 1, 5] = zd
    return out_arr


def dp_sweep(stage_x, states, double v0, double vres, omegas, taus, cfg):
    cdef double[::1] sx = np.ascontiguousarray(stage_x, dtype=np.float64)
    cdef double[::1] st = np.ascontiguousarray(states, dtype=np.float64)
    cdef double[::1] om = np.ascontiguousarray(omegas, dtype=np.float64)
    cdef double[::1] ta = np.ascontiguousarray(taus, dtype=np.float64)
    cdef double x_foot = cfg[0], xd_apex = cfg[1], w_ref = cfg[2]
    cdef double m = cfg[3], g = cfg[4], beta = cfg[5], g1 = cfg[6]
    cdef double g2 = cfg[7], alpha = cfg[8], eta = cfg[9], xd_pred = cfg[10]
    cdef Py_ssize_t N = sx.shape[0], S = st.shape[0]
    cdef Py_ssize_t K1 = om.shape[0], K2 = ta.shape[0]
    cdef double mg = m * g
    cdef double xa2 = xd_apex * xd_apex
    cdef double kr = w_ref * w_ref
    cdef double c1 = xa2 / kr
    values_arr = np.empty((N, S))
    policy_arr = np.full((N, S), -1, dtype=np.int64)
    cdef double[:, ::1] val = values_arr
    cdef long long[:, ::1] pol = policy_arr
    cdef Py_ssize_t n, i, iw, it, c, best
    cdef long long j
    cdef double xn, dx, u, w, tau, acc, v, v2e, v2m, ve, s, dw, cost, total, vbest, dv
    for i in range(S):
        dv = st[i] - xd_pred
        val[N - 1, i] = alpha * dv * dv
    for n in range(N - 2, -1, -1):
        xn = sx[n]
        dx = sx[n + 1] - xn
        u = (xn + 0.5 * dx) - x_foot
        for i in range(S):
            v = st[i]
            vbest = INFINITY
            best = -1
            for iw in range(K1):
                w = om[iw]
                dw = w - w_ref
                for it in range(K2):
                    tau = ta[it]
                    acc = (w * w) * (u - tau / mg)
                    v2e = v * v + 2.0 * dx * acc
                    if not v2e > 0.0:
                        continue
                    ve = sqrt(v2e)
                    j = <long long>ceil((ve - v0) / vres - 0.5)
                    if j < 0 or j >= S:
                        continue
                    v2m = 0.5 * (v * v + v2e)
                    s = c1 * (v2m - xa2 - kr * u * u)
                    cost = (beta * s * s + g1 * tau * tau + g2 * dw * dw) * dx
                    total = cost + eta * val[n + 1, j]
                    if total < vbest:
                        vbest = total
                        best = iw * K2 + it
            val[n, i] = vbest
            if isfinite(vbest):
                pol[n, i] = best
            else:
                pol[n, i] = -1
    return values_arr, policy_arr


def region_rollout(stage_x, states, double v0, double vres, pol_w, pol_t, cfg, double eps):
    cdef double[::1] sx = np.ascontiguousarray(stage_x, dtype=np.float64)
    cdef double[::1] st = np.ascontiguousarray(states, dtype=np.float64)
    cdef double[:, ::1] pw = np.ascontiguousarray(pol_w, dtype=np.float64)
    cdef double[:, ::1] pt = np.ascontiguousarray(pol_t, dtype=np.float64)
    cdef double x_foot = cfg[0], xd_apex = cfg[1], w_ref = cfg[2], m = cfg[3], g = cfg[4]
    cdef Py_ssize_t N = sx.shape[0], S = st.shape[0]
    cdef double mg = m * g
    cdef double xa2 = xd_apex * xd_apex
    cdef double kr = w_ref * w_ref
    cdef double c1 = xa2 / kr
    member_arr = np.zeros((N, S), dtype=np.uint8)
    reach_arr = np.full((N, S), -1, dtype=np.int64)
    cdef unsigned char[:, ::1] mem = member_arr
    cdef long long[:, ::1] rch = reach_arr
    cdef Py_ssize_t n0, i0, n
    cdef long long j
    cdef double v, xn, un, s, w, tau, dx, u, acc, v2e
    for n0 in range(N):
        for i0 in range(S):
            v = st[i0]
            for n in range(n0, N):
                xn = sx[n]
                un = xn - x_foot
                s = c1 * (v * v - xa2 - kr * un * un)
                if fabs(s) <= eps:
                    mem[n0, i0] = 1
                    rch[n0, i0] = n
                    break
                if n == N - 1:
                    break
                j = <long long>ceil((v - v0) / vres - 0.5)
                if j < 0 or j >= S:
                    break
                w = pw[n, j]
                tau = pt[n, j]
                if not (isfinite(w) and isfinite(tau)):
                    break
                dx = sx[n + 1] - xn
                u = (xn + 0.5 * dx) - x_foot
                acc = (w * w) * (u - tau / mg)
                v2e = v * v + 2.0 * dx * acc
                if not v2e > 0.0:
                    break
                v = sqrt(v2e)
    return member_arr, reach_arr
