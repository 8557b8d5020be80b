"""Pure-Python/numpy reference implementations of the hot kernels.

The compiled module ``_kernels`` mirrors these functions operation by
operation so both backends produce bit-identical floats (no fused
multiply-add, same evaluation order).

Parameter vectors
-----------------
rk4 ``p``: [omega, tau_x, tau_y, tau_z, foot_x, foot_y, a, b, mass, gravity]
dp ``cfg``: [x_foot, xd_apex, omega_ref, mass, gravity, beta, gamma1,
             gamma2, alpha, eta, xd_pred]
"""
import math

import numpy as np

BACKEND = "python"


def rk4_path(s0, p, dt, n, euler=0):
    """Fixed-step rollout of the constant-input pendulum, ``n`` steps.

    Returns an ``(n + 1, 6)`` array whose first row is ``s0``.
    """
    omega, tx, ty, tz, fx, fy, a, b, m, g = (float(v) for v in p)
    k = omega * omega
    mg = m * g
    cx = k * (ty + b * tz) / mg
    cy = k * (tx + a * tz) / mg
    dt = float(dt)
    h2 = 0.5 * dt
    dt6 = dt / 6.0
    out = np.empty((n + 1, 6))
    x, y, z, xd, yd, zd = (float(v) for v in s0)
    out[0] = (x, y, z, xd, yd, zd)

    for i in range(n):
        ax1 = k * (x - fx) - cx
        ay1 = k * (y - fy) - cy
        if euler:
            az1 = a * ax1 + b * ay1
            x, y, z, xd, yd, zd = (
                x + dt * xd, y + dt * yd, z + dt * zd,
                xd + dt * ax1, yd + dt * ay1, zd + dt * az1,
            )
            out[i + 1] = (x, y, z, xd, yd, zd)
            continue
        az1 = a * ax1 + b * ay1
        # stage 2
        x2 = x + h2 * xd
        y2 = y + h2 * yd
        xd2 = xd + h2 * ax1
        yd2 = yd + h2 * ay1
        zd2 = zd + h2 * az1
        ax2 = k * (x2 - fx) - cx
        ay2 = k * (y2 - fy) - cy
        az2 = a * ax2 + b * ay2
        # stage 3
        x3 = x + h2 * xd2
        y3 = y + h2 * yd2
        xd3 = xd + h2 * ax2
        yd3 = yd + h2 * ay2
        zd3 = zd + h2 * az2
        ax3 = k * (x3 - fx) - cx
        ay3 = k * (y3 - fy) - cy
        az3 = a * ax3 + b * ay3
        # stage 4
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
        out[i + 1] = (x, y, z, xd, yd, zd)
    return out


def stage_step(v, xn, dx, w, tau, cfg):
    """One DP stage from speed ``v`` at ``xn`` with held controls.

    Returns ``(cost, v_end)`` or ``None`` when the pendulum stalls.
    The velocity update is exact for constant (w, tau) because the
    acceleration is affine in position and is evaluated at the midpoint.
    """
    x_foot, xd_apex, w_ref, m, g, beta, g1, g2 = cfg[:8]
    mg = m * g
    xa2 = xd_apex * xd_apex
    kr = w_ref * w_ref
    c1 = xa2 / kr
    u = (xn + 0.5 * dx) - x_foot
    acc = (w * w) * (u - tau / mg)
    v2e = v * v + 2.0 * dx * acc
    if not v2e > 0.0:
        return None
    v2m = 0.5 * (v * v + v2e)
    s = c1 * (v2m - xa2 - kr * u * u)
    dw = w - w_ref
    cost = (beta * s * s + g1 * tau * tau + g2 * dw * dw) * dx
    return cost, math.sqrt(v2e)


def snap_index(v, v0, vres):
    """Nearest grid index; exact half-way values go to the lower index."""
    return int(math.ceil((v - v0) / vres - 0.5))


def dp_sweep(stage_x, states, v0, vres, omegas, taus, cfg):
    """Backward value iteration over position stages.

    Returns ``(values, policy)`` with shapes ``(N, S)``; ``policy`` holds the
    flat control index ``iw * len(taus) + it`` or -1 for infeasible cells.
    """
    stage_x = np.asarray(stage_x, dtype=float)
    states = np.asarray(states, dtype=float)
    omegas = np.asarray(omegas, dtype=float)
    taus = np.asarray(taus, dtype=float)
    x_foot, xd_apex, w_ref, m, g, beta, g1, g2, alpha, eta, xd_pred = (
        float(c) for c in cfg
    )
    N = stage_x.shape[0]
    S = states.shape[0]
    mg = m * g
    xa2 = xd_apex * xd_apex
    kr = w_ref * w_ref
    c1 = xa2 / kr

    values = np.empty((N, S))
    policy = np.full((N, S), -1, dtype=np.int64)
    dv = states - xd_pred
    values[N - 1] = alpha * dv * dv

    # controls flattened omega-major
    W = np.repeat(omegas, taus.shape[0])[None, :]
    T = np.tile(taus, omegas.shape[0])[None, :]
    V = states[:, None]
    for n in range(N - 2, -1, -1):
        xn = float(stage_x[n])
        dx = float(stage_x[n + 1]) - xn
        u = (xn + 0.5 * dx) - x_foot
        acc = (W * W) * (u - T / mg)
        v2e = V * V + 2.0 * dx * acc
        ok = v2e > 0.0
        v2e_safe = np.where(ok, v2e, 1.0)
        ve = np.sqrt(v2e_safe)
        v2m = 0.5 * (V * V + v2e)
        s = c1 * (v2m - xa2 - kr * u * u)
        dw = W - w_ref
        cost = (beta * s * s + g1 * T * T + g2 * dw * dw) * dx
        j = np.ceil((ve - v0) / vres - 0.5)
        ok &= (j >= 0) & (j < S)
        jj = np.where(ok, j, 0).astype(np.int64)
        total = np.where(ok, cost + eta * values[n + 1][jj], np.inf)
        best = np.argmin(total, axis=1)
        vbest = total[np.arange(S), best]
        feasible = np.isfinite(vbest)
        values[n] = vbest
        policy[n] = np.where(feasible, best, -1)
    return values, policy


def region_rollout(stage_x, states, v0, vres, pol_w, pol_t, cfg, eps):
    """Closed-loop stage rollouts from every grid cell.

    A cell is a member when |sigma| <= eps is reached at or before the last
    stage.  Returns ``(member, reach)`` where ``reach`` is the stage index at
    which the bundle was entered (-1 when never).
    """
    stage_x = np.asarray(stage_x, dtype=float)
    states = np.asarray(states, dtype=float)
    x_foot, xd_apex, w_ref, m, g = (float(c) for c in cfg[:5])
    N = stage_x.shape[0]
    S = states.shape[0]
    mg = m * g
    xa2 = xd_apex * xd_apex
    kr = w_ref * w_ref
    c1 = xa2 / kr

    member = np.zeros((N, S), dtype=np.uint8)
    reach = np.full((N, S), -1, dtype=np.int64)
    # live rollouts: start stage, start state, current speed
    start_n = np.empty(0, dtype=np.int64)
    start_i = np.empty(0, dtype=np.int64)
    v = np.empty(0)
    idx = np.arange(S, dtype=np.int64)
    for n in range(N):
        start_n = np.concatenate([start_n, np.full(S, n, dtype=np.int64)])
        start_i = np.concatenate([start_i, idx])
        v = np.concatenate([v, states])
        xn = float(stage_x[n])
        un = xn - x_foot
        s = c1 * (v * v - xa2 - kr * un * un)
        done = np.abs(s) <= eps
        member[start_n[done], start_i[done]] = 1
        reach[start_n[done], start_i[done]] = n
        keep = ~done
        if n == N - 1:
            break
        start_n, start_i, v = start_n[keep], start_i[keep], v[keep]
        j = np.ceil((v - v0) / vres - 0.5)
        ok = (j >= 0) & (j < S)
        jj = np.where(ok, j, 0).astype(np.int64)
        w = pol_w[n][jj]
        tau = pol_t[n][jj]
        ok &= np.isfinite(w) & np.isfinite(tau)
        w = np.where(ok, w, w_ref)
        tau = np.where(ok, tau, 0.0)
        dx = float(stage_x[n + 1]) - xn
        u = (xn + 0.5 * dx) - x_foot
        acc = (w * w) * (u - tau / mg)
        v2e = v * v + 2.0 * dx * acc
        ok &= v2e > 0.0
        start_n, start_i = start_n[ok], start_i[ok]
        v = np.sqrt(v2e[ok])
    return member, reach
