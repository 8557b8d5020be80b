"""Tangent (sigma) and cotangent (zeta) phase-space manifolds.

For the zero-torque pendulum ``xdd = w^2 (x - x_foot)`` the quantity
``xd^2 - w^2 (x - x_foot)^2`` is conserved.  ``sigma`` is a scaled version
of its deviation from a reference trajectory and ``zeta`` is the family of
curves orthogonal to the sigma level sets, used as a progression coordinate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .dynamics import PhaseState, RobotParams, Trajectory
from .errors import DomainError, EmptyInterval, GridMismatch


@dataclass(frozen=True)
class ManifoldParams:
    """Reference point (x0, xd0) of a manifold about foot ``x_foot``."""

    x0: float
    xd0: float
    x_foot: float
    omega: float

    def __post_init__(self):
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise ValueError("omega must be positive")
        if self.x0 == self.x_foot and self.xd0 == 0.0:
            raise ValueError("reference point is the saddle (x_foot, 0)")

    @classmethod
    def apex(cls, x_foot: float, xd_apex: float, omega: float) -> "ManifoldParams":
        return cls(x_foot, xd_apex, x_foot, omega)

    @classmethod
    def asymptote_anchor(cls, x_foot: float, xd_apex: float, omega: float) -> "ManifoldParams":
        """Anchor on the unstable asymptote, a valid reference for ``zeta``."""
        return cls(x_foot + xd_apex / omega, xd_apex, x_foot, omega)

    @property
    def is_apex(self) -> bool:
        return self.x0 == self.x_foot

    @property
    def energy(self) -> float:
        """Conserved ``xd^2 - w^2 (x - x_foot)^2`` of the reference orbit."""
        u0 = self.x0 - self.x_foot
        return self.xd0 * self.xd0 - self.omega * self.omega * u0 * u0

    def velocity_at(self, x):
        """Forward speed of the reference orbit at position ``x``."""
        u = np.asarray(x, dtype=float) - self.x_foot
        v2 = self.energy + self.omega * self.omega * u * u
        with np.errstate(invalid="ignore"):
            out = np.sqrt(v2)
        return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class BundleSpec:
    epsilon: float = 1e-3
    zeta_trans: float = 1.0

    def __post_init__(self):
        if not (self.epsilon > 0 and self.zeta_trans > 0):
            raise ValueError("epsilon and zeta_trans must be positive")


def sigma(x, xd, p: ManifoldParams):
    """General-reference tangent manifold value (m^4/s^2)."""
    x = np.asarray(x, dtype=float)
    xd = np.asarray(xd, dtype=float)
    w2 = p.omega * p.omega
    u0 = p.x0 - p.x_foot
    v0 = p.xd0
    out = (u0 * u0 * (2.0 * v0 * v0 - xd * xd + w2 * (x - p.x0) * (x + p.x0 - 2.0 * p.x_foot))
           - v0 * v0 * (x - p.x_foot) ** 2 + v0 * v0 * (xd * xd - v0 * v0) / w2)
    return float(out) if out.ndim == 0 else out


def sigma_apex(x, xd, x_foot: float, xd_apex: float, omega: float):
    """Apex-referenced form, the canonical deviation metric."""
    x = np.asarray(x, dtype=float)
    xd = np.asarray(xd, dtype=float)
    w2 = omega * omega
    xa2 = xd_apex * xd_apex
    u = x - x_foot
    out = (xa2 / w2) * (xd * xd - xa2 - w2 * u * u)
    return float(out) if out.ndim == 0 else out


def sigma_grad(x, xd, x_foot: float, xd_apex: float, omega: float) -> np.ndarray:
    """Gradient of ``sigma_apex`` with respect to (x, xd)."""
    xa2 = xd_apex * xd_apex
    return np.array([-2.0 * xa2 * (x - x_foot), 2.0 * xa2 * xd / (omega * omega)])


def _zeta_domain(x, xd, p: ManifoldParams):
    if p.x0 == p.x_foot:
        raise DomainError("zeta reference must not sit at x_foot")
    if p.xd0 == 0.0:
        raise DomainError("zeta reference speed must be nonzero")
    ratio = np.asarray(xd, dtype=float) / p.xd0
    if np.any(~(ratio > 0)):
        raise DomainError("zeta needs xd with the same sign as the reference, nonzero")
    return ratio


def zeta(x, xd, p: ManifoldParams, zeta0: float = 1.0):
    """Cotangent manifold value; zero on the vertical line x = x_foot."""
    ratio = _zeta_domain(x, xd, p)
    w2 = p.omega * p.omega
    out = zeta0 * ratio ** w2 * (np.asarray(x, dtype=float) - p.x_foot) / (p.x0 - p.x_foot)
    return float(out) if np.ndim(out) == 0 else out


def zeta_grad(x, xd, p: ManifoldParams, zeta0: float = 1.0) -> np.ndarray:
    ratio = _zeta_domain(x, xd, p)
    w2 = p.omega * p.omega
    scale = zeta0 / (p.x0 - p.x_foot)
    dx = scale * ratio ** w2
    dxd = scale * w2 * ratio ** (w2 - 1.0) / p.xd0 * (x - p.x_foot)
    return np.array([dx, dxd])


@dataclass(frozen=True)
class ProgressionMap:
    """Per-step progression: zeta normalised to 0 at entry and 1 at exit.

    Uses the asymptote anchor so that zeta increases monotonically along
    forward zero-torque flow on both sides of the apex.
    """

    anchor: ManifoldParams
    raw_entry: float
    raw_exit: float

    @classmethod
    def for_step(cls, x_foot: float, xd_apex: float, omega: float,
                 entry: tuple, exit: tuple) -> "ProgressionMap":
        anc = ManifoldParams.asymptote_anchor(x_foot, xd_apex, omega)
        r0 = zeta(entry[0], entry[1], anc)
        r1 = zeta(exit[0], exit[1], anc)
        if not r1 > r0:
            raise DomainError("step exit must lie ahead of its entry in zeta")
        return cls(anc, r0, r1)

    def __call__(self, x, xd):
        return (zeta(x, xd, self.anchor) - self.raw_entry) / (self.raw_exit - self.raw_entry)


def sensitivity_norm(zeta_s, sigma_s, zeta_d: float, zeta_trans: float) -> float:
    """RMS of sigma over [zeta_d, zeta_trans] by trapezoidal quadrature.

    Samples must be ordered by non-decreasing zeta; repeated zeta values
    (an impulse) give a zero-width panel, so a jump is integrated exactly.
    """
    if not zeta_trans > zeta_d:
        raise EmptyInterval(f"empty interval [{zeta_d}, {zeta_trans}]")
    z = np.asarray(zeta_s, dtype=float)
    f = np.asarray(sigma_s, dtype=float) ** 2
    if z.shape[0] < 2 or np.any(np.diff(z) < 0):
        raise DomainError("need >= 2 samples ordered by zeta")
    tol = 1e-12 * max(1.0, abs(zeta_trans))
    if z[0] > zeta_d + tol or z[-1] < zeta_trans - tol:
        raise DomainError("samples do not cover the integration interval")
    total = 0.0
    for k in range(z.shape[0] - 1):
        za, zb = z[k], z[k + 1]
        lo, hi = max(za, zeta_d), min(zb, zeta_trans)
        if hi <= lo:
            continue
        span = zb - za
        fa = f[k] + (f[k + 1] - f[k]) * (lo - za) / span
        fb = f[k] + (f[k + 1] - f[k]) * (hi - za) / span
        total += 0.5 * (fa + fb) * (hi - lo)
    return math.sqrt(total / (zeta_trans - zeta_d))


def trajectory_sensitivity(traj: Trajectory, zeta_s, zeta_d: float, zeta_trans: float,
                           p: ManifoldParams) -> float:
    """``sensitivity_norm`` with sigma evaluated on a trajectory's sagittal state."""
    z = np.asarray(zeta_s, dtype=float)
    sel = (z >= zeta_d) & (z <= zeta_trans)
    if np.any(traj.states[sel, 3] <= 0):
        raise DomainError("progression is undefined where the forward speed vanishes")
    s = sigma(traj.states[:, 0], traj.states[:, 3], p)
    return sensitivity_norm(z, s, zeta_d, zeta_trans)


class DisturbanceCategory(str, Enum):
    SAME_SIDE_SMALL = "SameSide-Small"
    ASYMPTOTE_CROSSING = "AsymptoteCrossing"
    SAME_DIRECTION_SMALL = "SameDirection-Small"
    DIRECTION_REVERSAL = "DirectionReversal"


@dataclass(frozen=True)
class DisturbanceReport:
    pre: PhaseState
    post: PhaseState
    category: DisturbanceCategory
    sigma_jump: float


def _side(v: float) -> int:
    return (v > 0) - (v < 0)


def classify_disturbance(pre: PhaseState, post: PhaseState, p: ManifoldParams) -> DisturbanceReport:
    """Sort a velocity jump into one of the four phase-space patterns.

    Checks, in order: a flip of the forward velocity sign, a crossing of
    either pendulum asymptote ``xd = +-w (x - x_foot)`` (landing exactly on
    one counts as crossing), then the sign of the jump.
    """
    u = pre.x - p.x_foot
    wu = p.omega * u
    jump = sigma(post.x, post.xd, p) - sigma(pre.x, pre.xd, p)
    if pre.xd != 0.0 and (post.xd * pre.xd <= 0.0):
        cat = DisturbanceCategory.DIRECTION_REVERSAL
    else:
        crossed = False
        for line in (wu, -wu):
            sp, sq = _side(pre.xd - line), _side(post.xd - line)
            if sq == 0 or sq != sp:
                crossed = True
        if crossed:
            cat = DisturbanceCategory.ASYMPTOTE_CROSSING
        elif post.xd > pre.xd:
            cat = DisturbanceCategory.SAME_SIDE_SMALL
        else:
            cat = DisturbanceCategory.SAME_DIRECTION_SMALL
    return DisturbanceReport(pre, post, cat, float(jump))


def recoverability_radius(eps: float, x_trans: float, x0: float, xd_apex: float,
                          tau_y: float, params: RobotParams) -> float:
    """Largest |sigma| at ``x0`` that a constant pitch torque ``tau_y`` can
    bring back to ``eps`` by ``x_trans`` (torque-only channel)."""
    if tau_y < 0:
        raise ValueError("tau_y must be non-negative")
    if not x_trans > x0:
        raise ValueError("x_trans must lie ahead of x0")
    mu = 2.0 * math.sqrt(2.0) * xd_apex * xd_apex / params.weight
    return eps + (math.sqrt(2.0) / 2.0) * mu * (x_trans - x0) * tau_y


# -- recoverable region ----------------------------------------------------

@dataclass(frozen=True)
class RegionMap:
    """Membership bit-grid indexed like the policy table it came from."""

    stage_x: np.ndarray
    states: np.ndarray
    member: np.ndarray
    reach: np.ndarray

    @property
    def count(self) -> int:
        return int(self.member.sum())

    def cell(self, x: float, xd: float) -> tuple:
        n = kernels.snap_index(x, self.stage_x[0], _res(self.stage_x))
        i = kernels.snap_index(xd, self.states[0], _res(self.states))
        return n, i

    def contains(self, x: float, xd: float) -> bool:
        n, i = self.cell(x, xd)
        if not (0 <= n < self.member.shape[0] and 0 <= i < self.member.shape[1]):
            return False
        return bool(self.member[n, i])


def _res(axis) -> float:
    return float(axis[1] - axis[0]) if len(axis) > 1 else 1.0


@dataclass(frozen=True)
class RegionGrid:
    stage_x: np.ndarray
    states: np.ndarray


@dataclass(frozen=True)
class ControlRanges:
    omega: tuple
    tau_y: tuple


def estimate_recoverable_region(grid: RegionGrid, controls: ControlRanges | None,
                                bundle: BundleSpec, dp) -> RegionMap:
    """Mark grid cells whose closed-loop DP rollout enters the bundle in time.

    Each rollout holds the stored controls over a stage (clipped to
    ``controls`` when given) and propagates the speed exactly between stage
    positions.  A cell is a member when |sigma| <= epsilon is reached at a
    stage boundary up to and including the transition stage, and the
    rollout, continued under the boundary-layer blend, is still inside the
    bundle at the transition stage.  ``reach`` is the first entry stage.
    """
    if (grid.stage_x.shape != dp.stage_x.shape or grid.states.shape != dp.states.shape
            or not np.allclose(grid.stage_x, dp.stage_x, rtol=0, atol=1e-12)
            or not np.allclose(grid.states, dp.states, rtol=0, atol=1e-12)):
        raise GridMismatch("query grid differs from the policy table grid")
    pw = np.array(dp.policy_omega, dtype=float)
    pt = np.array(dp.policy_tau, dtype=float)
    if controls is not None:
        pw = np.clip(pw, *controls.omega)
        pt = np.clip(pt, *controls.tau_y)
    cfg = dp.kernel_cfg()
    member, reach = kernels.region_rollout(
        dp.stage_x, dp.states, float(dp.states[0]), dp.state_res, pw, pt, cfg, bundle.epsilon)
    member = member.astype(bool) & _ends_in_bundle(dp, pw, pt, bundle.epsilon)
    reach = np.where(member, reach, -1)
    return RegionMap(np.array(dp.stage_x), np.array(dp.states), member, reach)


def _ends_in_bundle(dp, pw, pt, eps: float) -> np.ndarray:
    """Final |sigma| <= eps for the blended stage rollout from every cell.

    Same arithmetic as the scalar ``policy_rollout``: outside the layer the
    snapped cell's control is held for a stage; inside it the control held
    on entry is blended toward the reference with weight |sigma|/eps.
    """
    s = dp.step
    mg = s.mass * s.gravity
    w_ref = s.omega_ref
    xs, vs = np.asarray(dp.stage_x, float), np.asarray(dp.states, float)
    N, S = xs.shape[0], vs.shape[0]
    v0, vres = float(vs[0]), _res(vs)
    ok_out = np.zeros((N, S), dtype=bool)
    start = np.empty(0, dtype=np.int64)  # flat start-cell index
    v = np.empty(0)
    ue_w = np.empty(0)  # held layer-entry control, nan until entered
    ue_t = np.empty(0)
    for n in range(N):
        start = np.concatenate([start, n * S + np.arange(S, dtype=np.int64)])
        v = np.concatenate([v, vs])
        ue_w = np.concatenate([ue_w, np.full(S, np.nan)])
        ue_t = np.concatenate([ue_t, np.full(S, np.nan)])
        xn = float(xs[n])
        sg = sigma_apex(xn, v, s.x_foot, s.xd_apex, w_ref)
        a = np.abs(sg)
        inside = a <= eps
        if n == N - 1:
            ok_out.flat[start[inside]] = True
            break
        j = np.ceil((v - v0) / vres - 0.5)
        ing = (j >= 0) & (j < S)
        jj = np.where(ing, j, 0).astype(np.int64)
        dw, dt_ = pw[n][jj], pt[n][jj]
        have = ing & np.isfinite(dw) & np.isfinite(dt_)
        alive = have | inside
        dw = np.where(have, dw, w_ref)
        dt_ = np.where(have, dt_, 0.0)
        fresh = inside & np.isnan(ue_w)
        ue_w = np.where(~inside, dw, np.where(fresh, w_ref, ue_w))
        ue_t = np.where(~inside, dt_, np.where(fresh, 0.0, ue_t))
        lam = a / eps
        rest = (eps - a) / eps
        w = np.where(inside, lam * ue_w + rest * w_ref, dw)
        tau = np.where(inside, lam * ue_t + rest * 0.0, dt_)
        dx = float(xs[n + 1]) - xn
        acc = (w * w) * ((xn + 0.5 * dx) - s.x_foot - tau / mg)
        v2 = v * v + 2.0 * dx * acc
        alive &= v2 > 0
        start, ue_w, ue_t = start[alive], ue_w[alive], ue_t[alive]
        v = np.sqrt(v2[alive])
    return ok_out


def viable_region(grid: RegionGrid, controls: ControlRanges | None, bundle: BundleSpec,
                  dp) -> RegionMap:
    """Cells from which *some* control sequence on the table's control grid
    (restricted to ``controls``) enters the bundle by the last stage.

    Backward reachability over the same stage model and speed snapping as
    the DP.  Unlike the policy rollout this set can only grow when the
    control ranges widen, so it is the quantity to compare across ranges.
    ``reach`` holds the earliest stage at which the bundle can be entered.
    """
    if (grid.stage_x.shape != dp.stage_x.shape or grid.states.shape != dp.states.shape
            or not np.allclose(grid.stage_x, dp.stage_x, rtol=0, atol=1e-12)
            or not np.allclose(grid.states, dp.states, rtol=0, atol=1e-12)):
        raise GridMismatch("query grid differs from the policy table grid")
    W = np.repeat(dp.omegas, len(dp.taus))
    T = np.tile(dp.taus, len(dp.omegas))
    if controls is not None:
        tol = 1e-12
        keep = ((W >= controls.omega[0] - tol) & (W <= controls.omega[1] + tol)
                & (T >= controls.tau_y[0] - tol) & (T <= controls.tau_y[1] + tol))
        W, T = W[keep], T[keep]
    s = dp.step
    mg = s.mass * s.gravity
    xs, vs = np.asarray(dp.stage_x, float), np.asarray(dp.states, float)
    N, S = xs.shape[0], vs.shape[0]
    X, V = np.meshgrid(xs, vs, indexing="ij")
    inside = np.abs(sigma_apex(X, V, s.x_foot, s.xd_apex, s.omega_ref)) <= bundle.epsilon
    member = inside.copy()
    reach = np.where(inside, np.arange(N)[:, None], -1).astype(np.int64)
    if W.size == 0:
        return RegionMap(xs.copy(), vs.copy(), member, reach)
    v0, res = float(vs[0]), dp.state_res
    for n in range(N - 2, -1, -1):
        dx = xs[n + 1] - xs[n]
        u = (xs[n] + 0.5 * dx) - s.x_foot
        v2e = vs[:, None] ** 2 + 2.0 * dx * (W * W)[None, :] * (u - T[None, :] / mg)
        ok = v2e > 0.0
        j = np.ceil((np.sqrt(np.where(ok, v2e, 1.0)) - v0) / res - 0.5)
        ok &= (j >= 0) & (j < S)
        jj = np.where(ok, j, 0).astype(np.int64)
        nxt = ok & member[n + 1][jj]
        # earliest reachable entry stage among successful controls
        r_next = np.where(nxt, reach[n + 1][jj], N)
        best = r_next.min(axis=1)
        grow = ~inside[n] & nxt.any(axis=1)
        member[n] |= grow
        reach[n] = np.where(inside[n], n, np.where(grow, best, -1))
    return RegionMap(xs.copy(), vs.copy(), member, reach)
