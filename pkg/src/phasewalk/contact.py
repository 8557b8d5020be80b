"""Two-contact force distribution for dual-support phases.

With point feet at ``p_L`` and ``p_R`` the reaction forces ``f = [f_L; f_R]``
must balance the CoM wrench demand.  The grasp matrix stacks

* force balance        ``f_L + f_R = f_com``
* moment about the CoM ``(p_L - c) x f_L + (p_R - c) x f_R = tau_com``
* internal force       ``u . (f_L - f_R) / 2 = f_int``

where ``u`` is the unit vector from the right to the left foot.  A positive
``f_int`` is tension: the legs pull the contacts together, so the reactions
on the body point away from the other foot.  A pendulum leaning on both
legs is in compression (negative ``f_int``).  The internal row is orthogonal to the first six
for forces along the foot line, which is exactly the null space of the
balance rows, so the 7x6 system has full column rank.

The moment component along ``u`` is fixed by the net force (forces applied
on the foot line have no moment about it), so only demands with
``u . tau_com = u . ((p_R - c) x f_com)`` are reachable.  ``WrenchDemand.consistent``
builds such demands.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DegenerateContacts, RankDeficient

RCOND = 1e-10
_UNIT_TOL = 1e-12


def _vec(v) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite vector")
    return a


def skew(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


@dataclass(frozen=True)
class ContactPair:
    p_left: np.ndarray
    p_right: np.ndarray
    n_left: np.ndarray = (0.0, 0.0, 1.0)
    n_right: np.ndarray = (0.0, 0.0, 1.0)
    half_angle: float = math.pi / 4

    def __post_init__(self):
        for name in ("p_left", "p_right", "n_left", "n_right"):
            object.__setattr__(self, name, _vec(getattr(self, name)))
        for n in (self.n_left, self.n_right):
            if abs(np.linalg.norm(n) - 1.0) > _UNIT_TOL:
                raise ValueError("contact normals must be unit length")
        if not 0 < self.half_angle < math.pi / 2:
            raise ValueError("cone half-angle must lie in (0, pi/2)")

    @property
    def axis(self) -> np.ndarray:
        d = self.p_left - self.p_right
        n = np.linalg.norm(d)
        if n == 0.0:
            raise DegenerateContacts("left and right contacts coincide")
        return d / n


@dataclass(frozen=True)
class WrenchDemand:
    f_com: np.ndarray
    tau_com: np.ndarray
    f_int: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "f_com", _vec(self.f_com))
        object.__setattr__(self, "tau_com", _vec(self.tau_com))
        if not math.isfinite(self.f_int):
            raise ValueError("f_int must be finite")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.f_com, self.tau_com, [self.f_int]])

    @classmethod
    def consistent(cls, pair: ContactPair, p_com, f_com, tau_perp=(0.0, 0.0, 0.0),
                   f_int: float = 0.0) -> "WrenchDemand":
        """Demand whose moment along the foot line is the reachable one.

        ``tau_perp`` supplies the remaining moment; its component along the
        foot axis is discarded.
        """
        u = pair.axis
        f = _vec(f_com)
        t = _vec(tau_perp)
        roll = float(u @ np.cross(pair.p_right - _vec(p_com), f))
        t = t - (u @ t) * u + roll * u
        return cls(f, t, float(f_int))

    @classmethod
    def from_motion(cls, pair: ContactPair, p_com, acc, mass: float, gravity: float,
                    f_int: float = 0.0, clamp_support: bool = True) -> "WrenchDemand":
        """Point-mass demand ``f = m (a + g e_z)``.

        With ``clamp_support`` the moment is the one produced by ``f`` acting
        at the point of the foot segment closest to zero moment, so the
        pressure point never leaves the support.  Any remaining moment is
        what the flywheel/torso must supply.  Otherwise only the reachable
        roll moment is demanded.
        """
        f = mass * (_vec(acc) + np.array([0.0, 0.0, gravity]))
        if not clamp_support:
            return cls.consistent(pair, p_com, f, (0.0, 0.0, 0.0), f_int)
        tau, _ = support_moment(pair, p_com, f)
        return cls(f, tau, float(f_int))


def support_moment(pair: ContactPair, p_com, f_com) -> tuple:
    """Least moment about the CoM of ``f_com`` applied on the foot segment.

    The point ``p(s) = p_R + s (p_L - p_R)`` with ``s`` clipped to [0, 1]
    minimises ``|(p(s) - c) x f|``.  Returns ``(tau, s)``.
    """
    c, f = _vec(p_com), _vec(f_com)
    d = pair.p_left - pair.p_right
    t0 = np.cross(pair.p_right - c, f)
    t1 = np.cross(d, f)
    den = float(t1 @ t1)
    s = 0.5 if den == 0.0 else float(np.clip(-(t0 @ t1) / den, 0.0, 1.0))
    return t0 + s * t1, s


def build_grasp_matrix(pair: ContactPair, p_com) -> np.ndarray:
    """7x6 map from ``[f_L; f_R]`` to ``[f_com; tau_com; f_int]``."""
    c = _vec(p_com)
    u = pair.axis
    G = np.zeros((7, 6))
    G[0:3, 0:3] = np.eye(3)
    G[0:3, 3:6] = np.eye(3)
    G[3:6, 0:3] = skew(pair.p_left - c)
    G[3:6, 3:6] = skew(pair.p_right - c)
    G[6, 0:3] = 0.5 * u
    G[6, 3:6] = -0.5 * u
    return G


def solve_reaction_forces(pair: ContactPair, p_com, demand: WrenchDemand) -> tuple:
    """Minimum-norm least-squares reaction forces ``(f_left, f_right)``."""
    G = build_grasp_matrix(pair, p_com)
    sv = np.linalg.svd(G, compute_uv=False)
    if sv[-1] <= RCOND * sv[0]:
        raise RankDeficient(f"grasp matrix singular values {sv}")
    f = np.linalg.pinv(G, rcond=RCOND) @ demand.as_vector()
    return f[:3], f[3:]


def check_friction_cone(force, normal, half_angle: float, zero_tol: float = 0.0) -> tuple:
    """``(inside, margin)`` with margin = half_angle - angle(force, normal).

    An unloaded contact (``|force| <= zero_tol``) is feasible with the full
    margin.
    """
    f = _vec(force)
    n = _vec(normal)
    if abs(np.linalg.norm(n) - 1.0) > _UNIT_TOL:
        raise ValueError("normal must be unit length")
    mag = np.linalg.norm(f)
    if mag <= zero_tol:
        return True, float(half_angle)
    fn = float(f @ n)
    ft = float(np.linalg.norm(f - fn * n))
    ang = math.atan2(ft, fn)
    margin = half_angle - ang
    # boundary inclusive up to rounding of the angle evaluation
    return bool(fn > 0.0 and margin >= -1e-12), float(margin)


ZERO_LOAD_RTOL = 1e-9


def cone_margins(pair: ContactPair, f_left, f_right) -> tuple:
    """Both cone checks; a foot carrying less than ``ZERO_LOAD_RTOL`` of the
    total load counts as unloaded (pseudoinverse round-off)."""
    tol = ZERO_LOAD_RTOL * (np.linalg.norm(f_left) + np.linalg.norm(f_right))
    ok_l, m_l = check_friction_cone(f_left, pair.n_left, pair.half_angle, tol)
    ok_r, m_r = check_friction_cone(f_right, pair.n_right, pair.half_angle, tol)
    return ok_l and ok_r, min(m_l, m_r)


def _feasible(pair, p_com, demand, f_int):
    d = WrenchDemand(demand.f_com, demand.tau_com, f_int)
    fl, fr = solve_reaction_forces(pair, p_com, d)
    ok, margin = cone_margins(pair, fl, fr)
    return ok, margin, fl, fr


def solve_min_internal(pair: ContactPair, p_com, demand: WrenchDemand,
                       f_max: float = 1000.0, tol: float = 1e-6,
                       hint: float | None = None) -> tuple:
    """Internal force of least magnitude that puts both forces in their cones.

    The forces are affine in ``f_int`` and each cone is convex, so the
    feasible ``f_int`` values form an interval and the worst margin is
    quasi-concave in ``f_int``.  The margin is maximised over
    ``[-f_max, f_max]``; from a feasible point the interval end nearest to
    zero is bisected.  The feasible set can shrink to a single point (one
    foot unloaded); ``hint`` is tried as that point.  Returns
    ``(f_int, f_left, f_right, margin)``; when no value is feasible the
    best-margin value comes back with a negative margin.
    """
    ok, margin, fl, fr = _feasible(pair, p_com, demand, 0.0)
    if ok:
        return 0.0, fl, fr, margin
    res = minimize_scalar(lambda f: -_feasible(pair, p_com, demand, f)[1],
                          bounds=(-f_max, f_max), method="bounded",
                          options={"xatol": tol})
    best = float(res.x)
    ok, margin, fl, fr = _feasible(pair, p_com, demand, best)
    if not ok:
        if hint is not None:
            h = _feasible(pair, p_com, demand, hint)
            if h[0]:
                return float(hint), h[2], h[3], h[1]
        return best, fl, fr, margin
    lo_v, hi_v = 0.0, best  # infeasible .. feasible
    while abs(hi_v - lo_v) > tol:
        mid = 0.5 * (lo_v + hi_v)
        if _feasible(pair, p_com, demand, mid)[0]:
            hi_v = mid
        else:
            lo_v = mid
    _, margin, fl, fr = _feasible(pair, p_com, demand, hi_v)
    return hi_v, fl, fr, margin


@dataclass(frozen=True)
class ContactSample:
    t: float
    p_com: np.ndarray
    f_left: np.ndarray
    f_right: np.ndarray
    f_int: float
    margin: float
    feasible: bool
    residual: float
    support_torque: float


def _pair_for(a, b, half_angle: float) -> ContactPair:
    """Order the support feet of consecutive steps into left/right."""
    from .planner import to_local

    fa, fb = np.asarray(a.foot, float), np.asarray(b.foot, float)
    la = to_local(a.heading, fa[:2])[1]
    lb = to_local(a.heading, fb[:2])[1]
    left, right = (fa, fb) if la >= lb else (fb, fa)
    return ContactPair(left, right, half_angle=half_angle)


def multicontact_forces(plans, mass: float, gravity: float, n_samples: int = 21,
                        f_int="auto", half_angle: float = math.pi / 4) -> list:
    """Reaction forces along every dual-contact bridge of a plan."""
    out = []
    for q in range(len(plans) - 1):
        seg = plans[q].multicontact
        if seg is None:
            continue
        pair = _pair_for(plans[q], plans[q + 1], half_angle)
        ts = seg.t0 + np.linspace(0.0, seg.T, n_samples)
        pos, _, acc = seg.evaluate(ts)
        for k, t in enumerate(ts):
            c, a = pos[:, k], acc[:, k]
            d = WrenchDemand.from_motion(pair, c, a, mass, gravity)
            _, share = support_moment(pair, c, d.f_com)
            hint = (2.0 * share - 1.0) * float(pair.axis @ d.f_com) / 2.0
            wrench_free = WrenchDemand.consistent(pair, c, d.f_com)
            t_sup = float(np.linalg.norm(d.tau_com - wrench_free.tau_com))
            if f_int == "auto":
                fi, fl, fr, margin = solve_min_internal(pair, c, d, hint=hint)
                ok = margin >= -1e-12
            else:
                fi = float(f_int)
                ok, margin, fl, fr = _feasible(pair, c, d, fi)
            dd = WrenchDemand(d.f_com, d.tau_com, fi).as_vector()
            G = build_grasp_matrix(pair, c)
            res = float(np.linalg.norm(G @ np.concatenate([fl, fr]) - dd) / np.linalg.norm(dd))
            out.append(ContactSample(float(t), c, fl, fr, fi, margin, bool(ok), res, t_sup))
    return out
