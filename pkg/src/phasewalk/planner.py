"""Nominal multi-step CoM plans in phase space.

Each step is planned in a frame rotated by its heading: the sagittal
coordinate ``s`` runs along the heading, the lateral coordinate ``l`` is
orthogonal to it.  The sagittal motion follows the zero-torque pendulum
about the foot, step transitions are where the current orbit meets the
next step's nominal manifold, and the lateral foot is searched so the
lateral velocity vanishes at the sagittal apex.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from . import kernels
from .dynamics import (ComSurface, PhaseState, RobotParams, Trajectory, analytic_flow,
                       omega_from_surface)
from .errors import (NoConvergence, OutOfBounds, LateralSearchFailed, StepError,
                     TransitionNotFound, UnreachableStep)
from .manifold import ManifoldParams, ProgressionMap, sigma, sigma_apex

MIN_APEX_SPEED = 0.03


@dataclass(frozen=True)
class StepSpec:
    foot: tuple
    surface: ComSurface
    apex_speed: float
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "foot", tuple(float(v) for v in self.foot))
        if len(self.foot) != 3:
            raise ValueError("foot must be a 3-vector")
        if not (math.isfinite(self.apex_speed) and math.isfinite(self.heading)):
            raise ValueError("apex speed and heading must be finite")

    def omega(self, params: RobotParams) -> float:
        return omega_from_surface(self.surface, self.foot, params)

    def validate(self, params: RobotParams, min_apex: float = MIN_APEX_SPEED) -> None:
        if not self.apex_speed >= min_apex:
            raise ValueError(f"apex speed {self.apex_speed} below minimum {min_apex}")
        self.omega(params)


@dataclass(frozen=True)
class PlannerConfig:
    min_apex_speed: float = MIN_APEX_SPEED
    max_step_length: float = 0.8
    sample_dt: float = 1e-3
    lateral_half_width: float = 0.1
    first_side: int = 1
    lateral_min: float = 0.005
    lateral_max: float = 0.8
    lateral_tol: float = 1e-9
    lateral_n_max: int = 15
    lateral_dt: float = 1e-3
    first_entry_offset: float | None = None
    multicontact_fraction: float = 0.0
    continuous_surfaces: bool = False


# -- frames ----------------------------------------------------------------

def _rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def to_local(theta: float, v) -> np.ndarray:
    """Global horizontal vector -> (sagittal, lateral) of heading ``theta``."""
    return _rot(theta).T @ np.asarray(v, dtype=float)


def to_global(theta: float, v) -> np.ndarray:
    return _rot(theta) @ np.asarray(v, dtype=float)


# -- quintic multi-contact segment -----------------------------------------

@dataclass(frozen=True)
class QuinticSegment:
    """Per-axis quintic ``p(t) = sum c_k (t - t0)^k`` on ``[t0, t0 + T]``."""

    t0: float
    T: float
    coeffs: np.ndarray  # (3, 6)

    def evaluate(self, t):
        tau = np.asarray(t, dtype=float) - self.t0
        c = self.coeffs
        pw = np.stack([tau ** k for k in range(6)])
        pos = c @ pw
        dpw = np.stack([k * tau ** (k - 1) if k else np.zeros_like(tau) for k in range(6)])
        vel = c @ dpw
        ddpw = np.stack([k * (k - 1) * tau ** (k - 2) if k > 1 else np.zeros_like(tau)
                         for k in range(6)])
        acc = c @ ddpw
        return pos, vel, acc


def _quintic_axis(p0, v0, a0, p1, v1, a1, T) -> np.ndarray:
    T2, T3, T4, T5 = T * T, T ** 3, T ** 4, T ** 5
    c0, c1, c2 = p0, v0, 0.5 * a0
    A = np.array([[T3, T4, T5], [3 * T2, 4 * T3, 5 * T4], [6 * T, 12 * T2, 20 * T3]])
    rhs = np.array([p1 - (c0 + c1 * T + c2 * T2), v1 - (c1 + 2 * c2 * T), a1 - 2 * c2])
    c3, c4, c5 = np.linalg.solve(A, rhs)
    return np.array([c0, c1, c2, c3, c4, c5])


def smooth_multicontact(pre: tuple, post: tuple, T: float, t0: float = 0.0) -> QuinticSegment:
    """Quintic bridge between ``pre=(state, accel)`` and ``post=(state, accel)``.

    ``state`` is a PhaseState and ``accel`` a 3-vector (xdd, ydd, zdd).
    """
    if not T > 0:
        raise ValueError("segment duration must be positive")
    s0, a0 = pre
    s1, a1 = post
    p0, v0 = s0.as_array()[:3], s0.as_array()[3:]
    p1, v1 = s1.as_array()[:3], s1.as_array()[3:]
    coeffs = np.stack([_quintic_axis(p0[i], v0[i], a0[i], p1[i], v1[i], a1[i], T)
                       for i in range(3)])
    return QuinticSegment(float(t0), float(T), coeffs)


# -- step plan --------------------------------------------------------------

@dataclass(frozen=True)
class StepPlan:
    """One planned step in global coordinates.

    ``manifold`` and ``transition`` live on the step's sagittal axis
    (coordinate ``s = e_heading . p``); ``lateral_foot`` is the lateral axis
    coordinate of the foot.
    """

    index: int
    spec: StepSpec
    omega: float
    manifold: ManifoldParams
    progression: ProgressionMap
    lateral_foot: float
    trajectory: Trajectory
    entry: PhaseState
    exit: PhaseState
    t_entry: float
    t_apex: float
    t_exit: float
    transition: tuple
    multicontact: QuinticSegment | None = None

    @property
    def heading(self) -> float:
        return self.spec.heading

    @property
    def foot(self) -> tuple:
        return self.spec.foot

    @property
    def sagittal(self) -> Trajectory:
        return self.trajectory

    @property
    def lateral(self) -> Trajectory:
        return self.trajectory

    @property
    def duration(self) -> float:
        return self.t_exit - self.t_entry

    def local(self, state: PhaseState) -> tuple:
        """(s, s_dot, l, l_dot) of a global state in this step's frame."""
        s, l_ = to_local(self.heading, (state.x, state.y))
        sd, ld = to_local(self.heading, (state.xd, state.yd))
        return float(s), float(sd), float(l_), float(ld)

    def sigma(self, state: PhaseState) -> float:
        s, sd, _, _ = self.local(state)
        m = self.manifold
        return sigma_apex(s, sd, m.x_foot, m.xd0, m.omega)

    def accel(self, state: PhaseState) -> np.ndarray:
        """Zero-torque CoM acceleration (xdd, ydd, zdd) about this foot."""
        s, _, l_, _ = self.local(state)
        w2 = self.omega * self.omega
        acc_l = np.array([w2 * (s - self.manifold.x_foot), w2 * (l_ - self.lateral_foot)])
        ax, ay = to_global(self.heading, acc_l)
        surf = self.spec.surface
        return np.array([ax, ay, surf.a * ax + surf.b * ay])


# -- transition and lateral search -----------------------------------------

def find_step_transition(current: ManifoldParams, nxt: ManifoldParams) -> tuple:
    """Point where the current orbit meets the next step's sigma = 0 set.

    The current orbit is parameterised by position with its conserved
    energy; the root of ``sigma_next`` along it is bracketed between the two
    feet.
    """
    lo, hi = current.x_foot, nxt.x_foot
    if lo > hi:
        lo, hi = hi, lo

    def dsig(x):
        return sigma(x, current.velocity_at(x), nxt)

    f_lo, f_hi = dsig(lo), dsig(hi)
    if not (np.isfinite(f_lo) and np.isfinite(f_hi)) or f_lo * f_hi > 0:
        raise TransitionNotFound(
            f"no sign change of the manifold difference on [{lo}, {hi}] ({f_lo}, {f_hi})")
    if f_lo == 0:
        x = lo
    elif f_hi == 0:
        x = hi
    else:
        x = brentq(dsig, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    if abs(dsig(x)) >= 1e-10:
        raise TransitionNotFound(f"root residual {dsig(x)} too large")
    return float(x), float(current.velocity_at(x))


@dataclass(frozen=True)
class LateralSearchResult:
    y_foot: float
    yd_apex: float
    iterations: int


def lateral_apex_velocity(y_init: float, yd_init: float, omega: float, y_foot: float,
                          duration: float, dt: float = 1e-3) -> float:
    """Lateral velocity after ``duration`` by RK4 integration of the
    zero-torque lateral pendulum about ``y_foot``."""
    if duration <= 0:
        return float(yd_init)
    n = max(1, int(math.ceil(duration / dt)))
    h = duration / n
    p = np.array([omega, 0.0, 0.0, 0.0, 0.0, y_foot, 0.0, 0.0, 1.0, 1.0])
    path = kernels.rk4_path(np.array([0.0, y_init, 0.0, 0.0, yd_init, 0.0]), p, h, n, 0)
    return float(path[-1, 4])


def search_lateral_foot_info(y_init: float, yd_init: float, omega: float, bounds: tuple,
                             tol: float = 1e-4, n_max: int = 15, *, duration: float,
                             y_guess: float | None = None, slope0: float | None = None,
                             dt: float = 1e-3) -> LateralSearchResult:
    """Newton/secant search for the lateral foot giving zero apex velocity.

    ``duration`` is the time from the entry state to the sagittal apex.
    ``slope0`` seeds the derivative of the apex velocity with respect to the
    foot; by default it is the analytic value ``-w sinh(w T)``.
    """
    lo, hi = float(min(bounds)), float(max(bounds))
    if not lo <= hi:
        raise ValueError("empty lateral bounds")
    yf = 0.5 * (lo + hi) if y_guess is None else min(max(float(y_guess), lo), hi)
    slope = -omega * math.sinh(omega * duration) if slope0 is None else float(slope0)
    yd_apex = lateral_apex_velocity(y_init, yd_init, omega, yf, duration, dt)
    n = 1
    while n < n_max and abs(yd_apex) > tol:
        if slope == 0 or not math.isfinite(slope):
            raise NoConvergence("degenerate derivative estimate")
        y_new = min(max(yf - yd_apex / slope, lo), hi)
        if y_new == yf:
            raise OutOfBounds(f"lateral foot pinned at bound {yf} with apex velocity {yd_apex}")
        yd_new = lateral_apex_velocity(y_init, yd_init, omega, y_new, duration, dt)
        slope = (yd_new - yd_apex) / (y_new - yf)
        yf, yd_apex = y_new, yd_new
        n += 1
    if abs(yd_apex) > tol:
        raise NoConvergence(f"apex velocity {yd_apex} after {n} iterations")
    return LateralSearchResult(yf, yd_apex, n)


def search_lateral_foot(y_init: float, yd_init: float, omega: float, bounds: tuple,
                        tol: float = 1e-4, n_max: int = 15, **kw) -> float:
    return search_lateral_foot_info(y_init, yd_init, omega, bounds, tol, n_max, **kw).y_foot


# -- plan generation --------------------------------------------------------

def _flow_time(u0: float, v0: float, u: float, omega: float) -> float:
    """Time for the zero-torque flow from (u0, v0) to reach offset ``u``.

    Requires an orbit that passes over the foot (positive energy, v0 > 0).
    """
    E = v0 * v0 - omega * omega * u0 * u0
    if not (E > 0 and v0 > 0):
        raise TransitionNotFound("orbit does not pass over the foot")
    r = math.sqrt(E) / omega
    return (math.asinh(u / r) - math.asinh(u0 / r)) / omega


def _apex_time(u0: float, v0: float, omega: float) -> float:
    return _flow_time(u0, v0, 0.0, omega)


def _lateral_bounds(l_e: float, ld_e: float, cfg: PlannerConfig) -> tuple:
    if ld_e > 0:
        return (l_e + cfg.lateral_min, l_e + cfg.lateral_max)
    if ld_e < 0:
        return (l_e - cfg.lateral_max, l_e - cfg.lateral_min)
    return (l_e - cfg.lateral_max, l_e + cfg.lateral_max)


@dataclass
class _Local:
    """Analytic local-frame motion of one step from its entry."""

    theta: float
    omega: float
    s_f: float
    l_f: float
    s_e: float
    sd_e: float
    l_e: float
    ld_e: float

    def at(self, t):
        s, sd = analytic_flow(self.s_e, self.sd_e, self.s_f, self.omega, t)
        l_, ld = analytic_flow(self.l_e, self.ld_e, self.l_f, self.omega, t)
        return s, sd, l_, ld

    def global_state(self, t, surface: ComSurface) -> np.ndarray:
        s, sd, l_, ld = (np.atleast_1d(v) for v in self.at(t))
        R = _rot(self.theta)
        xy = R @ np.vstack([s, l_])
        vxy = R @ np.vstack([sd, ld])
        z = surface.a * xy[0] + surface.b * xy[1] + surface.c
        zd = surface.a * vxy[0] + surface.b * vxy[1]
        return np.column_stack([xy[0], xy[1], z, vxy[0], vxy[1], zd])


def _sample_times(t_end: float, dt: float) -> np.ndarray:
    n = int(math.floor(t_end / dt + 1e-9))
    ts = dt * np.arange(n + 1)
    if t_end - ts[-1] > 1e-9 * max(1.0, dt):
        ts = np.append(ts, t_end)
    else:
        ts[-1] = t_end
    return ts


def _check_reach(steps: Sequence[StepSpec], cfg: PlannerConfig, offset: int) -> None:
    for q in range(1, len(steps)):
        a, b = steps[q - 1].foot, steps[q].foot
        d = math.hypot(b[0] - a[0], b[1] - a[1])
        if d > cfg.max_step_length + 1e-12:
            raise UnreachableStep(f"step length {d:.3f} exceeds {cfg.max_step_length}",
                                  q + offset)


def default_entry(first: StepSpec, second: StepSpec | None, params: RobotParams,
                  cfg: PlannerConfig) -> PhaseState:
    """On-manifold entry state of the first step.

    The entry sits half a step before the foot and the lateral state is
    chosen so that the first searched foot lands ``lateral_half_width`` to
    the ``first_side`` of the CoM path.
    """
    th = first.heading
    s_f, l_g = to_local(th, first.foot[:2])
    w = first.omega(params)
    if cfg.first_entry_offset is not None:
        back = cfg.first_entry_offset
    elif second is not None:
        back = 0.5 * float(to_local(th, np.subtract(second.foot[:2], first.foot[:2]))[0])
    else:
        back = 0.25
    s_e = s_f - abs(back)
    sd_e = float(ManifoldParams.apex(s_f, first.apex_speed, w).velocity_at(s_e))
    T = _apex_time(s_e - s_f, sd_e, w)
    side = 1 if cfg.first_side >= 0 else -1
    hw = cfg.lateral_half_width
    l_e = l_g - side * hw
    ld_e = side * hw * w * math.tanh(w * T)
    xy = to_global(th, (s_e, l_e))
    vxy = to_global(th, (sd_e, ld_e))
    return first.surface.project(float(xy[0]), float(xy[1]), float(vxy[0]), float(vxy[1]))


def plan_from_entry(steps: Sequence[StepSpec], entry: PhaseState, t_entry: float,
                    params: RobotParams, cfg: PlannerConfig | None = None,
                    first_index: int = 0, final_exit: float | None = None) -> list:
    """Plan ``steps`` starting from an arbitrary entry state of the first one.

    ``final_exit`` is the sagittal exit offset of the last step from its
    foot (default: mirror of its entry offset).
    """
    cfg = cfg or PlannerConfig()
    if not steps:
        raise ValueError("need at least one step")
    for q, sp in enumerate(steps):
        try:
            sp.validate(params, cfg.min_apex_speed)
        except ValueError as exc:
            raise StepError(str(exc), q + first_index) from exc
    _check_reach(steps, cfg, first_index)

    plans: list[StepPlan] = []
    state = entry
    t0 = float(t_entry)
    for q, sp in enumerate(steps):
        idx = q + first_index
        th = sp.heading
        w = sp.omega(params)
        s_f, l_g = (float(v) for v in to_local(th, sp.foot[:2]))
        s_e, l_e = (float(v) for v in to_local(th, (state.x, state.y)))
        sd_e, ld_e = (float(v) for v in to_local(th, (state.xd, state.yd)))
        try:
            T_apex = _apex_time(s_e - s_f, sd_e, w)
        except TransitionNotFound as exc:
            raise TransitionNotFound(str(exc), idx) from exc

        # lateral foot on the line through the guess, orthogonal to the heading
        try:
            res = search_lateral_foot_info(
                l_e, ld_e, w, _lateral_bounds(l_e, ld_e, cfg), cfg.lateral_tol,
                cfg.lateral_n_max, duration=T_apex, y_guess=l_g, dt=cfg.lateral_dt)
        except LateralSearchFailed as exc:
            raise type(exc)(str(exc), idx) from exc
        l_f = res.y_foot
        n_dir = to_global(th, (0.0, 1.0))
        shift = l_f - l_g
        foot_xy = np.asarray(sp.foot[:2]) + shift * n_dir
        surf = sp.surface
        surf = ComSurface(surf.a, surf.b, surf.c - (surf.a * n_dir[0] + surf.b * n_dir[1]) * shift)
        if cfg.continuous_surfaces:
            surf = _surface_through(surf, th, (float(foot_xy[0]), float(foot_xy[1]), sp.foot[2]), state)
        spec = replace(sp, foot=(float(foot_xy[0]), float(foot_xy[1]), sp.foot[2]), surface=surf)

        loc = _Local(th, w, s_f, l_f, s_e, sd_e, l_e, ld_e)
        current = ManifoldParams(s_e, sd_e, s_f, w)
        manifold = ManifoldParams.apex(s_f, sp.apex_speed, w)

        if q + 1 < len(steps):
            nx = steps[q + 1]
            w_n = nx.omega(params)
            try:
                if nx.heading == th:
                    s_fn = float(to_local(th, nx.foot[:2])[0])
                    s_t, sd_t = find_step_transition(current, ManifoldParams.apex(s_fn, nx.apex_speed, w_n))
                    t_rel = _flow_time(s_e - s_f, sd_e, s_t - s_f, w)
                else:
                    t_rel = _turning_transition(loc, nx, w_n, T_apex)
                    s_t, sd_t = (float(v) for v in analytic_flow(s_e, sd_e, s_f, w, t_rel))
            except TransitionNotFound as exc:
                raise TransitionNotFound(str(exc), idx) from exc
        else:
            off = abs(s_e - s_f) if final_exit is None else abs(final_exit)
            t_rel = _flow_time(s_e - s_f, sd_e, off, w)
            s_t, sd_t = (float(v) for v in analytic_flow(s_e, sd_e, s_f, w, t_rel))

        ts = _sample_times(t_rel, cfg.sample_dt)
        states = loc.global_state(ts, surf)
        traj = Trajectory(t0 + ts, states, np.r_[w, 0.0, 0.0, 0.0, spec.foot])
        exit_state = PhaseState.from_array(states[-1])
        try:
            prog = ProgressionMap.for_step(s_f, sp.apex_speed, w, (s_e, sd_e), (s_t, sd_t))
        except Exception as exc:
            raise TransitionNotFound(str(exc), idx) from exc
        plans.append(StepPlan(idx, spec, w, manifold, prog, l_f, traj, state, exit_state,
                              t0, t0 + T_apex, t0 + t_rel, (s_t, sd_t, 1.0)))
        state = exit_state
        t0 = t0 + t_rel

    if cfg.multicontact_fraction > 0:
        plans = attach_multicontact(plans, cfg.multicontact_fraction)
    return plans


def _surface_through(surf: ComSurface, theta: float, foot: tuple, state: PhaseState) -> ComSurface:
    """Re-tilt ``surf`` along the heading so it contains the entry CoM point,
    keeping its lateral slope and its apex height above ``foot``."""
    H = surf.apex_height(foot)
    e = to_global(theta, (1.0, 0.0))
    n = to_global(theta, (0.0, 1.0))
    d = np.array([state.x - foot[0], state.y - foot[1]])
    along = float(e @ d)
    if abs(along) < 1e-9:
        return surf
    k_n = surf.a * n[0] + surf.b * n[1]
    k_e = (state.z - H - foot[2] - k_n * float(n @ d)) / along
    a, b = k_e * e + k_n * n
    return ComSurface(float(a), float(b), float(H + foot[2] - a * foot[0] - b * foot[1]))


def _turning_transition(loc: _Local, nx: StepSpec, w_n: float, T_apex: float) -> float:
    """Time after entry at which the current orbit meets the next step's
    nominal manifold expressed in the next step's rotated frame."""
    th_n = nx.heading
    s_fn = float(to_local(th_n, nx.foot[:2])[0])
    R = _rot(th_n).T @ _rot(loc.theta)
    nxt = ManifoldParams.apex(s_fn, nx.apex_speed, w_n)

    def g(t):
        s, sd, l_, ld = loc.at(t)
        p = R @ np.array([s, l_])
        v = R @ np.array([sd, ld])
        return sigma(p[0], v[0], nxt)

    t_lo = T_apex
    if g(t_lo) >= 0:
        raise TransitionNotFound("next manifold already reached at the apex")
    step = 0.02
    t_hi = t_lo + step
    while g(t_hi) < 0:
        t_lo, t_hi = t_hi, t_hi + step
        if t_hi - T_apex > 5.0:
            raise TransitionNotFound("no crossing of the next manifold within 5 s")
    return float(brentq(g, t_lo, t_hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))


def attach_multicontact(plans: list, fraction: float = 0.25) -> list:
    """Add a quintic dual-contact bridge around every interior transition.

    The window spans ``fraction`` of the earlier step's duration, centred on
    the transition time.
    """
    out = list(plans)
    for q in range(len(plans) - 1):
        a, b = plans[q], plans[q + 1]
        T = fraction * a.duration
        t_pre, t_post = a.t_exit - 0.5 * T, a.t_exit + 0.5 * T
        if t_pre <= a.t_entry or t_post >= b.t_exit:
            raise StepError("multi-contact window does not fit inside the steps", q)
        s_pre = state_at(a, t_pre)
        s_post = state_at(b, t_post)
        seg = smooth_multicontact((s_pre, a.accel(s_pre)), (s_post, b.accel(s_post)), T, t_pre)
        out[q] = replace(out[q], multicontact=seg)
    return out


def state_at(plan: StepPlan, t: float) -> PhaseState:
    """Evaluate a step's single-contact flow at global time ``t``."""
    s_e, sd_e, l_e, ld_e = plan.local(plan.entry)
    loc = _Local(plan.heading, plan.omega, plan.manifold.x_foot, plan.lateral_foot,
                 s_e, sd_e, l_e, ld_e)
    return PhaseState.from_array(loc.global_state(t - plan.t_entry, plan.spec.surface)[0])


def generate_nominal(steps: Sequence[StepSpec], params: RobotParams,
                     cfg: PlannerConfig | None = None, entry: PhaseState | None = None) -> list:
    """Plan a walk over ``steps`` from a default on-manifold entry."""
    cfg = cfg or PlannerConfig()
    if not steps:
        raise ValueError("need at least one step")
    if entry is None:
        try:
            steps[0].validate(params, cfg.min_apex_speed)
        except ValueError as exc:
            raise StepError(str(exc), 0) from exc
        entry = default_entry(steps[0], steps[1] if len(steps) > 1 else None, params, cfg)
    return plan_from_entry(steps, entry, 0.0, params, cfg)


def plan_steered_walk(keyframes: Sequence[tuple], params: RobotParams,
                      cfg: PlannerConfig | None = None, surfaces=None, apex_height: float = 1.0) -> list:
    """Plan from ``(apex_speed, foot_guess, heading)`` keyframes.

    Surfaces default to level planes at ``apex_height`` above each foot.
    """
    steps = []
    for q, (v, g, th) in enumerate(keyframes):
        g = tuple(float(c) for c in g) + (0.0,) * (3 - len(g))
        surf = surfaces[q] if surfaces is not None else ComSurface(0.0, 0.0, g[2] + apex_height)
        steps.append(StepSpec(g, surf, float(v), float(th)))
    return generate_nominal(steps, params, cfg)


def plan_samples(plans: Sequence[StepPlan]) -> tuple:
    """Concatenate step trajectories (shared transition samples dropped)."""
    ts, ss, idx = [], [], []
    for q, p in enumerate(plans):
        sl = slice(1 if q else 0, None)
        ts.append(p.trajectory.t[sl])
        ss.append(p.trajectory.states[sl])
        idx.append(np.full(ts[-1].shape[0], p.index))
    return np.concatenate(ts), np.concatenate(ss), np.concatenate(idx)
