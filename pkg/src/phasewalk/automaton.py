"""Hybrid automaton executing a planned walk with disturbance recovery.

The continuous state evolves under the pendulum flow of the active stance
foot; guards end a step, jumps reset the velocity (pushes) or the controls
(DP engagement), and switchings swap the stance foot.  Each step is
re-planned from the actual state at its entry, so the lateral foot search
always runs on the measured transition state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from . import kernels
from .dynamics import ComSurface, PhaseState, RobotParams
from .errors import (IllegalEdge, InfeasibleApex, PhaseWalkError, StepError,
                     WalkFailed)
from .manifold import (BundleSpec, DomainError, ManifoldParams, classify_disturbance,
                       sensitivity_norm, sigma_apex)
from .planner import (PlannerConfig, StepPlan, state_at, plan_from_entry,
                      smooth_multicontact, to_global, to_local)
from .recovery import (PolicyCache, PolicyTable, RecoveryServo, lateral_energy, recover,
                       replan_foot)


class Mode(str, Enum):
    LEFT = "LeftSupport"
    RIGHT = "RightSupport"
    DUAL = "DualSupport"


class GuardKind(str, Enum):
    POSITION = "position"
    VELOCITY = "velocity"
    PROGRESSION = "progression"
    MANIFOLD = "manifold"


class EventClass(str, Enum):
    AUTONOMOUS_SWITCHING = "Autonomous-Switching"
    AUTONOMOUS_JUMP = "Autonomous-Jump"
    CONTROLLED_SWITCHING = "Controlled-Switching"
    CONTROLLED_JUMP = "Controlled-Jump"
    TIMED_SWITCHING = "Timed-Switching"
    TIMED_JUMP = "Timed-Jump"
    DISTURBED_SWITCHING = "Disturbed-Switching"
    DISTURBED_JUMP = "Disturbed-Jump"

    @property
    def is_jump(self) -> bool:
        return self.value.endswith("Jump")


@dataclass(frozen=True)
class Guard:
    kind: GuardKind
    threshold: float
    direction: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", GuardKind(self.kind))
        if not math.isfinite(self.threshold):
            raise ValueError("guard threshold must be finite")


@dataclass(frozen=True)
class HybridState:
    zeta: float
    mode: Mode
    state: PhaseState

    def __post_init__(self):
        if not self.zeta >= 0:
            raise ValueError("zeta must be non-negative")


@dataclass(frozen=True)
class TransitionEvent:
    cls: EventClass
    t: float
    step: int
    zeta: float
    payload: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"class": self.cls.value, "t": self.t, "step": self.step, "zeta": self.zeta,
                "payload": self.payload}

    @classmethod
    def from_dict(cls, d: dict) -> "TransitionEvent":
        return cls(EventClass(d["class"]), float(d["t"]), int(d["step"]), float(d["zeta"]),
                   dict(d.get("payload", {})))


@dataclass(frozen=True)
class Disturbance:
    trigger: float
    dv: tuple  # (sagittal, lateral) velocity jump
    by: str = "zeta"  # "zeta" (step index + local progression) or "time"

    def __post_init__(self):
        object.__setattr__(self, "dv", tuple(float(v) for v in self.dv))
        if len(self.dv) != 2 or not all(math.isfinite(v) for v in self.dv):
            raise ValueError("velocity jump must be a finite 2-vector")
        if self.by not in ("zeta", "time"):
            raise ValueError("trigger must be by 'zeta' or 'time'")
        if not math.isfinite(self.trigger):
            raise ValueError("trigger must be finite")


@dataclass(frozen=True)
class DisturbanceSchedule:
    entries: tuple = ()

    def __post_init__(self):
        e = tuple(self.entries)
        object.__setattr__(self, "entries", e)
        for by in ("zeta", "time"):
            tr = [d.trigger for d in e if d.by == by]
            if tr != sorted(tr):
                raise ValueError("disturbance triggers must be sorted")

    def __len__(self):
        return len(self.entries)

    @classmethod
    def parse(cls, specs: Sequence[str]) -> "DisturbanceSchedule":
        """From ``"<zeta>:<dvx>,<dvy>"`` strings (``t=<time>:...`` for time triggers)."""
        out = []
        for s in specs:
            head, _, tail = s.partition(":")
            by = "zeta"
            if head.startswith("t="):
                by, head = "time", head[2:]
            dvx, _, dvy = tail.partition(",")
            out.append(Disturbance(float(head), (float(dvx), float(dvy or 0.0)), by))
        out.sort(key=lambda d: (d.by, d.trigger))
        return cls(tuple(out))


# -- guards ----------------------------------------------------------------

def guard_value(guard: Guard, h: HybridState, plan: StepPlan,
                next_manifold: ManifoldParams | None = None, eps: float = 0.0) -> float:
    """Signed guard function; the guard fires where it crosses zero upward.

    Position: ``s - x_t``.  Velocity: ``s_dot - v_t`` past the apex.
    Progression: step progression minus the threshold.  Manifold: next-step
    sigma (expressed in this step's frame) minus the threshold (``-eps`` by
    default).
    """
    s, sd, _, _ = plan.local(h.state)
    k = guard.kind
    d = 1 if guard.direction >= 0 else -1
    if k is GuardKind.POSITION:
        return d * (s - guard.threshold)
    if k is GuardKind.VELOCITY:
        if s <= plan.manifold.x_foot:
            return -1.0
        return d * (sd - guard.threshold)
    if k is GuardKind.PROGRESSION:
        try:
            return d * (float(plan.progression(s, sd)) - guard.threshold)
        except DomainError:
            return -1.0
    if next_manifold is None:
        raise ValueError("manifold guard needs the next step's manifold")
    m = next_manifold
    return d * (float(sigma_apex(s, sd, m.x_foot, m.xd0, m.omega)) - guard.threshold)


def eval_guard(guard: Guard, h: HybridState, manifolds: ManifoldParams | None = None,
               plan: StepPlan | None = None) -> bool:
    """True once the guard condition holds (boundary inclusive)."""
    if plan is None:
        # step-free use: sagittal axis is x
        s, sd = h.state.x, h.state.xd
        k = GuardKind(guard.kind)
        d = 1 if guard.direction >= 0 else -1
        if k is GuardKind.POSITION:
            return d * (s - guard.threshold) >= 0
        if k is GuardKind.VELOCITY:
            foot = manifolds.x_foot if manifolds is not None else -math.inf
            return s > foot and d * (sd - guard.threshold) >= 0
        if k is GuardKind.PROGRESSION:
            return d * (h.zeta - guard.threshold) >= 0
        m = manifolds
        return d * (float(sigma_apex(s, sd, m.x_foot, m.xd0, m.omega)) - guard.threshold) >= 0
    return guard_value(guard, h, plan, manifolds) >= 0


# -- transition map ----------------------------------------------------------

_EDGES = {(Mode.LEFT, Mode.DUAL), (Mode.DUAL, Mode.LEFT), (Mode.RIGHT, Mode.DUAL),
          (Mode.DUAL, Mode.RIGHT)}


def legal_edge(a: Mode, b: Mode, dual_time: float) -> bool:
    if (a, b) in _EDGES:
        return True
    return dual_time == 0 and {a, b} == {Mode.LEFT, Mode.RIGHT}


def apply_transition(h: HybridState, ev: TransitionEvent, dual_time: float = 0.0,
                     surface: ComSurface | None = None) -> HybridState:
    """Apply a switching (mode change, zeta re-anchored to 0) or a jump
    (velocity impulse from ``payload['dv']`` in global x/y, or a pure control
    reset that leaves the state untouched)."""
    if ev.cls.is_jump:
        dv = ev.payload.get("dv")
        if dv is None:
            return h
        return replace(h, state=h.state.with_velocity_jump(dv[0], dv[1], surface))
    if "mode" not in ev.payload:
        return h  # parameter swap only (new foot), state and mode unchanged
    target = Mode(ev.payload["mode"])
    if not legal_edge(h.mode, target, dual_time):
        raise IllegalEdge(f"{h.mode.value} -> {target.value} with dual time {dual_time}")
    return HybridState(0.0, target, h.state)


# -- walk execution ----------------------------------------------------------

@dataclass(frozen=True)
class WalkConfig:
    dt: float = 1e-3
    guard: GuardKind = GuardKind.MANIFOLD
    bundle: BundleSpec = BundleSpec()
    robot: RobotParams = RobotParams()
    planner: PlannerConfig = PlannerConfig()
    recovery: bool = True
    dual_support_time: float = 0.0
    step_timeout: float = 5.0
    replan_tol: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "guard", GuardKind(self.guard))
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.dual_support_time < 0:
            raise ValueError("dual support time must be >= 0")
        if 0 < self.dual_support_time < self.dt:
            raise ValueError("dual support must last at least one integrator step")


@dataclass
class WalkLog:
    t: list = field(default_factory=list)
    zeta: list = field(default_factory=list)
    zeta_local: list = field(default_factory=list)
    step: list = field(default_factory=list)
    mode: list = field(default_factory=list)
    states: list = field(default_factory=list)
    controls: list = field(default_factory=list)
    sigma: list = field(default_factory=list)
    events: list = field(default_factory=list)
    plans: list = field(default_factory=list)
    nominal_feet: list = field(default_factory=list)
    apex: dict = field(default_factory=dict)
    kappa: dict = field(default_factory=dict)
    completed: bool = False
    failure: str | None = None

    def append(self, t, zeta, zl, step, mode, state, ctrl, sig):
        self.t.append(float(t))
        self.zeta.append(float(zeta))
        self.zeta_local.append(float(zl))
        self.step.append(int(step))
        self.mode.append(mode.value)
        self.states.append(np.asarray(state, float).copy())
        self.controls.append(np.asarray(ctrl, float).copy())
        self.sigma.append(float(sig))

    def arrays(self) -> dict:
        return {
            "t": np.asarray(self.t), "zeta": np.asarray(self.zeta),
            "zeta_local": np.asarray(self.zeta_local), "step": np.asarray(self.step),
            "mode": np.asarray(self.mode), "states": np.asarray(self.states).reshape(-1, 6),
            "controls": np.asarray(self.controls).reshape(-1, 7),
            "sigma": np.asarray(self.sigma),
        }

    def events_of(self, cls: EventClass) -> list:
        return [e for e in self.events if e.cls is cls]

    def step_slice(self, q: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.step) == q)


def _support_mode(plan: StepPlan) -> Mode:
    """Left or right stance from the foot's side of the CoM path at apex."""
    s = state_at(plan, plan.t_apex)
    l_c = plan.local(s)[2]
    return Mode.LEFT if plan.lateral_foot > l_c else Mode.RIGHT


def _global_torque(theta: float, tau_s: float) -> tuple:
    """(tau_x, tau_y) whose acceleration offset is ``tau_s`` along the heading."""
    ty, tx = to_global(theta, (tau_s, 0.0))
    return float(tx), float(ty)


class _Runner:
    def __init__(self, plans, table, schedule, cfg: WalkConfig):
        if not plans:
            raise ValueError("need at least one planned step")
        self.cfg = cfg
        self.specs = [p.spec for p in plans]
        self.nominal = list(plans)
        self.schedule = list(schedule.entries) if schedule is not None else []
        self.fired = [False] * len(self.schedule)
        self.table = table
        self.log = WalkLog()
        self.log.nominal_feet = [tuple(p.foot) for p in plans]
        self.t = plans[0].t_entry
        self.zeta_l = 0.0
        self.last_switch_t = -math.inf

    # -- helpers
    def table_for(self, plan: StepPlan) -> PolicyTable | None:
        tb = self.table
        if tb is None or not self.cfg.recovery:
            return None
        if isinstance(tb, PolicyCache):
            return tb.get(plan)
        m = tb.step
        if abs(m.xd_apex - plan.spec.apex_speed) > 1e-9 or abs(m.omega_ref - plan.omega) > 1e-9:
            raise WalkFailed("policy table does not match the step", plan.index)
        tb = tb.relocated(plan.manifold.x_foot)
        if tb.region is None:
            tb = tb.with_region(self.cfg.bundle)
        return tb

    def plan_step(self, q: int, entry: PhaseState, t0: float, spec=None) -> StepPlan:
        specs = [spec or self.specs[q]] + self.specs[q + 1:q + 2]
        final = None
        if q == len(self.specs) - 1:
            nom = self.nominal[q]
            final = nom.local(nom.exit)[0] - nom.manifold.x_foot
        try:
            plans = plan_from_entry(specs, entry, t0, self.cfg.robot,
                                    replace(self.cfg.planner, multicontact_fraction=0.0),
                                    first_index=q, final_exit=final)
        except StepError as exc:
            raise WalkFailed(str(exc), q, exc) from exc
        return plans[0]

    def emit(self, cls, step, payload=None):
        ev = TransitionEvent(cls, float(self.t), int(step), float(step + self.zeta_l),
                             payload or {})
        self.log.events.append(ev)
        return ev

    def pending_disturbance(self, q: int):
        for i, d in enumerate(self.schedule):
            if self.fired[i]:
                continue
            now = self.t if d.by == "time" else q + self.zeta_l
            if now >= d.trigger:
                self.fired[i] = True
                return d
        return None

    # -- main loop
    def run(self) -> WalkLog:
        state = self.nominal[0].entry
        q = 0
        n = len(self.specs)
        mode = _support_mode(self.nominal[0])
        spec_override = None
        reason = None
        while q < n:
            plan = self.plan_step(q, state, self.t, spec_override)
            if q == 0:
                mode = _support_mode(plan)
            self.zeta_l = 0.0
            if reason is not None:
                ev = self.emit(EventClass.CONTROLLED_SWITCHING, q, {
                    "reason": reason, "nominal_foot": list(self.nominal[q].foot),
                    "foot": list(plan.foot), "apex_speed": plan.spec.apex_speed})
                apply_transition(HybridState(0.0, mode, state), ev)
            self.log.plans.append(plan)
            state, mode, spec_override, reason = self.run_step(q, plan, state, mode)
            q += 1
        self.log.completed = True
        return self.log

    def run_step(self, q: int, plan: StepPlan, state: PhaseState, mode: Mode):
        cfg = self.cfg
        rb = cfg.robot
        eps = cfg.bundle.epsilon
        th = plan.heading
        surf = plan.spec.surface
        foot = plan.foot
        w_ref = plan.omega
        last = q == len(self.specs) - 1
        nxt_spec = None if last else self.specs[q + 1]
        next_manifold = None
        if nxt_spec is not None:
            s_fn = float(to_local(th, nxt_spec.foot[:2])[0])
            next_manifold = ManifoldParams.apex(s_fn, nxt_spec.apex_speed,
                                                nxt_spec.omega(rb))
        s_t = plan.transition[0]
        kind = cfg.guard if not last else GuardKind.POSITION
        if kind is GuardKind.POSITION:
            guard = Guard(kind, s_t)
        elif kind is GuardKind.VELOCITY:
            guard = Guard(kind, plan.transition[1])
        elif kind is GuardKind.PROGRESSION:
            guard = Guard(kind, 1.0)
        else:
            guard = Guard(kind, -eps)

        servo = None
        engaged = False
        replan_needed = False
        lateral_hit = False
        disturbed_zeta = None
        self.zeta_l = 0.0
        h = HybridState(0.0, mode, state)
        apex_done = False
        t_limit = self.t + cfg.step_timeout
        # a deviation carried over from a recovering step keeps the servo on
        if cfg.recovery and self._engaged_prev and abs(plan.sigma(state)) > eps * (1 + 1e-6):
            servo, engaged = self._engage(plan, state, q)
        self._engaged_prev = False

        st = state.as_array()
        self._record(q, mode, st, w_ref, 0.0, foot, plan)
        while True:
            # scheduled pushes
            d = self.pending_disturbance(q)
            while d is not None:
                pre = PhaseState.from_array(st)
                dv = to_global(th, d.dv)
                ev = self.emit(EventClass.DISTURBED_JUMP, q, {
                    "dv": [float(dv[0]), float(dv[1])], "dv_local": list(d.dv),
                    "trigger": d.trigger, "by": d.by})
                h = apply_transition(HybridState(self.zeta_l, mode, pre), ev, surface=surf)
                post = h.state
                st = post.as_array()
                rep = classify_disturbance(pre, post, replace(plan.manifold))
                ev.payload["category"] = rep.category.value
                ev.payload["sigma_jump"] = float(rep.sigma_jump)
                disturbed_zeta = self.zeta_l if disturbed_zeta is None else disturbed_zeta
                if abs(lateral_energy(plan, post) - lateral_energy(plan, pre)) > 1e-12:
                    lateral_hit = True
                if cfg.recovery and abs(plan.sigma(post)) > eps:
                    table = self.table_for(plan)
                    act = recover(post, plan, table, cfg.bundle, None)
                    if table is not None:
                        servo = RecoveryServo(table, eps)
                        engaged = True
                        u = servo.control(*plan.local(post)[:2])
                        pred = act.predicted_transition
                        self.emit(EventClass.CONTROLLED_JUMP, q, {
                            "action": act.kind, "omega": u[0], "tau_y": u[1],
                            "sigma": float(plan.sigma(post)),
                            "predicted_transition": list(pred) if pred else None})
                    if act.kind == "replan" or table is None:
                        replan_needed = True
                self._record(q, mode, st, w_ref, 0.0, foot, plan)
                d = self.pending_disturbance(q)

            # controls
            s, sd, _, _ = plan.local(PhaseState.from_array(st))
            if engaged and servo is not None:
                w, tau_s = servo.control(s, sd)
                if servo.out_of_grid:
                    replan_needed = True
            else:
                w, tau_s = w_ref, 0.0
            tx, ty = _global_torque(th, tau_s)
            p = np.array([w, tx, ty, 0.0, foot[0], foot[1], surf.a, surf.b, rb.mass, rb.gravity])

            nxt = kernels.rk4_path(st, p, cfg.dt, 1)[1]
            t_new = self.t + cfg.dt

            # guard (replan pending => position guard at the planned transition)
            g_act = guard if not (replan_needed and guard.kind is GuardKind.MANIFOLD) \
                else Guard(GuardKind.POSITION, s_t)
            g_old = self._gval(g_act, st, plan, next_manifold)
            g_new = self._gval(g_act, nxt, plan, next_manifold)
            armed = (t_new - self.last_switch_t) >= cfg.dt * (1 - 1e-9)
            fire = armed and g_new >= 0
            if not apex_done and plan.local(PhaseState.from_array(nxt))[0] >= plan.manifold.x_foot:
                self._mark_apex(q, st, p, plan)
                apex_done = True
            if fire:
                h_frac = self._locate(g_act, st, p, plan, next_manifold, g_old)
                nxt = kernels.rk4_path(st, p, h_frac, 1)[1] if h_frac > 0 else st.copy()
                t_new = self.t + h_frac
                if not apex_done and plan.local(PhaseState.from_array(nxt))[0] >= plan.manifold.x_foot:
                    self._mark_apex(q, st, p, plan)
                    apex_done = True
            self._advance_zeta(plan, st, nxt)
            self.t = t_new
            st = nxt
            self._record(q, mode, st, w, tau_s, foot, plan, torque=(tx, ty))
            if fire and t_new - plan.t_entry >= 0:
                break
            if self.t > t_limit:
                raise WalkFailed(f"{g_act.kind.value} guard never fired", q)
            if st[3] * math.cos(th) + st[4] * math.sin(th) <= 0 and s < plan.manifold.x_foot:
                raise WalkFailed("forward motion reversed before the apex", q)

        # kappa over the disturbed step
        if disturbed_zeta is not None:
            self._kappa(q, plan, disturbed_zeta)

        exit_state = PhaseState.from_array(st)
        residual = float(self._gval(g_act, st, plan, next_manifold))
        self._engaged_prev = engaged
        if last:
            return exit_state, mode, None, None

        # step transition
        new_spec = None
        s_x, sd_x, _, _ = plan.local(exit_state)
        spec_n = self.specs[q + 1]
        if engaged and (replan_needed or abs(plan.sigma(exit_state)) > eps):
            try:
                new_spec = self._replan_spec(spec_n, th, s_x, sd_x)
            except InfeasibleApex as exc:
                raise WalkFailed(str(exc), q + 1, exc) from exc
        target = Mode.RIGHT if mode is Mode.LEFT else Mode.LEFT
        if cfg.dual_support_time > 0:
            exit_state = self._dual_support(q, plan, exit_state, mode, new_spec or spec_n)
            mode = Mode.DUAL
        ev = self.emit(EventClass.AUTONOMOUS_SWITCHING, q, {
            "mode": target.value, "from": mode.value, "guard": g_act.kind.value,
            "residual": residual, "x": exit_state.as_array().tolist()})
        h = apply_transition(HybridState(self.zeta_l, mode, exit_state), ev,
                             cfg.dual_support_time)
        self.last_switch_t = self.t
        reason = "sagittal" if new_spec is not None else ("lateral" if lateral_hit else None)
        return h.state, h.mode, new_spec, reason

    # -- pieces
    _engaged_prev = False

    def _engage(self, plan, state, q):
        table = self.table_for(plan)
        if table is None:
            return None, False
        servo = RecoveryServo(table, self.cfg.bundle.epsilon)
        u = servo.control(*plan.local(state)[:2])
        self.emit(EventClass.CONTROLLED_JUMP, q, {"action": "continuous", "omega": u[0],
                                                  "tau_y": u[1],
                                                  "sigma": float(plan.sigma(state))})
        return servo, True

    def _replan_spec(self, spec_n, th, s_x, sd_x):
        rb = self.cfg.robot
        w_n = spec_n.omega(rb)
        s_old, l_old = (float(v) for v in to_local(th, spec_n.foot[:2]))
        s_new = s_old
        for _ in range(4):  # omega depends on the foot via the surface height
            s_new = replan_foot(s_x, sd_x, spec_n.apex_speed, w_n)
            xy = to_global(th, (s_new, l_old))
            cand = replace(spec_n, foot=(float(xy[0]), float(xy[1]), spec_n.foot[2]))
            w_new = cand.omega(rb)
            if abs(w_new - w_n) <= 1e-15 * w_n:
                break
            w_n = w_new
        return cand

    def _dual_support(self, q, plan, exit_state, mode, spec_n):
        """Quintic bridge from the guard state to the next flow advanced by
        the dual-support time; sigma feedback is off meanwhile."""
        cfg = self.cfg
        T = cfg.dual_support_time
        nplan = self.plan_step(q + 1, exit_state, self.t, spec_n)
        end = state_at(nplan, self.t + T)
        seg = smooth_multicontact((exit_state, plan.accel(exit_state)),
                                  (end, nplan.accel(end)), T, self.t)
        ev = self.emit(EventClass.AUTONOMOUS_SWITCHING, q, {"mode": Mode.DUAL.value,
                                                            "from": mode.value})
        apply_transition(HybridState(self.zeta_l, mode, exit_state), ev, T)
        self.last_switch_t = self.t
        t0 = self.t
        n = max(1, int(math.ceil(T / cfg.dt - 1e-9)))
        for k in range(1, n + 1):
            tk = t0 + min(k * cfg.dt, T)
            pos, vel, _ = seg.evaluate(tk)
            self.t = tk
            st = np.r_[pos, vel]
            self._record(q, Mode.DUAL, st, nplan.omega, 0.0, nplan.foot, plan)
        return PhaseState.from_array(np.r_[seg.evaluate(t0 + T)[0], seg.evaluate(t0 + T)[1]])

    def _gval(self, guard, st, plan, nm):
        h = HybridState(0.0, Mode.LEFT, PhaseState.from_array(st))
        return guard_value(guard, h, plan, nm)

    def _locate(self, guard, st, p, plan, nm, g_old):
        """Exact crossing time within the last step (partial RK4 step)."""
        if g_old >= 0:
            return 0.0

        def f(hh):
            return self._gval(guard, kernels.rk4_path(st, p, hh, 1)[1], plan, nm)

        return float(brentq(f, 0.0, self.cfg.dt, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                            maxiter=200))

    def _mark_apex(self, q, st, p, plan):
        f = plan.manifold.x_foot

        def g(hh):
            s = plan.local(PhaseState.from_array(kernels.rk4_path(st, p, hh, 1)[1]))[0]
            return s - f

        s0 = plan.local(PhaseState.from_array(st))[0]
        hh = 0.0 if s0 >= f else brentq(g, 0.0, self.cfg.dt, xtol=1e-15, maxiter=200)
        sa = kernels.rk4_path(st, p, hh, 1)[1] if hh > 0 else st
        loc = plan.local(PhaseState.from_array(sa))
        self.log.apex[q] = {"t": float(self.t + hh), "s": loc[0], "sd": loc[1],
                            "l": loc[2], "ld": loc[3]}

    def _prog(self, plan, s, sd):
        try:
            return float(plan.progression(s, sd))
        except (DomainError, ValueError, ZeroDivisionError):
            return None

    def _advance_zeta(self, plan, st, nxt):
        a = plan.local(PhaseState.from_array(st))
        b = plan.local(PhaseState.from_array(nxt))
        pa, pb = self._prog(plan, a[0], a[1]), self._prog(plan, b[0], b[1])
        if pa is not None and pb is not None:
            self.zeta_l += max(pb - pa, 0.0)

    def _record(self, q, mode, st, w, tau_s, foot, plan, torque=None):
        if torque is None:
            torque = _global_torque(plan.heading, tau_s)
        ctrl = np.array([w, torque[0], torque[1], 0.0, foot[0], foot[1], foot[2]])
        sig = plan.sigma(PhaseState.from_array(st))
        self.log.append(self.t, q + self.zeta_l, self.zeta_l, q, mode, st, ctrl, sig)

    def _kappa(self, q, plan, zeta_d):
        idx = self.log.step_slice(q)
        z = np.asarray(self.log.zeta_local)[idx]
        sg = np.asarray(self.log.sigma)[idx]
        z_end = float(z[-1])
        if z_end <= zeta_d:
            self.log.kappa[q] = 0.0
            return
        # post-disturbance samples only: the first one at zeta_d is the jumped state
        sel = np.flatnonzero(z >= zeta_d)
        k0 = sel[0]
        ev_t = [e.t for e in self.log.events if e.cls is EventClass.DISTURBED_JUMP and e.step == q]
        tt = np.asarray(self.log.t)[idx]
        if ev_t:
            k0 = int(np.searchsorted(tt, ev_t[0], side="left"))
        zz, ss = z[k0:], sg[k0:]
        if zz.shape[0] < 2:
            self.log.kappa[q] = float(abs(ss[0])) if ss.size else 0.0
            return
        self.log.kappa[q] = float(sensitivity_norm(zz, ss, float(zz[0]), float(zz[-1])))


def run_walk(plans: Sequence[StepPlan], table, disturbances: DisturbanceSchedule | None,
             config: WalkConfig | None = None) -> WalkLog:
    """Execute ``plans`` with the hybrid automaton.

    ``table`` is a PolicyTable (reused by translation for every step with
    matching apex speed and omega), a PolicyCache, or None to disable the
    continuous recovery channel.  Failures raise WalkFailed carrying the
    step index and cause.
    """
    cfg = config or WalkConfig()
    runner = _Runner(list(plans), table, disturbances, cfg)
    try:
        log = runner.run()
    except WalkFailed:
        raise
    except PhaseWalkError as exc:
        step = getattr(exc, "step", None)
        raise WalkFailed(str(exc), step, exc) from exc
    _check_log(log, cfg)
    return log


def _check_log(log: WalkLog, cfg: WalkConfig) -> None:
    """No-Zeno and mode-graph assertions on a finished log."""
    sw = [e for e in log.events if not e.cls.is_jump and "mode" in e.payload]
    for a, b in zip(sw, sw[1:]):
        if b.t - a.t < cfg.dt * (1 - 1e-9):
            raise WalkFailed(f"switchings {a.t} and {b.t} closer than one step", b.step)
    for e in sw:
        src, dst = Mode(e.payload["from"]), Mode(e.payload["mode"])
        if not legal_edge(src, dst, cfg.dual_support_time):
            raise WalkFailed(f"illegal edge {src.value}->{dst.value}", e.step)
